"""Linear canonical correlation analysis between two aligned views."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import as_matrix, check_nonnegative, check_paired, check_positive_int, fix_signs
from .exceptions import DimensionError, NumericalError, ParseError

logger = logging.getLogger(__name__)

MODEL_FORMAT = "daembed.cca/1"
VIEWS = ("ds", "gen")


@dataclass(frozen=True, eq=False)
class CcaModel:
    phi_ds: np.ndarray
    phi_g: np.ndarray
    correlations: np.ndarray
    mean_ds: np.ndarray
    mean_g: np.ndarray
    ridge: float = 0.0
    # largest |off-diagonal| correlation between distinct training canonical variables
    max_offdiag: float = 0.0

    @property
    def d(self) -> int:
        return self.correlations.shape[0]

    def to_dict(self):
        return {
            "format": MODEL_FORMAT,
            "d": self.d,
            "ridge": self.ridge,
            "max_offdiag": self.max_offdiag,
            "mean_ds": self.mean_ds.tolist(),
            "mean_g": self.mean_g.tolist(),
            "phi_ds": self.phi_ds.tolist(),
            "phi_g": self.phi_g.tolist(),
            "correlations": self.correlations.tolist(),
        }

    @classmethod
    def from_dict(cls, data):
        if data.get("format") != MODEL_FORMAT:
            raise ParseError(f"unsupported model format {data.get('format')!r}")
        model = cls(
            phi_ds=np.asarray(data["phi_ds"], dtype=np.float64),
            phi_g=np.asarray(data["phi_g"], dtype=np.float64),
            correlations=np.asarray(data["correlations"], dtype=np.float64),
            mean_ds=np.asarray(data["mean_ds"], dtype=np.float64),
            mean_g=np.asarray(data["mean_g"], dtype=np.float64),
            ridge=float(data["ridge"]),
            max_offdiag=float(data["max_offdiag"]),
        )
        if model.d != data["d"]:
            raise ParseError("stored d does not match the projection matrices")
        return model

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _inv_sqrt(C, what):
    evals, evecs = np.linalg.eigh(C)
    tol = C.shape[0] * np.finfo(np.float64).eps * max(evals[-1], 0.0)
    if evals[0] <= tol:
        raise NumericalError(
            f"{what} auto-covariance is singular (smallest eigenvalue {evals[0]:.3g}); "
            "use a nonzero ridge"
        )
    return (evecs / np.sqrt(evals)) @ evecs.T


def _regularized_cov(Xc, ridge):
    n = Xc.shape[0]
    C = Xc.T @ Xc / n
    if ridge:
        C = C + ridge * (np.trace(C) / C.shape[0]) * np.eye(C.shape[0])
    return C


def cca_fit(X, Y, d, ridge=1e-3) -> CcaModel:
    """Fit ``d`` pairs of canonical directions.

    Both views are mean-centered. ``ridge`` is scaled by the mean variance
    of each view before it is added to that view's covariance diagonal.
    """
    X, Y = check_paired(X, Y)
    d = check_positive_int(d, "d")
    ridge = check_nonnegative(ridge, "ridge")
    d1, d2 = X.shape[1], Y.shape[1]
    if d > min(d1, d2):
        raise DimensionError(f"d={d} exceeds min(d1, d2)={min(d1, d2)}")
    mean_x, mean_y = X.mean(axis=0), Y.mean(axis=0)
    Xc, Yc = X - mean_x, Y - mean_y
    n = X.shape[0]
    Cxx = _regularized_cov(Xc, ridge)
    Cyy = _regularized_cov(Yc, ridge)
    Cxy = Xc.T @ Yc / n
    Wx = _inv_sqrt(Cxx, "first view")
    Wy = _inv_sqrt(Cyy, "second view")
    U, s, Vt = np.linalg.svd(Wx @ Cxy @ Wy)
    phi_x = Wx @ U[:, :d]
    phi_y = Wy @ Vt[:d].T
    signs = fix_signs(phi_x)
    phi_x *= signs
    phi_y *= signs

    Z = np.hstack([Xc @ phi_x, Yc @ phi_y])
    R = np.corrcoef(Z, rowvar=False) if d > 1 else np.eye(2)
    offdiag = 0.0
    if d > 1:
        blocks = [R[:d, :d], R[d:, d:], R[:d, d:]]
        offdiag = max(float(np.max(np.abs(b - np.diag(np.diag(b))))) for b in blocks)
    if ridge == 0.0 and offdiag > 1e-6:
        raise NumericalError(
            f"canonical variables are not decorrelated (max off-diagonal {offdiag:.3g}); "
            "the covariance is ill-conditioned, use a nonzero ridge"
        )
    return CcaModel(
        phi_ds=phi_x, phi_g=phi_y, correlations=np.clip(s[:d], 0.0, None),
        mean_ds=mean_x, mean_g=mean_y, ridge=ridge, max_offdiag=offdiag,
    )


def cca_fit_pairs(pairs, d, ridge=1e-3) -> CcaModel:
    return cca_fit(pairs.ds_vectors, pairs.gen_vectors, d, ridge)


def cca_project(model: CcaModel, vectors, view="ds"):
    """Center ``vectors`` with the view's training mean and apply its directions."""
    if view not in VIEWS:
        raise ValueError(f"view must be one of {VIEWS}, got {view!r}")
    phi, mean = (model.phi_ds, model.mean_ds) if view == "ds" else (model.phi_g, model.mean_g)
    vectors = as_matrix(vectors, "vectors", min_samples=0)
    if vectors.shape[1] != phi.shape[0]:
        raise DimensionError(
            f"{view} vectors have width {vectors.shape[1]}, model expects {phi.shape[0]}"
        )
    return (vectors - mean) @ phi


class LinearCCA(TransformerMixin, BaseEstimator):
    """Two-view CCA estimator.

    Parameters
    ----------
    n_components : int, default=2
        Number of canonical pairs kept.
    ridge : float, default=1e-3
        Relative diagonal loading of each auto-covariance.

    Attributes
    ----------
    model_ : CcaModel
    correlations_ : ndarray of shape (n_components,)

    Examples
    --------
    >>> import numpy as np
    >>> X = np.random.default_rng(0).normal(size=(100, 3))
    >>> cca = LinearCCA(n_components=2, ridge=0.0).fit(X, X @ np.diag([2.0, 1.0, 3.0]))
    >>> np.round(cca.correlations_, 6).tolist()
    [1.0, 1.0]
    """

    def __init__(self, n_components=2, ridge=1e-3):
        self.n_components = n_components
        self.ridge = ridge

    def fit(self, X, Y):
        self.model_ = cca_fit(X, Y, self.n_components, self.ridge)
        self.correlations_ = self.model_.correlations
        self.n_features_in_ = self.model_.phi_ds.shape[0]
        return self

    def transform(self, X, Y=None):
        """Project ``X`` (and ``Y`` when given) onto the canonical directions."""
        check_is_fitted(self, "model_")
        Zx = cca_project(self.model_, X, "ds")
        if Y is None:
            return Zx
        return Zx, cca_project(self.model_, Y, "gen")

    def fit_transform(self, X, Y=None, **fit_params):
        return self.fit(X, Y).transform(X, Y)
