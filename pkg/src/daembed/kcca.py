"""Gaussian-kernel canonical correlation analysis.

The fit solves the regularized kernel CCA eigenproblem

    (Kx + n*kx*I)^-1 Ky (Ky + n*ky*I)^-1 Kx alpha = rho^2 alpha

through its symmetric form: with ``T = Kc^(1/2) (Kc + n*k*I)^(-1/2)`` for
each centered Gram matrix ``Kc``, the canonical correlations are the
singular values of ``Tx @ Ty``. For a left singular vector ``u``,
``alpha = pinv(Kx) @ Tx @ u`` solves the system above, and the training
variates are ``Kx @ alpha = Tx @ u``.

With ``kappa > 0`` the empirical correlation of the two variates is larger
than ``rho``, and distinct variates are orthogonal in the regularized
metric ``alpha_i' (Kc^2 + n*kappa*Kc) alpha_j`` rather than uncorrelated.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, replace

import numpy as np
from scipy.spatial.distance import cdist, pdist, squareform
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import as_matrix, check_nonnegative, check_paired, check_positive_int
from .exceptions import DimensionError, NumericalError, ParseError

logger = logging.getLogger(__name__)

MODEL_FORMAT = "daembed.kcca/1"
SIGMA_RULES = ("median", "twice-median", "explicit")
_RULE_FACTOR = {"median": 1.0, "twice-median": 2.0}


@dataclass(frozen=True)
class KernelConfig:
    """Bandwidth and regularization for one view.

    ``sigma`` may be left as None for the median rules and filled in by
    :meth:`resolve`.
    """

    sigma_rule: str = "median"
    sigma: float | None = None
    kappa: float = 0.1

    def __post_init__(self):
        if self.sigma_rule not in SIGMA_RULES:
            raise ValueError(f"sigma_rule must be one of {SIGMA_RULES}, got {self.sigma_rule!r}")
        if self.sigma is not None and not (np.isfinite(self.sigma) and self.sigma > 0):
            raise ValueError(f"sigma must be positive, got {self.sigma!r}")
        if self.sigma_rule == "explicit" and self.sigma is None:
            raise ValueError("an explicit sigma_rule requires sigma")
        check_nonnegative(self.kappa, "kappa")

    def resolve(self, vectors, sample_cap=1000, seed=0, median=None) -> "KernelConfig":
        if self.sigma is not None:
            return self
        if median is None:
            median = median_bandwidth(vectors, sample_cap, seed)
        return replace(self, sigma=_RULE_FACTOR[self.sigma_rule] * median)


def _sample_rows(vectors, sample_cap, seed):
    n = vectors.shape[0]
    if n <= sample_cap:
        return vectors
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(n, size=sample_cap, replace=False))
    return vectors[idx]


def _lower_median(values):
    values = np.sort(values, kind="stable")
    return float(values[(values.size - 1) // 2])


def median_bandwidth(vectors, sample_cap=1000, seed=0) -> float:
    """Lower median of pairwise Euclidean distances between distinct rows.

    At most ``sample_cap`` rows are used, drawn without replacement with
    ``seed`` when there are more.
    """
    vectors = as_matrix(vectors, "vectors", min_samples=2)
    sample_cap = check_positive_int(sample_cap, "sample_cap")
    if sample_cap < 2:
        raise ValueError("sample_cap must be at least 2")
    mu = _lower_median(pdist(_sample_rows(vectors, sample_cap, seed)))
    if mu <= 0.0:
        raise NumericalError(
            "median pairwise distance is zero; set an explicit sigma"
        )
    return mu


def shared_median_bandwidth(views, sample_cap=1000, seed=0) -> float:
    """Lower median over the pooled within-view pairwise distances of several views."""
    dists = [pdist(_sample_rows(as_matrix(v, min_samples=2), sample_cap, seed)) for v in views]
    mu = _lower_median(np.concatenate(dists))
    if mu <= 0.0:
        raise NumericalError("median pairwise distance is zero; set an explicit sigma")
    return mu


def gaussian_gram(vectors, sigma) -> np.ndarray:
    """``exp(-||a - b||^2 / (2 sigma^2))`` for all row pairs."""
    vectors = as_matrix(vectors, "vectors", min_samples=0)
    if not (np.isfinite(sigma) and sigma > 0):
        raise ValueError(f"sigma must be positive, got {sigma!r}")
    if vectors.shape[0] == 0:
        return np.zeros((0, 0))
    sq = squareform(pdist(vectors, "sqeuclidean"))
    return np.exp(-sq / (2.0 * sigma * sigma))


def center_gram(K):
    """Double-center ``K``; returns the centered matrix, row means and grand mean."""
    row_means = K.mean(axis=1)
    grand = float(row_means.mean())
    Kc = K - row_means[:, None] - row_means[None, :] + grand
    return (Kc + Kc.T) / 2.0, row_means, grand


@dataclass(frozen=True, eq=False)
class KccaModel:
    train_ds: np.ndarray
    train_g: np.ndarray
    alpha_ds: np.ndarray
    alpha_g: np.ndarray
    correlations: np.ndarray
    config_ds: KernelConfig
    config_g: KernelConfig
    row_means_ds: np.ndarray
    row_means_g: np.ndarray
    grand_mean_ds: float
    grand_mean_g: float

    @property
    def d(self) -> int:
        return self.correlations.shape[0]

    @property
    def n(self) -> int:
        return self.train_ds.shape[0]

    def to_dict(self):
        def cfg(c):
            return {"sigma_rule": c.sigma_rule, "sigma": c.sigma, "kappa": c.kappa}

        return {
            "format": MODEL_FORMAT,
            "d": self.d,
            "config_ds": cfg(self.config_ds),
            "config_g": cfg(self.config_g),
            "correlations": self.correlations.tolist(),
            "train_ds": self.train_ds.tolist(),
            "train_g": self.train_g.tolist(),
            "alpha_ds": self.alpha_ds.tolist(),
            "alpha_g": self.alpha_g.tolist(),
            "row_means_ds": self.row_means_ds.tolist(),
            "row_means_g": self.row_means_g.tolist(),
            "grand_mean_ds": self.grand_mean_ds,
            "grand_mean_g": self.grand_mean_g,
        }

    @classmethod
    def from_dict(cls, data):
        if data.get("format") != MODEL_FORMAT:
            raise ParseError(f"unsupported model format {data.get('format')!r}")
        arr = lambda key: np.asarray(data[key], dtype=np.float64)  # noqa: E731
        return cls(
            train_ds=arr("train_ds"), train_g=arr("train_g"),
            alpha_ds=arr("alpha_ds").reshape(-1, data["d"]),
            alpha_g=arr("alpha_g").reshape(-1, data["d"]),
            correlations=arr("correlations"),
            config_ds=KernelConfig(**data["config_ds"]),
            config_g=KernelConfig(**data["config_g"]),
            row_means_ds=arr("row_means_ds"), row_means_g=arr("row_means_g"),
            grand_mean_ds=float(data["grand_mean_ds"]),
            grand_mean_g=float(data["grand_mean_g"]),
        )

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _whitening_factor(Kc, kappa, what):
    """Eigenbasis of ``Kc`` with ``sqrt(l / (l + n*kappa))`` weights and pseudo-inverse weights."""
    n = Kc.shape[0]
    evals, evecs = np.linalg.eigh(Kc)
    tol = n * np.finfo(np.float64).eps * max(evals[-1], 1.0)
    keep = evals > tol
    rank = int(keep.sum())
    if kappa == 0.0 and rank < n - 1:
        raise NumericalError(
            f"centered Gram matrix of the {what} view is rank deficient "
            f"(rank {rank} < {n - 1}); use kappa > 0"
        )
    if rank == 0:
        raise NumericalError(f"centered Gram matrix of the {what} view is zero")
    lam = np.where(keep, evals, 0.0)
    weight = np.sqrt(lam / (lam + n * kappa)) if kappa > 0 else keep.astype(float)
    inv = np.where(keep, 1.0 / np.where(keep, lam, 1.0), 0.0)
    return evecs, weight, inv


def kcca_fit(X, Y, d, cfg_ds=None, cfg_g=None, sample_cap=1000, seed=0) -> KccaModel:
    """Fit Gaussian-kernel CCA on paired rows of ``X`` and ``Y``.

    Configs whose ``sigma`` is unset are resolved by the median heuristic on
    their own view.
    """
    X, Y = check_paired(X, Y)
    d = check_positive_int(d, "d")
    n = X.shape[0]
    if d > n:
        raise DimensionError(f"d={d} exceeds the number of training pairs {n}")
    cfg_ds = (cfg_ds or KernelConfig()).resolve(X, sample_cap, seed)
    cfg_g = (cfg_g or KernelConfig()).resolve(Y, sample_cap, seed)

    Kx, rx, gx = center_gram(gaussian_gram(X, cfg_ds.sigma))
    Ky, ry, gy = center_gram(gaussian_gram(Y, cfg_g.sigma))
    Ex, wx, ix = _whitening_factor(Kx, cfg_ds.kappa, "first")
    Ey, wy, iy = _whitening_factor(Ky, cfg_g.kappa, "second")
    Tx = (Ex * wx) @ Ex.T
    Ty = (Ey * wy) @ Ey.T
    U, s, Vt = np.linalg.svd(Tx @ Ty)
    # Kx @ alpha = Tx @ u for the eigenvectors alpha of the nonsymmetric system
    za = Tx @ U[:, :d]
    zb = Ty @ Vt[:d].T
    za /= _unit_scale(za)
    zb /= _unit_scale(zb)

    ref = za[0].copy()
    weak = np.abs(ref) < 1e-12
    if weak.any():
        pivot = np.argmax(np.abs(za), axis=0)
        ref[weak] = za[pivot, np.arange(d)][weak]
    signs = np.where(ref < 0, -1.0, 1.0)
    za *= signs
    zb *= signs

    alpha_x = (Ex * ix) @ (Ex.T @ za)
    alpha_y = (Ey * iy) @ (Ey.T @ zb)
    return KccaModel(
        train_ds=X, train_g=Y, alpha_ds=alpha_x, alpha_g=alpha_y,
        correlations=np.clip(s[:d], 0.0, 1.0), config_ds=cfg_ds, config_g=cfg_g,
        row_means_ds=rx, row_means_g=ry, grand_mean_ds=gx, grand_mean_g=gy,
    )


def _unit_scale(Z):
    sd = np.sqrt(np.mean(Z ** 2, axis=0))
    sd[sd == 0.0] = 1.0
    return sd


def kcca_fit_pairs(pairs, d, cfg_ds=None, cfg_g=None, sample_cap=1000, seed=0) -> KccaModel:
    return kcca_fit(pairs.ds_vectors, pairs.gen_vectors, d, cfg_ds, cfg_g, sample_cap, seed)


def kcca_project(model: KccaModel, view="ds", indices=None):
    """Canonical variates of training rows ``indices`` (all rows when None)."""
    if view == "ds":
        train, cfg, alpha, rm, gm = (model.train_ds, model.config_ds, model.alpha_ds,
                                     model.row_means_ds, model.grand_mean_ds)
    elif view == "gen":
        train, cfg, alpha, rm, gm = (model.train_g, model.config_g, model.alpha_g,
                                     model.row_means_g, model.grand_mean_g)
    else:
        raise ValueError(f"view must be 'ds' or 'gen', got {view!r}")
    n = model.n
    idx = np.arange(n) if indices is None else np.asarray(indices, dtype=np.int64).reshape(-1)
    if idx.size == 0:
        return np.zeros((0, model.d))
    if idx.min() < 0 or idx.max() >= n:
        raise IndexError(f"training row indices must lie in [0, {n}); got {idx.min()}..{idx.max()}")
    sq = cdist(train[idx], train, "sqeuclidean")
    K = np.exp(-sq / (2.0 * cfg.sigma ** 2))
    Kc = K - rm[idx, None] - rm[None, :] + gm
    return Kc @ alpha


class KernelCCA(BaseEstimator):
    """Gaussian-kernel CCA estimator.

    Only training rows can be projected; there is no out-of-sample transform.

    Parameters
    ----------
    n_components : int, default=2
    kappa : float, default=0.1
        Regularization, added as ``n * kappa * I`` to each Gram matrix.
    sigma : {"median", "twice-median"} or float, default="median"
        Bandwidth rule or explicit bandwidth for the first view.
    sigma_y : {"median", "twice-median"} or float, optional
        Same for the second view; defaults to ``sigma``.
    shared_sigma : bool, default=False
        Use a single median computed over the pooled pairwise distances of
        both views instead of one per view.
    sample_cap : int, default=1000
        Maximum rows used by the median heuristic.
    random_state : int, default=0
    """

    def __init__(self, n_components=2, kappa=0.1, sigma="median", sigma_y=None,
                 shared_sigma=False, sample_cap=1000, random_state=0):
        self.n_components = n_components
        self.kappa = kappa
        self.sigma = sigma
        self.sigma_y = sigma_y
        self.shared_sigma = shared_sigma
        self.sample_cap = sample_cap
        self.random_state = random_state

    def _config(self, spec, median):
        if isinstance(spec, str):
            cfg = KernelConfig(spec, None, self.kappa)
            if median is not None and spec != "explicit":
                cfg = cfg.resolve(None, median=median)
            return cfg
        return KernelConfig("explicit", float(spec), self.kappa)

    def fit(self, X, Y):
        X, Y = check_paired(X, Y)
        median = None
        if self.shared_sigma:
            median = shared_median_bandwidth([X, Y], self.sample_cap, self.random_state)
        sigma_y = self.sigma if self.sigma_y is None else self.sigma_y
        self.model_ = kcca_fit(
            X, Y, self.n_components,
            self._config(self.sigma, median), self._config(sigma_y, median),
            self.sample_cap, self.random_state,
        )
        self.correlations_ = self.model_.correlations
        self.sigma_ = (self.model_.config_ds.sigma, self.model_.config_g.sigma)
        return self

    def project(self, view="ds", indices=None):
        check_is_fitted(self, "model_")
        return kcca_project(self.model_, view, indices)

    def fit_transform(self, X, Y):
        self.fit(X, Y)
        return self.project("ds"), self.project("gen")
