"""Domain-adapted embeddings: averaging of canonical projections, the
concatenation-SVD baseline, and cross-validated selection of ``d`` and the
kernel bandwidth rule."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_positive_int, fix_signs
from .cca import cca_fit, cca_project
from .embeddings import AlignedPairSet, EmbeddingTable, Vocabulary, intersect
from .evaluation import METRIC_NAMES, LabeledDataset, cross_validate, stratified_folds
from .exceptions import ConfigError, DaembedError, DimensionError, NumericalError
from .kcca import KernelConfig, kcca_fit, kcca_project, median_bandwidth, shared_median_bandwidth

logger = logging.getLogger(__name__)

METHODS = ("cca", "kcca", "concsvd")
SIGMA_RULE_ORDER = ("median", "twice-median")
DEFAULT_D_GRID = (8, 16, 32, 48, 64)


@dataclass(frozen=True)
class DaCombiner:
    alpha: float = 0.5
    beta: float = 0.5

    def __post_init__(self):
        if not (np.isfinite(self.alpha) and np.isfinite(self.beta)):
            raise ValueError("combination weights must be finite")


def _check_same_shape(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"projection shapes differ: {a.shape} vs {b.shape}")
    return a, b


def combine(proj_ds, proj_g, combiner=DaCombiner()):
    """Row-wise ``alpha * proj_ds + beta * proj_g``."""
    a, b = _check_same_shape(proj_ds, proj_g)
    return combiner.alpha * a + combiner.beta * b


def combination_objective(proj_ds, proj_g, alpha, beta):
    """Summed squared distance of the combination to each of the two projections."""
    a, b = _check_same_shape(proj_ds, proj_g)
    c = alpha * a + beta * b
    return float(np.sum((a - c) ** 2) + np.sum((b - c) ** 2))


def solve_combination_weights(proj_ds, proj_g) -> DaCombiner:
    """Least-squares weights minimizing :func:`combination_objective`.

    The normal equations read ``G [alpha, beta] = G [1/2, 1/2]`` with ``G``
    the 2x2 Gram matrix of the two projections, so (1/2, 1/2) always
    minimizes; when ``G`` is singular the minimizer is not unique and
    (1/2, 1/2) is returned.
    """
    a, b = _check_same_shape(proj_ds, proj_g)
    va, vb = a.ravel(), b.ravel()
    G = np.array([[va @ va, va @ vb], [va @ vb, vb @ vb]])
    rhs = G @ np.array([0.5, 0.5])
    scale = np.trace(G)
    if scale == 0.0 or np.linalg.cond(G) > 1e10:
        return DaCombiner(0.5, 0.5)
    alpha, beta = np.linalg.solve(G, rhs)
    if abs(alpha - 0.5) > 1e-9 or abs(beta - 0.5) > 1e-9:
        raise NumericalError(f"combination weights ({alpha}, {beta}) deviate from 1/2")
    # exact halves so the combination is bitwise the arithmetic mean
    return DaCombiner(0.5, 0.5)


def concsvd(pairs: AlignedPairSet, d: int) -> EmbeddingTable:
    """Concatenate both views, center, and keep ``U_d S_d`` of the SVD."""
    d = check_positive_int(d, "d")
    if d > pairs.d1 + pairs.d2:
        raise DimensionError(f"d={d} exceeds d1 + d2 = {pairs.d1 + pairs.d2}")
    Z = np.hstack([pairs.ds_vectors, pairs.gen_vectors])
    Z = Z - Z.mean(axis=0)
    U, s, _ = np.linalg.svd(Z, full_matrices=False)
    if d > U.shape[1]:
        raise DimensionError(f"d={d} exceeds the {U.shape[1]} available singular vectors")
    U = U[:, :d] * fix_signs(U[:, :d])
    return EmbeddingTable(pairs.vocab, U * s[:d])


def project_pairs(pairs: AlignedPairSet, method: str, d: int, ridge=1e-3,
                  cfg_ds=None, cfg_g=None, sample_cap=1000, seed=0):
    """Canonical projections of both views over the shared vocabulary.

    Returns ``(proj_ds, proj_g, model)``.
    """
    if method == "cca":
        model = cca_fit(pairs.ds_vectors, pairs.gen_vectors, d, ridge)
        return (cca_project(model, pairs.ds_vectors, "ds"),
                cca_project(model, pairs.gen_vectors, "gen"), model)
    if method == "kcca":
        model = kcca_fit(pairs.ds_vectors, pairs.gen_vectors, d, cfg_ds, cfg_g, sample_cap, seed)
        return kcca_project(model, "ds"), kcca_project(model, "gen"), model
    raise ConfigError(f"method {method!r} has no canonical projections")


def build_da_table(pairs: AlignedPairSet, method: str, d: int, ridge=1e-3,
                   cfg_ds=None, cfg_g=None, sample_cap=1000, seed=0):
    """Domain-adapted table over ``pairs.vocab`` for one hyperparameter setting."""
    if method == "concsvd":
        return concsvd(pairs, d), None
    proj_ds, proj_g, model = project_pairs(pairs, method, d, ridge, cfg_ds, cfg_g, sample_cap, seed)
    weights = solve_combination_weights(proj_ds, proj_g)
    return EmbeddingTable(pairs.vocab, combine(proj_ds, proj_g, weights)), model


@dataclass(frozen=True)
class AdaptConfig:
    """Hyperparameter grid and evaluation settings for :func:`adapt`."""

    method: str = "cca"
    d_grid: tuple | None = None
    sigma_rules: tuple = SIGMA_RULE_ORDER
    ridge: float = 1e-3
    kappa: float = 0.1
    shared_sigma: bool = False
    sample_cap: int = 1000
    cv_folds: int = 10
    seed: int = 0
    select_metric: str = "f_score"
    eval_options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.d_grid is not None:
            if len(self.d_grid) == 0:
                raise ConfigError("d_grid is empty")
            for d in self.d_grid:
                try:
                    check_positive_int(d, "d")
                except ValueError as exc:
                    raise ConfigError(str(exc)) from None
            object.__setattr__(self, "d_grid", tuple(int(d) for d in self.d_grid))
        rules = tuple(self.sigma_rules)
        if not rules or any(r not in SIGMA_RULE_ORDER for r in rules):
            raise ConfigError(f"sigma_rules must be a non-empty subset of {SIGMA_RULE_ORDER}")
        object.__setattr__(self, "sigma_rules", rules)
        if int(self.cv_folds) < 2:
            raise ConfigError("cv_folds must be at least 2")
        if self.select_metric not in METRIC_NAMES:
            raise ConfigError(f"select_metric must be one of {METRIC_NAMES}")

    def resolve_grid(self, d1, d2):
        bound = min(d1, d2)
        if self.d_grid is None:
            return tuple(sorted({d for d in DEFAULT_D_GRID if d <= bound} | {bound}))
        limit = d1 + d2 if self.method == "concsvd" else bound
        bad = [d for d in self.d_grid if d > limit]
        if bad:
            raise ConfigError(f"d values {bad} exceed the bound {limit} for method {self.method}")
        return self.d_grid


@dataclass(frozen=True)
class Candidate:
    method: str
    d: int
    sigma_rule: str = ""
    sigma_ds: float = float("nan")
    sigma_g: float = float("nan")
    fold_scores: tuple = ()
    mean: float = float("nan")
    std: float = float("nan")
    error: str = ""

    @property
    def ok(self):
        return not self.error


@dataclass(frozen=True)
class SelectionReport:
    candidates: tuple
    selected: int
    metric: str
    seed: int

    @property
    def best(self) -> Candidate:
        return self.candidates[self.selected]

    def to_tsv(self, header_lines=()) -> str:
        lines = [f"# {h}" for h in header_lines]
        lines.append(f"# metric={self.metric} seed={self.seed}")
        lines.append("method\td\tsigma_rule\tsigma_ds\tsigma_g\tfold_scores\tmean\tstd\tselected\tstatus")
        for i, c in enumerate(self.candidates):
            folds = ",".join(repr(float(v)) for v in c.fold_scores)
            status = "ok" if c.ok else "failed: " + c.error.replace("\t", " ").replace("\n", " ")
            lines.append("\t".join([
                c.method, str(c.d), c.sigma_rule or "-", repr(c.sigma_ds), repr(c.sigma_g),
                folds or "-", repr(c.mean), repr(c.std), "*" if i == self.selected else "",
                status,
            ]))
        return "\n".join(lines) + "\n"


def _candidates(cfg: AdaptConfig, d_grid):
    if cfg.method == "kcca":
        return [(d, rule) for d in d_grid for rule in cfg.sigma_rules]
    return [(d, "") for d in d_grid]


def adapt(ds: EmbeddingTable, gen: EmbeddingTable, cfg: AdaptConfig = AdaptConfig(),
          dataset: LabeledDataset | None = None, pairs: AlignedPairSet | None = None):
    """Fit every grid candidate, score it by cross-validation and keep the best.

    Returns ``(table, report)``. Candidates are compared on the mean of
    ``cfg.select_metric`` over folds; ties go to the smaller ``d``, then to
    the median bandwidth rule. A candidate whose fit fails is recorded in the
    report and skipped.
    """
    if pairs is None:
        pairs = intersect(ds, gen)
    d_grid = cfg.resolve_grid(pairs.d1, pairs.d2)
    cands = _candidates(cfg, d_grid)
    if dataset is None and len(cands) > 1:
        raise ConfigError("a labeled dataset is required to choose among several candidates")

    medians = None
    if cfg.method == "kcca":
        if cfg.shared_sigma:
            mu = shared_median_bandwidth([pairs.ds_vectors, pairs.gen_vectors],
                                         cfg.sample_cap, cfg.seed)
            medians = (mu, mu)
        else:
            medians = (median_bandwidth(pairs.ds_vectors, cfg.sample_cap, cfg.seed),
                       median_bandwidth(pairs.gen_vectors, cfg.sample_cap, cfg.seed))

    eval_opts = dict(cfg.eval_options)
    fold_ids = None
    if dataset is not None:
        fold_ids = stratified_folds(dataset.labels, cfg.cv_folds, cfg.seed)

    results, tables = [], []
    for d, rule in cands:
        label = f"{cfg.method} d={d}" + (f" sigma={rule}" if rule else "")
        cfg_ds = cfg_g = None
        if rule:
            factor = 2.0 if rule == "twice-median" else 1.0
            cfg_ds = KernelConfig(rule, factor * medians[0], cfg.kappa)
            cfg_g = KernelConfig(rule, factor * medians[1], cfg.kappa)
        try:
            table, _ = build_da_table(pairs, cfg.method, d, cfg.ridge, cfg_ds, cfg_g,
                                      cfg.sample_cap, cfg.seed)
        except (DaembedError, np.linalg.LinAlgError) as exc:
            logger.warning("%s failed: %s", label, exc)
            results.append(Candidate(cfg.method, d, rule, error=f"{type(exc).__name__}: {exc}"))
            tables.append(None)
            continue
        sig = (cfg_ds.sigma, cfg_g.sigma) if rule else (float("nan"), float("nan"))
        if dataset is None:
            results.append(Candidate(cfg.method, d, rule, *sig))
        else:
            rep = cross_validate(dataset, table, cfg.cv_folds, cfg.seed, fold_ids=fold_ids,
                                 name=label, **eval_opts)
            j = METRIC_NAMES.index(cfg.select_metric)
            results.append(Candidate(
                cfg.method, d, rule, *sig, tuple(float(v) for v in rep.fold_metrics[:, j]),
                rep.mean[cfg.select_metric], rep.std[cfg.select_metric],
            ))
            logger.info("%s: mean %s %.4f", label, cfg.select_metric, rep.mean[cfg.select_metric])
        tables.append(table)

    ok = [i for i, c in enumerate(results) if c.ok]
    if not ok:
        msgs = "; ".join(f"d={c.d} {c.sigma_rule}: {c.error}" for c in results)
        raise NumericalError(f"every {cfg.method} candidate failed: {msgs}")

    def key(i):
        c = results[i]
        score = c.mean if np.isfinite(c.mean) else -np.inf
        rule_rank = SIGMA_RULE_ORDER.index(c.sigma_rule) if c.sigma_rule else 0
        return (-score, c.d, rule_rank)

    best = min(ok, key=key)
    report = SelectionReport(tuple(results), best, cfg.select_metric, cfg.seed)
    return tables[best], report


class DomainAdapter(TransformerMixin, BaseEstimator):
    """Fuse paired domain-specific and generic vectors into one space.

    ``fit(X, Y)`` takes row-aligned domain-specific vectors ``X`` and
    generic vectors ``Y`` for the same words; ``fit_transform`` returns the
    adapted vectors for those rows. Only the linear methods support
    ``transform`` on new rows.

    Parameters
    ----------
    method : {"cca", "kcca", "concsvd"}, default="cca"
    n_components : int, default=2
    ridge : float, default=1e-3
        Used by ``method="cca"``.
    kappa : float, default=0.1
        Used by ``method="kcca"``.
    sigma : {"median", "twice-median"} or float, default="median"
        Used by ``method="kcca"``.
    random_state : int, default=0
    """

    def __init__(self, method="cca", n_components=2, ridge=1e-3, kappa=0.1,
                 sigma="median", random_state=0):
        self.method = method
        self.n_components = n_components
        self.ridge = ridge
        self.kappa = kappa
        self.sigma = sigma
        self.random_state = random_state

    def _pairs(self, X, Y):
        X = np.asarray(X, dtype=np.float64)
        Y = np.asarray(Y, dtype=np.float64)
        if X.shape[0] != Y.shape[0]:
            raise DimensionError("X and Y must have the same number of rows")
        vocab = Vocabulary(f"w{i}" for i in range(X.shape[0]))
        return AlignedPairSet(vocab, X, Y)

    def fit(self, X, Y):
        self.fit_transform(X, Y)
        return self

    def fit_transform(self, X, Y=None, **fit_params):
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}")
        pairs = self._pairs(X, Y)
        cfg = None
        if self.method == "kcca":
            cfg = (KernelConfig(self.sigma, None, self.kappa) if isinstance(self.sigma, str)
                   else KernelConfig("explicit", float(self.sigma), self.kappa))
        table, model = build_da_table(pairs, self.method, self.n_components, self.ridge,
                                      cfg, cfg, seed=self.random_state)
        self.model_ = model
        self.embedding_ = table.vectors
        return np.array(table.vectors)

    def transform(self, X, Y=None):
        check_is_fitted(self, "embedding_")
        if self.method != "cca":
            raise NotImplementedError(f"{self.method} embeddings exist only for training rows")
        return combine(cca_project(self.model_, X, "ds"), cca_project(self.model_, Y, "gen"))
