"""Sentence classification benchmark: averaged word vectors, L2 logistic
regression, stratified k-fold cross-validation and precision/F1/AUC."""

from __future__ import annotations

import logging
import warnings
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import expit
from scipy.stats import rankdata
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import as_matrix
from .embeddings import EmbeddingTable
from .exceptions import AlignmentError, ParseError
from .lsa import split_tokens

logger = logging.getLogger(__name__)

METRIC_NAMES = ("precision", "f_score", "auc")


@dataclass(frozen=True)
class LabeledDataset:
    documents: tuple
    labels: np.ndarray
    name: str = "dataset"

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if len(self.documents) != labels.shape[0]:
            raise ValueError(
                f"{len(self.documents)} documents but {labels.shape[0]} labels"
            )
        if not np.isin(labels, (0, 1)).all():
            raise ValueError("labels must be 0 or 1")
        if np.unique(labels).size < 2:
            raise ValueError("both classes must be present")
        labels.setflags(write=False)
        object.__setattr__(self, "documents", tuple(tuple(d) for d in self.documents))
        object.__setattr__(self, "labels", labels)

    def __len__(self):
        return len(self.documents)

    @classmethod
    def from_texts(cls, texts, labels, name="dataset"):
        return cls(tuple(tuple(split_tokens(t)) for t in texts), labels, name)


def load_dataset(path, name=None) -> LabeledDataset:
    """Read ``text<TAB>label`` lines with labels in {0, 1}."""
    texts, labels = [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            text, sep, label = line.rpartition("\t")
            if not sep:
                raise ParseError("expected 'text<TAB>label'", path, lineno)
            label = label.strip()
            if label not in ("0", "1"):
                raise ParseError(f"label must be 0 or 1, got {label!r}", path, lineno)
            texts.append(text)
            labels.append(int(label))
    if not texts:
        raise ParseError("dataset file is empty", path)
    if len(set(labels)) < 2:
        raise ParseError("dataset must contain both classes", path)
    if name is None:
        name = Path(path).stem
    return LabeledDataset.from_texts(texts, labels, name)


def document_idf(documents):
    """``ln(n_docs / df)`` for every token that occurs in ``documents``."""
    df = Counter()
    for doc in documents:
        df.update(set(doc))
    n = len(documents)
    return {tok: float(np.log(n / c)) for tok, c in df.items()}


def encode_documents(documents, table: EmbeddingTable, weighting="uniform",
                     oov_policy="skip", idf=None, return_empty=False):
    """Weighted mean of the word vectors of each document.

    With ``weighting="uniform"`` every token occurrence has weight 1; with
    ``"tf-idf"`` an occurrence of ``t`` has weight ``idf(t)``. Weights are
    renormalized over the tokens that take part in the average: in-vocabulary
    tokens under ``oov_policy="skip"``, all tokens (OOV ones contributing a
    zero vector) under ``"zero"``. Documents with nothing to average get the
    zero vector and are reported in the ``empty`` mask.
    """
    if isinstance(documents, LabeledDataset):
        documents = documents.documents
    if weighting not in ("uniform", "tf-idf"):
        raise ValueError(f"weighting must be 'uniform' or 'tf-idf', got {weighting!r}")
    if oov_policy not in ("skip", "zero"):
        raise ValueError(f"oov_policy must be 'skip' or 'zero', got {oov_policy!r}")
    if weighting == "tf-idf" and idf is None:
        idf = document_idf(documents)
    index = table.vocab.index
    out = np.zeros((len(documents), table.dim))
    empty = np.zeros(len(documents), dtype=bool)
    for i, doc in enumerate(documents):
        rows, weights = [], []
        total = 0.0
        for tok, count in sorted(Counter(doc).items()):
            w = count * (1.0 if weighting == "uniform" else idf.get(tok, 0.0))
            if tok in index:
                rows.append(index[tok])
                weights.append(w)
                total += w
            elif oov_policy == "zero":
                total += w
        if not rows or total <= 0.0:
            empty[i] = True
            continue
        out[i] = np.asarray(weights) @ table.vectors[rows] / total
    if len(documents) and empty.all():
        raise AlignmentError("no document contains an in-vocabulary token")
    if empty.any():
        logger.debug("%d documents encoded as zero vectors", int(empty.sum()))
    return (out, empty) if return_empty else out


class DocumentEncoder(TransformerMixin, BaseEstimator):
    """Encode token lists as weighted averages of rows of ``table``.

    ``fit`` only learns document frequencies (used by ``weighting="tf-idf"``).
    """

    def __init__(self, table=None, weighting="uniform", oov_policy="skip"):
        self.table = table
        self.weighting = weighting
        self.oov_policy = oov_policy

    def fit(self, documents, y=None):
        if self.table is None:
            raise ValueError("DocumentEncoder requires an embedding table")
        self.idf_ = document_idf(documents) if self.weighting == "tf-idf" else None
        return self

    def transform(self, documents):
        check_is_fitted(self, "idf_")
        X, self.empty_ = encode_documents(
            documents, self.table, self.weighting, self.oov_policy, self.idf_,
            return_empty=True,
        )
        return X


# ---------------------------------------------------------------------------
# logistic regression


@dataclass(frozen=True)
class ClassifierModel:
    weights: np.ndarray
    bias: float
    l2_lambda: float
    converged: bool = True
    n_iter: int = 0
    grad_norm: float = 0.0
    losses: tuple = ()

    def decision_function(self, X):
        return np.asarray(X, dtype=np.float64) @ self.weights + self.bias

    def predict_proba(self, X):
        return expit(self.decision_function(X))


def logistic_objective(theta, X, y, l2_lambda):
    """Mean logistic loss plus ``l2_lambda/2 * ||w||^2`` and its gradient.

    ``theta`` holds the weights followed by the (unpenalized) bias.
    """
    w, b = theta[:-1], theta[-1]
    z = X @ w + b
    loss = np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2_lambda * (w @ w)
    r = (expit(z) - y) / X.shape[0]
    grad = np.empty_like(theta)
    grad[:-1] = X.T @ r + l2_lambda * w
    grad[-1] = r.sum()
    return loss, grad


def train_logreg(X, y, l2_lambda=1.0, tol=1e-6, max_iter=500) -> ClassifierModel:
    """Newton's method with backtracking from the zero vector."""
    X = as_matrix(X, "features")
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if y.shape[0] != X.shape[0]:
        raise ValueError("features and labels differ in length")
    if not np.isin(y, (0.0, 1.0)).all():
        raise ValueError("labels must be 0 or 1")
    if np.unique(y).size < 2:
        raise ValueError("training labels contain a single class")
    if l2_lambda < 0:
        raise ValueError("l2_lambda must be non-negative")
    n, p = X.shape
    Xb = np.hstack([X, np.ones((n, 1))])
    reg = np.full(p + 1, float(l2_lambda))
    reg[-1] = 0.0
    theta = np.zeros(p + 1)
    loss, grad = logistic_objective(theta, X, y, l2_lambda)
    gnorm = float(np.max(np.abs(grad)))
    losses = [float(loss)]
    it = 0
    while gnorm >= tol and it < max_iter:
        it += 1
        z = Xb @ theta
        s = expit(z) * expit(-z)
        H = (Xb.T * s) @ Xb / n + np.diag(reg)
        H[np.diag_indices_from(H)] += 1e-12
        try:
            step = np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(H, grad, rcond=None)[0]
        slope = float(grad @ step)
        t = 1.0
        while True:
            cand = theta - t * step
            new_loss, new_grad = logistic_objective(cand, X, y, l2_lambda)
            if new_loss <= loss - 1e-4 * t * slope or t < 1e-10:
                break
            t *= 0.5
        if new_loss > loss:
            break
        theta, loss, grad = cand, new_loss, new_grad
        losses.append(float(loss))
        gnorm = float(np.max(np.abs(grad)))
    converged = gnorm < tol
    if not converged:
        warnings.warn(
            f"logistic regression stopped after {it} iterations with gradient norm {gnorm:.3g}",
            RuntimeWarning, stacklevel=2,
        )
    return ClassifierModel(theta[:-1].copy(), float(theta[-1]), float(l2_lambda),
                           converged, it, gnorm, tuple(losses))


class L2LogisticRegression(ClassifierMixin, BaseEstimator):
    """Binary logistic regression with an L2 penalty on the weights.

    Parameters
    ----------
    l2_lambda : float, default=1.0
        Penalty strength; the objective is the mean log loss plus
        ``l2_lambda / 2 * ||w||^2``.
    tol : float, default=1e-6
        Stop when the gradient's max-norm falls below this.
    max_iter : int, default=500
    """

    def __init__(self, l2_lambda=1.0, tol=1e-6, max_iter=500):
        self.l2_lambda = l2_lambda
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X, y):
        self.model_ = train_logreg(X, y, self.l2_lambda, self.tol, self.max_iter)
        self.coef_ = self.model_.weights[None, :]
        self.intercept_ = np.array([self.model_.bias])
        self.classes_ = np.array([0, 1])
        self.n_iter_ = self.model_.n_iter
        return self

    def decision_function(self, X):
        check_is_fitted(self, "model_")
        return self.model_.decision_function(as_matrix(X))

    def predict_proba(self, X):
        p = expit(self.decision_function(X))
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        return (self.predict_proba(X)[:, 1] >= 0.5).astype(np.int64)


# ---------------------------------------------------------------------------
# metrics


@dataclass(frozen=True)
class Metrics:
    precision: float
    f_score: float
    auc: float

    def as_tuple(self):
        return (self.precision, self.f_score, self.auc)


def roc_auc(scores, labels) -> float:
    """Mann-Whitney AUC; tied positive/negative pairs count one half."""
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    labels = np.asarray(labels).reshape(-1)
    pos = labels == 1
    n_pos, n_neg = int(pos.sum()), int((~pos).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC is undefined when only one class is present")
    ranks = rankdata(scores)
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def metrics(scores, labels, threshold=0.5) -> Metrics:
    """Positive-class precision and F1 at ``threshold`` plus ROC AUC.

    Precision is 0 when nothing is predicted positive.
    """
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    labels = np.asarray(labels).reshape(-1)
    if scores.shape != labels.shape:
        raise ValueError("scores and labels differ in length")
    auc = roc_auc(scores, labels)
    pred = scores >= threshold
    tp = int(np.sum(pred & (labels == 1)))
    fp = int(np.sum(pred & (labels != 1)))
    fn = int(np.sum(~pred & (labels == 1)))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return Metrics(float(precision), float(f1), auc)


# ---------------------------------------------------------------------------
# cross-validation


def stratified_folds(labels, n_folds, seed=0) -> np.ndarray:
    """Fold id per example; each class is shuffled with ``seed`` and dealt round-robin.

    Classes are dealt one after the other with a shared counter, so fold
    sizes and per-class fold counts each differ by at most one.
    """
    labels = np.asarray(labels).reshape(-1)
    n = labels.shape[0]
    if isinstance(n_folds, bool) or int(n_folds) != n_folds or n_folds < 2:
        raise ValueError(f"n_folds must be an integer >= 2, got {n_folds!r}")
    n_folds = int(n_folds)
    if n_folds > n:
        raise ValueError(f"cannot split {n} examples into {n_folds} folds")
    classes, counts = np.unique(labels, return_counts=True)
    if counts.min() < n_folds:
        warnings.warn(
            f"smallest class has {counts.min()} examples, fewer than {n_folds} folds; "
            "some folds will lack that class",
            UserWarning, stacklevel=2,
        )
    rng = np.random.default_rng(seed)
    folds = np.empty(n, dtype=np.int64)
    pos = 0
    for c in classes:
        members = np.flatnonzero(labels == c)
        members = members[rng.permutation(members.size)]
        folds[members] = (pos + np.arange(members.size)) % n_folds
        pos += members.size
    return folds


@dataclass(frozen=True, eq=False)
class EvalReport:
    """Per-fold and aggregated metrics of one cross-validation run.

    ``fold_metrics`` has one row per fold and columns precision, f_score,
    auc. A fold without both classes has NaN entries; aggregates skip them
    and fall back to the pooled out-of-fold metrics when no fold is defined.
    """

    name: str
    fold_metrics: np.ndarray
    folds: np.ndarray
    oof_scores: np.ndarray
    labels: np.ndarray
    seed: int
    pooled: Metrics
    n_empty_documents: int = 0
    converged: bool = True
    mean: dict = field(init=False)
    std: dict = field(init=False)

    def __post_init__(self):
        mean, std = {}, {}
        for j, m in enumerate(METRIC_NAMES):
            col = self.fold_metrics[:, j]
            col = col[~np.isnan(col)]
            if col.size == 0:
                mean[m] = getattr(self.pooled, m)
                std[m] = float("nan")
            else:
                mean[m] = float(np.mean(col))
                std[m] = float(np.std(col, ddof=1)) if col.size > 1 else 0.0
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)

    @property
    def n_folds(self):
        return self.fold_metrics.shape[0]

    def to_tsv(self) -> str:
        lines = ["fold\tprecision\tf_score\tauc"]
        for k, row in enumerate(self.fold_metrics):
            lines.append(f"{k}\t" + "\t".join(repr(float(v)) for v in row))
        for label, agg in (("mean", self.mean), ("std", self.std)):
            lines.append(label + "\t" + "\t".join(repr(agg[m]) for m in METRIC_NAMES))
        return "\n".join(lines) + "\n"

    def summary(self) -> str:
        """Percent-scaled ``mean +/- std`` triple, one metric per line."""
        out = [f"{self.name}"]
        for m, title in zip(METRIC_NAMES, ("Avg Precision", "Avg F-score", "Avg AUC")):
            out.append(f"  {title:<14} {100 * self.mean[m]:6.2f} ± {100 * self.std[m]:.1f}")
        return "\n".join(out)


def cross_validate_features(X, labels, n_folds=10, seed=0, l2_lambda=1.0, tol=1e-6,
                            max_iter=500, threshold=0.5, standardize=True,
                            folds=None, name="features") -> EvalReport:
    """Stratified k-fold evaluation of L2 logistic regression on fixed features."""
    X = as_matrix(X, "features")
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if folds is None:
        folds = stratified_folds(labels, n_folds, seed)
    folds = np.asarray(folds, dtype=np.int64)
    k = int(folds.max()) + 1
    oof = np.empty(labels.shape[0])
    fold_metrics = np.full((k, 3), np.nan)
    converged = True
    for f in range(k):
        test = folds == f
        train = ~test
        Xtr, Xte = X[train], X[test]
        if standardize:
            mu = Xtr.mean(axis=0)
            sd = Xtr.std(axis=0)
            sd[sd <= 1e-12 * max(1.0, float(np.max(sd, initial=0.0)))] = 1.0
            Xtr = (Xtr - mu) / sd
            Xte = (Xte - mu) / sd
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", RuntimeWarning)
            model = train_logreg(Xtr, labels[train], l2_lambda, tol, max_iter)
        converged &= model.converged
        for w in caught:
            logger.warning("fold %d: %s", f, w.message)
        oof[test] = model.predict_proba(Xte)
        yte = labels[test]
        if np.unique(yte).size == 2:
            fold_metrics[f] = metrics(oof[test], yte, threshold).as_tuple()
    pooled = metrics(oof, labels, threshold)
    return EvalReport(name, fold_metrics, folds, oof, labels, int(seed), pooled,
                      converged=bool(converged))


def cross_validate(dataset: LabeledDataset, table: EmbeddingTable, folds=10, seed=0,
                   weighting="uniform", oov_policy="skip", l2_lambda=1.0, tol=1e-6,
                   max_iter=500, threshold=0.5, standardize=True, fold_ids=None,
                   name=None) -> EvalReport:
    """Encode ``dataset`` with ``table`` and cross-validate a logistic classifier.

    Folds come from :func:`stratified_folds` with ``seed`` unless
    ``fold_ids`` is given, so several tables can share one split.
    """
    X, empty = encode_documents(dataset.documents, table, weighting, oov_policy,
                                return_empty=True)
    report = cross_validate_features(
        X, dataset.labels, folds, seed, l2_lambda, tol, max_iter, threshold,
        standardize, fold_ids, name or dataset.name,
    )
    object.__setattr__(report, "n_empty_documents", int(empty.sum()))
    return report
