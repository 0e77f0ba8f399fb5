"""Domain-specific word vectors by latent semantic analysis."""

from __future__ import annotations

import logging
import re
import unicodedata
import warnings
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_positive_int, fix_signs
from .embeddings import EmbeddingTable, Vocabulary
from .exceptions import ParseError

logger = logging.getLogger(__name__)

WEIGHTINGS = ("raw-count", "tf-idf")

_TOKEN_RE = re.compile(r"[^\W_]+")


@dataclass(frozen=True)
class Corpus:
    documents: tuple
    vocab: Vocabulary
    # positions of input lines that produced no tokens
    dropped: tuple = ()

    def __len__(self):
        return len(self.documents)


@dataclass(frozen=True)
class TermDocMatrix:
    matrix: sp.csr_matrix
    vocab: Vocabulary
    weighting: str = "tf-idf"
    n_documents: int = field(default=0)

    @property
    def shape(self):
        return self.matrix.shape


def split_tokens(text: str) -> list[str]:
    """Lowercase ``text`` (NFC-normalized) and split it on non-alphanumeric boundaries."""
    return _TOKEN_RE.findall(unicodedata.normalize("NFC", text.lower()))


def tokenize(raw_lines) -> Corpus:
    """Tokenize one document per line; documents with no tokens are dropped."""
    documents = []
    dropped = []
    for i, line in enumerate(raw_lines):
        toks = split_tokens(line)
        if toks:
            documents.append(tuple(toks))
        else:
            dropped.append(i)
    if not documents:
        raise ParseError("no document contains any token after filtering")
    vocab = Vocabulary(sorted({t for doc in documents for t in doc}))
    return Corpus(tuple(documents), vocab, tuple(dropped))


def _strip_label(line):
    text, tab, label = line.rpartition("\t")
    if tab and label.strip().lstrip("+-").isdigit():
        return text
    return line


def read_corpus(path) -> Corpus:
    """Read a corpus file (one document per line, optional ``<TAB>label`` suffix)."""
    with open(path, encoding="utf-8") as fh:
        lines = [_strip_label(line.rstrip("\r\n")) for line in fh]
    lines = [line for line in lines if line.strip()]
    if not lines:
        raise ParseError("corpus file is empty", path)
    return tokenize(lines)


def build_term_doc(corpus: Corpus, weighting: str = "tf-idf") -> TermDocMatrix:
    """Term-by-document matrix with rows in vocabulary order.

    ``tf-idf`` entries are ``count(t, d) * ln(n_docs / df(t))``.
    """
    if weighting not in WEIGHTINGS:
        raise ValueError(f"weighting must be one of {WEIGHTINGS}, got {weighting!r}")
    index = corpus.vocab.index
    rows, cols, vals = [], [], []
    for j, doc in enumerate(corpus.documents):
        for tok, count in sorted(Counter(doc).items()):
            rows.append(index[tok])
            cols.append(j)
            vals.append(float(count))
    n_docs = len(corpus.documents)
    mat = sp.csr_matrix(
        (np.asarray(vals), (np.asarray(rows), np.asarray(cols))),
        shape=(len(corpus.vocab), n_docs),
    )
    if weighting == "tf-idf":
        df = np.diff(mat.indptr)
        idf = np.log(n_docs / df)
        mat = sp.csr_matrix(sp.diags(idf) @ mat)
    return TermDocMatrix(mat, corpus.vocab, weighting, n_docs)


@dataclass(frozen=True)
class TruncatedFactors:
    u: np.ndarray
    s: np.ndarray
    vt: np.ndarray


def truncated_svd(A, k):
    """Rank-``k`` SVD through an eigendecomposition of the smaller Gram matrix.

    Singular vectors have their largest-magnitude left entry made positive.
    ``k`` is reduced to the numerical rank if it exceeds it.
    """
    A = A.toarray() if sp.issparse(A) else np.asarray(A, dtype=np.float64)
    m, n = A.shape
    wide = n > m
    G = A @ A.T if wide else A.T @ A
    evals, evecs = np.linalg.eigh(G)
    evals, evecs = evals[::-1], evecs[:, ::-1]
    top = max(evals[0], 0.0) if evals.size else 0.0
    tol = max(m, n) * np.finfo(np.float64).eps * top
    rank = int(np.sum(evals > tol))
    if k > rank:
        warnings.warn(
            f"requested {k} components but the matrix has numerical rank {rank}",
            RuntimeWarning, stacklevel=2,
        )
        k = rank
    s = np.sqrt(evals[:k])
    if wide:
        u = evecs[:, :k]
        vt = (A.T @ u / s).T
    else:
        v = evecs[:, :k]
        u = A @ v / s
        vt = v.T
    signs = fix_signs(u)
    return TruncatedFactors(u * signs, s, vt * signs[:, None])


def lsa_train(tdm: TermDocMatrix, k: int = 70, scaling_power: float = 1.0) -> EmbeddingTable:
    """Word vectors ``U_k S_k**scaling_power`` from the weighted term-document matrix."""
    k = check_positive_int(k, "k")
    if not 0.0 <= scaling_power <= 1.0:
        raise ValueError("scaling_power must lie in [0, 1]")
    f = truncated_svd(tdm.matrix, k)
    if f.s.size == 0:
        raise ValueError("term-document matrix has rank 0 under this weighting")
    vectors = f.u * f.s ** scaling_power
    return EmbeddingTable(tdm.vocab, vectors)


class LSAEmbedder(TransformerMixin, BaseEstimator):
    """Fit LSA word vectors on raw text lines.

    Parameters
    ----------
    n_components : int, default=70
    weighting : {"tf-idf", "raw-count"}, default="tf-idf"
    scaling_power : float, default=1.0
        Exponent applied to the singular values when forming word vectors.

    Attributes
    ----------
    table_ : EmbeddingTable
    singular_values_ : ndarray
    corpus_ : Corpus
    """

    def __init__(self, n_components=70, weighting="tf-idf", scaling_power=1.0):
        self.n_components = n_components
        self.weighting = weighting
        self.scaling_power = scaling_power

    def fit(self, raw_documents, y=None):
        corpus = raw_documents if isinstance(raw_documents, Corpus) else tokenize(raw_documents)
        tdm = build_term_doc(corpus, self.weighting)
        k = check_positive_int(self.n_components, "n_components")
        f = truncated_svd(tdm.matrix, k)
        if f.s.size == 0:
            raise ValueError("term-document matrix has rank 0 under this weighting")
        self.corpus_ = corpus
        self.singular_values_ = f.s
        self.table_ = EmbeddingTable(tdm.vocab, f.u * f.s ** self.scaling_power)
        return self

    def transform(self, tokens):
        """Look up word vectors; unknown tokens map to zero rows."""
        check_is_fitted(self, "table_")
        out = np.zeros((len(tokens), self.table_.dim))
        for i, tok in enumerate(tokens):
            if tok in self.table_:
                out[i] = self.table_[tok]
        return out
