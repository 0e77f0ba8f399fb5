"""Word embedding tables: text I/O, vocabulary handling and vocabulary alignment."""

from __future__ import annotations

import logging
import os
import unicodedata
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .exceptions import AlignmentError, ParseError

logger = logging.getLogger(__name__)


class Vocabulary(Sequence):
    """Ordered collection of unique tokens with O(1) reverse lookup."""

    def __init__(self, tokens: Iterable[str]):
        tokens = tuple(tokens)
        index = {}
        for i, tok in enumerate(tokens):
            if not isinstance(tok, str) or not tok or any(c.isspace() for c in tok):
                raise ValueError(f"invalid token {tok!r} at position {i}")
            if tok in index:
                raise ValueError(f"duplicate token {tok!r}")
            index[tok] = i
        self._tokens = tokens
        self._index = index

    @property
    def tokens(self) -> tuple[str, ...]:
        return self._tokens

    @property
    def index(self) -> Mapping[str, int]:
        return self._index

    def __getitem__(self, i):
        return self._tokens[i]

    def __len__(self):
        return len(self._tokens)

    def __contains__(self, token):
        return token in self._index

    def __iter__(self):
        return iter(self._tokens)

    def __eq__(self, other):
        if isinstance(other, Vocabulary):
            return self._tokens == other._tokens
        return NotImplemented

    def __hash__(self):
        return hash(self._tokens)

    def __repr__(self):
        return f"Vocabulary({len(self)} tokens)"

    def lookup(self, token: str) -> int:
        return self._index[token]


@dataclass(frozen=True, eq=False)
class EmbeddingTable:
    """A vocabulary with one dense row vector per token.

    The vector matrix is copied and marked read-only on construction.
    """

    vocab: Vocabulary
    vectors: np.ndarray
    duplicates: int = field(default=0, compare=False)

    def __post_init__(self):
        vocab = self.vocab if isinstance(self.vocab, Vocabulary) else Vocabulary(self.vocab)
        vectors = np.array(self.vectors, dtype=np.float64)
        if vectors.ndim != 2:
            raise ValueError(f"vectors must be 2-D, got shape {vectors.shape}")
        if vectors.shape[0] != len(vocab):
            raise ValueError(
                f"{vectors.shape[0]} vector rows for {len(vocab)} tokens"
            )
        if vectors.shape[1] < 1:
            raise ValueError("embedding dimension must be >= 1")
        if not np.all(np.isfinite(vectors)):
            raise ValueError("embedding vectors contain NaN or Inf")
        vectors.setflags(write=False)
        object.__setattr__(self, "vocab", vocab)
        object.__setattr__(self, "vectors", vectors)

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self):
        return len(self.vocab)

    def __contains__(self, token):
        return token in self.vocab

    def __getitem__(self, token: str) -> np.ndarray:
        return self.vectors[self.vocab.lookup(token)]

    def __eq__(self, other):
        if not isinstance(other, EmbeddingTable):
            return NotImplemented
        return self.vocab == other.vocab and np.array_equal(self.vectors, other.vectors)

    __hash__ = None

    def __repr__(self):
        return f"EmbeddingTable(n={len(self)}, dim={self.dim})"

    def rows(self, tokens: Iterable[str]) -> np.ndarray:
        idx = [self.vocab.lookup(t) for t in tokens]
        return self.vectors[idx]

    def subset(self, tokens: Iterable[str]) -> "EmbeddingTable":
        tokens = list(tokens)
        return EmbeddingTable(Vocabulary(tokens), self.rows(tokens))

    def lowercased(self) -> "EmbeddingTable":
        """Case-fold tokens; on collisions the first row in table order wins."""
        seen = {}
        for i, tok in enumerate(self.vocab):
            seen.setdefault(tok.lower(), i)
        return EmbeddingTable(Vocabulary(seen), self.vectors[list(seen.values())])


@dataclass(frozen=True, eq=False)
class AlignedPairSet:
    """Shared vocabulary of two tables with row-aligned vectors from each."""

    vocab: Vocabulary
    ds_vectors: np.ndarray
    gen_vectors: np.ndarray
    n_ds_only: int = 0
    n_gen_only: int = 0

    def __post_init__(self):
        ds = np.array(self.ds_vectors, dtype=np.float64)
        gen = np.array(self.gen_vectors, dtype=np.float64)
        n = len(self.vocab)
        if ds.ndim != 2 or gen.ndim != 2 or ds.shape[0] != n or gen.shape[0] != n:
            raise ValueError("aligned matrices must have one row per shared token")
        if n < 2:
            raise AlignmentError(
                f"at least two shared tokens are required, got {n}"
            )
        ds.setflags(write=False)
        gen.setflags(write=False)
        object.__setattr__(self, "ds_vectors", ds)
        object.__setattr__(self, "gen_vectors", gen)

    def __len__(self):
        return len(self.vocab)

    @property
    def d1(self) -> int:
        return self.ds_vectors.shape[1]

    @property
    def d2(self) -> int:
        return self.gen_vectors.shape[1]


def _parse_float(text, path, lineno):
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"non-numeric field {text!r}", path, lineno) from None
    if not np.isfinite(value):
        raise ParseError(f"non-finite value {text!r}", path, lineno)
    return value


def load_embeddings(path, expected_dim=None, keep=None) -> EmbeddingTable:
    """Read a GloVe-style text embedding file.

    Parameters
    ----------
    path : str or PathLike
        UTF-8 file with one ``token v1 ... vd`` record per line. Tokens are
        NFC-normalized; case is kept.
    expected_dim : int, optional
        If given, every record must have exactly this many values.
    keep : container of str, optional
        Only tokens in ``keep`` are retained. Records for other tokens are
        still validated for dimension consistency but not parsed as floats.

    Returns
    -------
    EmbeddingTable
        Repeated tokens keep their first occurrence; the number of dropped
        repeats is stored in ``duplicates``.
    """
    if expected_dim is not None and int(expected_dim) < 1:
        raise ValueError("expected_dim must be a positive integer")
    dim = expected_dim
    tokens = []
    rows = []
    seen = set()
    duplicates = 0
    n_records = 0
    header_like = False
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if n_records == 0:
                header_like = len(parts) == 2 and all(p.isdigit() for p in parts)
            n_records += 1
            token, values = unicodedata.normalize("NFC", parts[0]), parts[1:]
            if not values:
                raise ParseError(f"token {token!r} has no vector values", path, lineno)
            if dim is None:
                dim = len(values)
            elif len(values) != dim:
                if n_records == 2 and header_like:
                    raise ParseError(
                        "first line looks like a word2vec header; headers are not supported",
                        path, 1,
                    )
                raise ParseError(
                    f"expected {dim} values, found {len(values)}", path, lineno
                )
            if keep is not None and token not in keep:
                continue
            vec = [_parse_float(v, path, lineno) for v in values]
            if token in seen:
                duplicates += 1
                continue
            seen.add(token)
            tokens.append(token)
            rows.append(vec)
    if n_records == 0:
        raise ParseError("embedding file is empty", path)
    if not tokens:
        raise ParseError("no tokens retained from embedding file", path)
    if duplicates:
        logger.warning("%s: ignored %d repeated tokens (first occurrence kept)", path, duplicates)
    return EmbeddingTable(Vocabulary(tokens), np.asarray(rows, dtype=np.float64), duplicates)


def save_embeddings(table: EmbeddingTable, path) -> None:
    """Write ``table`` in the text format read by :func:`load_embeddings`.

    Values are written with 17 significant digits so a reload is bit-exact.
    """
    tmp = f"{os.fspath(path)}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        for token, row in zip(table.vocab, table.vectors):
            fh.write(token)
            for v in row.tolist():
                fh.write(" ")
                fh.write(format(v, ".17g"))
            fh.write("\n")
    os.replace(tmp, path)


def intersect(ds: EmbeddingTable, gen: EmbeddingTable) -> AlignedPairSet:
    """Align two tables on their shared tokens, in lexicographic token order."""
    shared = sorted(set(ds.vocab.tokens) & set(gen.vocab.tokens))
    if len(shared) < 2:
        raise AlignmentError(
            f"vocabulary intersection has {len(shared)} tokens; at least 2 are required"
        )
    pairs = AlignedPairSet(
        Vocabulary(shared),
        ds.rows(shared),
        gen.rows(shared),
        n_ds_only=len(ds) - len(shared),
        n_gen_only=len(gen) - len(shared),
    )
    logger.info(
        "aligned %d shared tokens (%d domain-only, %d generic-only)",
        len(shared), pairs.n_ds_only, pairs.n_gen_only,
    )
    return pairs
