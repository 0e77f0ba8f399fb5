"""Synthetic data for tests and demos.

``two_view_gaussian`` draws paired views with prescribed canonical
correlations. ``sentiment_world`` builds a toy labeled corpus together with
a "generic" embedding table whose sentiment signal is partly wrong for the
domain, mimicking a domain shift.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embeddings import EmbeddingTable, Vocabulary
from .evaluation import LabeledDataset


def two_view_gaussian(n, correlations, d1=None, d2=None, seed=0, mix=True):
    """Sample ``n`` pairs whose population canonical correlations are ``correlations``.

    Latent pairs ``(u_i, v_i)`` have unit variance and correlation
    ``correlations[i]``; when ``mix`` is set each view is then multiplied by
    a random invertible matrix and shifted, which leaves the canonical
    correlations unchanged.
    """
    rho = np.asarray(correlations, dtype=np.float64)
    k = rho.size
    d1 = k if d1 is None else d1
    d2 = k if d2 is None else d2
    rng = np.random.default_rng(seed)
    u = rng.standard_normal((n, k))
    v = rho * u + np.sqrt(1.0 - rho ** 2) * rng.standard_normal((n, k))
    X = np.hstack([u, rng.standard_normal((n, d1 - k))])
    Y = np.hstack([v, rng.standard_normal((n, d2 - k))])
    if mix:
        X = X @ rng.normal(size=(d1, d1)) + rng.normal(size=d1)
        Y = Y @ rng.normal(size=(d2, d2)) + rng.normal(size=d2)
    return X, Y


@dataclass(frozen=True)
class SentimentWorld:
    dataset: LabeledDataset
    generic: EmbeddingTable
    polarity: dict
    shifted: frozenset


def sentiment_world(n_docs=400, n_words=300, generic_dim=100, latent_dim=12,
                    doc_len=(6, 14), shift_fraction=0.3, seed=0, name="synthetic"):
    """Toy domain corpus plus a generic table that only partly knows the domain.

    Each word has a latent topic vector and a polarity in {-1, 0, +1}.
    Documents mix polar words agreeing with their label and neutral words of a
    shared topic. Generic vectors encode topic and polarity linearly, except
    that for a ``shift_fraction`` of the polar words the generic polarity is
    flipped (their meaning differs in this domain).
    """
    rng = np.random.default_rng(seed)
    words = [f"w{i:04d}" for i in range(n_words)]
    pol = rng.choice([-1, 0, 1], size=n_words, p=[0.25, 0.5, 0.25])
    topic = rng.normal(size=(n_words, latent_dim))
    polar_idx = np.flatnonzero(pol != 0)
    shifted = rng.choice(polar_idx, size=int(shift_fraction * polar_idx.size), replace=False)
    gen_pol = pol.astype(float).copy()
    gen_pol[shifted] *= -1.0
    basis = rng.normal(size=(latent_dim + 1, generic_dim))
    latent = np.hstack([topic, 2.0 * gen_pol[:, None]])
    generic = latent @ basis + 0.5 * rng.normal(size=(n_words, generic_dim))

    pos_words = np.flatnonzero(pol > 0)
    neg_words = np.flatnonzero(pol < 0)
    neutral = np.flatnonzero(pol == 0)
    labels = rng.permutation(np.arange(n_docs) % 2)
    docs = []
    for y in labels:
        length = int(rng.integers(doc_len[0], doc_len[1] + 1))
        n_polar = max(1, int(rng.binomial(length, 0.4)))
        pool = pos_words if y == 1 else neg_words
        polar = rng.choice(pool, size=n_polar)
        # occasional opposite-polarity noise word
        if rng.random() < 0.3:
            polar = np.append(polar, rng.choice(neg_words if y == 1 else pos_words))
        center = topic[rng.choice(neutral)]
        affinity = topic[neutral] @ center
        p = np.exp(affinity / 4.0 - np.max(affinity / 4.0))
        filler = rng.choice(neutral, size=length - n_polar, p=p / p.sum())
        doc = np.concatenate([polar, filler])
        docs.append(tuple(words[i] for i in rng.permutation(doc)))
    dataset = LabeledDataset(tuple(docs), labels, name)
    table = EmbeddingTable(Vocabulary(words), generic)
    return SentimentWorld(
        dataset, table, {w: int(p) for w, p in zip(words, pol)},
        frozenset(words[i] for i in shifted),
    )


def write_dataset(dataset: LabeledDataset, path):
    """Write ``text<TAB>label`` lines (tokens joined by spaces)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for doc, y in zip(dataset.documents, dataset.labels):
            fh.write(" ".join(doc) + f"\t{int(y)}\n")
