"""Vocabulary statistics, token values, information-gain selection, vectorization."""

from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp


class TokenValueType(str, Enum):
    BINARY = "binary"
    FREQUENCY = "frequency"
    NORMALIZED_TERM_FREQUENCY = "normalized_term_frequency"
    TFIDF = "tfidf"

    @classmethod
    def parse(cls, value) -> "TokenValueType":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_").replace(" ", "_")
        key = _VALUE_TYPE_ALIASES.get(key, key)
        try:
            return cls(key)
        except ValueError:
            choices = ", ".join(v.value for v in cls)
            raise ValueError(f"unknown token value type {value!r} (expected one of {choices})") from None

    def __str__(self):
        return self.value


_VALUE_TYPE_ALIASES = {
    "tf": "frequency",
    "term_frequency": "frequency",
    "ntf": "normalized_term_frequency",
    "normalized": "normalized_term_frequency",
    "tf_idf": "tfidf",
}


@dataclass(frozen=True, eq=False)
class Vocabulary:
    """Training-set gram statistics.

    ``tokens`` is sorted lexicographically and a token's position is its index.
    Count arrays are aligned with ``tokens``.
    """

    tokens: tuple[str, ...]
    doc_freq: np.ndarray
    pos_doc_counts: np.ndarray
    neg_doc_counts: np.ndarray
    n_docs: int
    n_pos: int
    n_neg: int
    index: dict = field(repr=False, default=None)

    def __post_init__(self):
        if self.index is None:
            object.__setattr__(self, "index", {t: i for i, t in enumerate(self.tokens)})

    def __len__(self):
        return len(self.tokens)

    def __contains__(self, token):
        return token in self.index

    def document_frequency(self, token: str) -> int:
        return int(self.doc_freq[self.index[token]])

    def class_doc_counts(self, token: str) -> tuple[int, int]:
        i = self.index[token]
        return int(self.pos_doc_counts[i]), int(self.neg_doc_counts[i])


@dataclass(frozen=True, eq=False)
class ReducedVocabulary:
    """The top-K tokens, densely re-indexed in rank order (best first)."""

    tokens: tuple[str, ...]
    scores: np.ndarray
    source_index: np.ndarray | None = None
    doc_freq: np.ndarray | None = None
    n_docs: int | None = None
    index: dict = field(repr=False, default=None)

    def __post_init__(self):
        if self.index is None:
            object.__setattr__(self, "index", {t: i for i, t in enumerate(self.tokens)})

    def __len__(self):
        return len(self.tokens)

    def __contains__(self, token):
        return token in self.index


@dataclass(frozen=True)
class SparseVector:
    entries: dict
    doc_id: str = ""

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, idx):
        return self.entries.get(idx, 0.0)


def _as_counter(seq) -> Counter:
    return seq if isinstance(seq, Counter) else Counter(seq)


def _positive(label) -> bool:
    if isinstance(label, str):
        return label == "relevant"
    return bool(label > 0)


def build_vocabulary(sequences: Iterable, labels: Iterable) -> Vocabulary:
    """Count, for every gram seen in training, how many documents contain it.

    ``labels`` may be booleans, +1/-1 or the corpus label strings. Empty
    documents still count toward the document total.
    """
    df: Counter = Counter()
    pos: Counter = Counter()
    n_docs = n_pos = 0
    for seq, label in zip(sequences, labels, strict=True):
        present = set(seq)
        n_docs += 1
        df.update(present)
        if _positive(label):
            n_pos += 1
            pos.update(present)
    if not df:
        raise ValueError("empty vocabulary: no training document contains any token")
    tokens = tuple(sorted(df))
    doc_freq = np.fromiter((df[t] for t in tokens), dtype=np.int64, count=len(tokens))
    pos_counts = np.fromiter((pos[t] for t in tokens), dtype=np.int64, count=len(tokens))
    return Vocabulary(tokens=tokens, doc_freq=doc_freq, pos_doc_counts=pos_counts,
                      neg_doc_counts=doc_freq - pos_counts, n_docs=n_docs,
                      n_pos=n_pos, n_neg=n_docs - n_pos)


def token_value(value_type, tr: int, max_tf: int, n: int | None = None,
                n_t: int | None = None) -> float:
    """Value of one present token.

    NTF is ``0.5 + 0.5 * tr / max_tf``; TFIDF multiplies NTF by ``ln(n / n_t)``.
    """
    value_type = TokenValueType.parse(value_type)
    if tr < 1:
        raise ValueError(f"term frequency must be >= 1, got {tr}")
    if max_tf < tr:
        raise ValueError(f"max_tf ({max_tf}) must be >= term frequency ({tr})")
    if value_type is TokenValueType.BINARY:
        return 1.0
    if value_type is TokenValueType.FREQUENCY:
        return float(tr)
    ntf = 0.5 + 0.5 * tr / max_tf
    if value_type is TokenValueType.NORMALIZED_TERM_FREQUENCY:
        return ntf
    if n is None or n_t is None:
        raise ValueError("tfidf needs the document count n and document frequency n_t")
    if not 1 <= n_t <= n:
        raise ValueError(f"tfidf needs 1 <= n_t <= n, got n_t={n_t}, n={n}")
    if n_t == n:
        return 0.0
    return ntf * math.log(n / n_t)


def _binary_entropy(pos: np.ndarray, total: np.ndarray) -> np.ndarray:
    """Entropy in bits of a two-class split with ``pos`` of ``total`` positive."""
    pos = np.asarray(pos, dtype=float)
    total = np.asarray(total, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(total > 0, pos / total, 0.0)
        q = 1.0 - p
        hp = np.where(p > 0, -p * np.log2(np.where(p > 0, p, 1.0)), 0.0)
        hq = np.where(q > 0, -q * np.log2(np.where(q > 0, q, 1.0)), 0.0)
    return hp + hq


def information_gain_array(vocabulary: Vocabulary) -> np.ndarray:
    """IG in bits per token, aligned with ``vocabulary.tokens``."""
    n = vocabulary.n_docs
    if vocabulary.n_pos == 0 or vocabulary.n_neg == 0:
        raise ValueError("information gain needs both classes in the training set")
    h_c = float(_binary_entropy(vocabulary.n_pos, n))
    n_t = vocabulary.doc_freq
    pos_t = vocabulary.pos_doc_counts
    h_present = _binary_entropy(pos_t, n_t)
    h_absent = _binary_entropy(vocabulary.n_pos - pos_t, n - n_t)
    cond = (n_t / n) * h_present + ((n - n_t) / n) * h_absent
    return np.clip(h_c - cond, 0.0, h_c)


def information_gain(vocabulary: Vocabulary) -> dict[str, float]:
    ig = information_gain_array(vocabulary)
    return dict(zip(vocabulary.tokens, ig.tolist()))


def rank_tokens(tokens: Sequence[str], scores: np.ndarray) -> np.ndarray:
    """Positions of ``tokens`` ordered by descending score, ties lexicographic."""
    scores = np.asarray(scores, dtype=float)
    lex = np.empty(len(tokens), dtype=np.int64)
    lex[np.argsort(np.asarray(tokens, dtype=object), kind="stable")] = np.arange(len(tokens))
    return np.lexsort((lex, -scores))


def select_top_k(ig_scores, k: int, vocabulary: Vocabulary | None = None) -> ReducedVocabulary:
    """Keep the ``k`` highest-scoring tokens (all of them when ``k`` exceeds the size).

    ``ig_scores`` is a token->score mapping, or an array aligned with
    ``vocabulary.tokens``. Passing the vocabulary carries document
    frequencies along, which TFIDF vectorization needs.
    """
    if isinstance(k, bool) or not isinstance(k, (int, np.integer)) or k < 1:
        raise ValueError(f"number of tokens must be a positive integer, got {k!r}")
    if isinstance(ig_scores, Mapping):
        tokens = list(ig_scores)
        scores = np.fromiter((ig_scores[t] for t in tokens), dtype=float, count=len(tokens))
    else:
        if vocabulary is None:
            raise ValueError("array scores need the vocabulary they are aligned with")
        tokens = list(vocabulary.tokens)
        scores = np.asarray(ig_scores, dtype=float)
    order = rank_tokens(tokens, scores)[:k]
    kept = tuple(tokens[i] for i in order)
    source = doc_freq = n_docs = None
    if vocabulary is not None:
        source = np.fromiter((vocabulary.index[t] for t in kept), dtype=np.int64, count=len(kept))
        doc_freq = vocabulary.doc_freq[source]
        n_docs = vocabulary.n_docs
    return ReducedVocabulary(tokens=kept, scores=scores[order], source_index=source,
                             doc_freq=doc_freq, n_docs=n_docs)


def vectorize(sequence, vocabulary: ReducedVocabulary, value_type, doc_id: str = "") -> SparseVector:
    """Sparse feature vector of one document; out-of-vocabulary grams are ignored.

    ``max_tf`` is taken over the document's in-vocabulary grams only.
    """
    value_type = TokenValueType.parse(value_type)
    counts = _as_counter(sequence)
    kept = {vocabulary.index[g]: c for g, c in counts.items() if g in vocabulary.index}
    if not kept:
        return SparseVector({}, doc_id)
    max_tf = max(kept.values())
    needs_df = value_type is TokenValueType.TFIDF
    if needs_df and vocabulary.doc_freq is None:
        raise ValueError("tfidf vectorization needs a vocabulary with document frequencies")
    entries = {}
    for idx in sorted(kept):
        if needs_df:
            v = token_value(value_type, kept[idx], max_tf, vocabulary.n_docs,
                            int(vocabulary.doc_freq[idx]))
        else:
            v = token_value(value_type, kept[idx], max_tf)
        if v != 0.0:
            entries[idx] = v
    return SparseVector(entries, doc_id)


def vectors_to_csr(vectors: Sequence[SparseVector], n_features: int) -> sp.csr_matrix:
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    for vec in vectors:
        for idx, val in sorted(vec.entries.items()):
            if not 0 <= idx < n_features:
                raise IndexError(f"feature index {idx} out of bounds for {n_features} features")
            indices.append(idx)
            data.append(val)
        indptr.append(len(indices))
    return sp.csr_matrix((np.asarray(data, dtype=float), np.asarray(indices, dtype=np.int64),
                          np.asarray(indptr, dtype=np.int64)), shape=(len(vectors), n_features))


# Batched path used by the sweep: one count matrix per (stemming, n), then
# column selection and value transforms are cheap array operations.

def count_matrix(sequences: Iterable, vocabulary: Vocabulary) -> sp.csr_matrix:
    """Raw gram counts over the full vocabulary; unknown grams are dropped."""
    index = vocabulary.index
    indptr = [0]
    indices: list[int] = []
    data: list[int] = []
    for seq in sequences:
        row = sorted((index[g], c) for g, c in _as_counter(seq).items() if g in index)
        indices.extend(i for i, _ in row)
        data.extend(c for _, c in row)
        indptr.append(len(indices))
    return sp.csr_matrix((np.asarray(data, dtype=np.int64), np.asarray(indices, dtype=np.int64),
                          np.asarray(indptr, dtype=np.int64)),
                         shape=(len(indptr) - 1, len(vocabulary)))


def weight_matrix(counts: sp.csr_matrix, reduced: ReducedVocabulary, value_type) -> sp.csr_matrix:
    """Apply column selection and a token value type to a count matrix.

    Row ``i`` equals ``vectorize`` of document ``i`` against ``reduced``.
    """
    value_type = TokenValueType.parse(value_type)
    if reduced.source_index is None:
        raise ValueError("weight_matrix needs a reduced vocabulary built with its source vocabulary")
    sub = counts[:, reduced.source_index].tocsr()
    sub.sort_indices()
    tr = sub.data.astype(float)
    if value_type is TokenValueType.BINARY:
        data = np.ones_like(tr)
    elif value_type is TokenValueType.FREQUENCY:
        data = tr
    else:
        row_max = np.zeros(sub.shape[0])
        nz_rows = np.diff(sub.indptr) > 0
        if nz_rows.any():
            row_max[nz_rows] = np.maximum.reduceat(tr, sub.indptr[:-1][nz_rows])
        per_entry_max = np.repeat(row_max, np.diff(sub.indptr))
        data = 0.5 + 0.5 * tr / per_entry_max
        if value_type is TokenValueType.TFIDF:
            n_t = reduced.doc_freq[sub.indices]
            idf = np.where(n_t == reduced.n_docs, 0.0, np.log(reduced.n_docs / n_t))
            data = data * idf
    out = sp.csr_matrix((data, sub.indices.copy(), sub.indptr.copy()), shape=sub.shape)
    out.eliminate_zeros()
    return out


def write_vocabulary_csv(vocabulary: Vocabulary, path, ig: np.ndarray | None = None) -> None:
    """Audit dump: token, N_t, pos_doc_count, neg_doc_count, ig_bits."""
    if ig is None:
        ig = information_gain_array(vocabulary)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["token", "N_t", "pos_doc_count", "neg_doc_count", "ig_bits"])
        for i, tok in enumerate(vocabulary.tokens):
            writer.writerow([tok, int(vocabulary.doc_freq[i]), int(vocabulary.pos_doc_counts[i]),
                             int(vocabulary.neg_doc_counts[i]), repr(float(ig[i]))])
