"""Ranked review curves and review-effort metrics at target recall levels."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

DEFAULT_RECALL_TARGETS = (0.30, 0.40, 0.50, 0.60, 0.70, 0.80, 0.90)


def check_recall_targets(targets: Iterable[float]) -> tuple[float, ...]:
    targets = tuple(float(r) for r in targets)
    if not targets:
        raise ValueError("at least one recall target is required")
    for r in targets:
        if not 0 < r <= 1:
            raise ValueError(f"recall target {r} outside (0, 1]")
    if any(b <= a for a, b in zip(targets, targets[1:])):
        raise ValueError(f"recall targets must be strictly increasing: {targets}")
    return targets


@dataclass(frozen=True, eq=False)
class ReviewCurve:
    """Validation documents ordered by descending score (ties: doc id ascending)."""

    doc_ids: tuple[str, ...]
    scores: np.ndarray
    labels: np.ndarray
    cum_relevant: np.ndarray

    def __len__(self):
        return len(self.doc_ids)

    @property
    def total_relevant(self) -> int:
        return int(self.cum_relevant[-1]) if len(self.cum_relevant) else 0

    def __eq__(self, other):
        if not isinstance(other, ReviewCurve):
            return NotImplemented
        return (self.doc_ids == other.doc_ids and np.array_equal(self.scores, other.scores)
                and np.array_equal(self.labels, other.labels))

    __hash__ = None


def build_curve(scores: Mapping[str, float], validation_docs) -> ReviewCurve:
    """Rank ``validation_docs`` by ``scores[doc.id]``.

    Documents may be corpus Documents or ``(doc_id, relevant)`` pairs.
    """
    rows = []
    for doc in validation_docs:
        if isinstance(doc, tuple):
            doc_id, relevant = doc
        else:
            doc_id, relevant = doc.id, doc.relevant
        if doc_id not in scores:
            raise KeyError(f"no score for validation document {doc_id!r}")
        s = float(scores[doc_id])
        if math.isnan(s):
            raise ValueError(f"score for {doc_id!r} is NaN")
        rows.append((-s, doc_id, bool(relevant)))
    rows.sort(key=lambda r: (r[0], r[1]))
    labels = np.fromiter((r[2] for r in rows), dtype=bool, count=len(rows))
    if not labels.any():
        raise ValueError("validation set has no relevant documents; recall is undefined")
    return ReviewCurve(doc_ids=tuple(r[1] for r in rows),
                       scores=np.fromiter((-r[0] for r in rows), dtype=float, count=len(rows)),
                       labels=labels,
                       cum_relevant=np.cumsum(labels, dtype=np.int64))


def required_relevant(r: float, total_relevant: int) -> int:
    """ceil(r * total_relevant), evaluated on the decimal reading of ``r``."""
    if not 0 < r <= 1:
        raise ValueError(f"recall {r} outside (0, 1]")
    return math.ceil(Fraction(str(r)) * total_relevant)


def review_prefix(curve: ReviewCurve, r: float) -> int:
    """Length of the shortest ranked prefix reaching recall ``r``."""
    need = required_relevant(r, curve.total_relevant)
    return int(np.searchsorted(curve.cum_relevant, need, side="left")) + 1


def percent_reviewed_at_recall(curve: ReviewCurve, r: float) -> float:
    return 100.0 * review_prefix(curve, r) / len(curve)


def precision_at_recall(curve: ReviewCurve, r: float) -> float:
    k = review_prefix(curve, r)
    return 100.0 * int(curve.cum_relevant[k - 1]) / k


def model_summary(curve: ReviewCurve, targets: Sequence[float] = DEFAULT_RECALL_TARGETS) -> float:
    """Mean percent reviewed over the recall targets."""
    targets = check_recall_targets(targets)
    return sum(percent_reviewed_at_recall(curve, r) for r in targets) / len(targets)


def write_curve_csv(curve: ReviewCurve, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["rank", "doc_id", "score", "label", "cum_relevant"])
        for k, doc_id in enumerate(curve.doc_ids):
            writer.writerow([k + 1, doc_id, repr(float(curve.scores[k])),
                             "relevant" if curve.labels[k] else "not_relevant",
                             int(curve.cum_relevant[k])])
