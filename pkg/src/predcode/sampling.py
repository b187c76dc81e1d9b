"""Down-sampling of the negative (not relevant) training class."""

from __future__ import annotations

import math
from fractions import Fraction
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SamplingSpec:
    percentage: float = 100.0
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.percentage <= 100:
            raise ValueError(f"sampling percentage must be in (0, 100], got {self.percentage}")
        if isinstance(self.seed, bool) or int(self.seed) != self.seed or self.seed < 0:
            raise ValueError(f"seed must be an unsigned integer, got {self.seed!r}")


def retained_negative_count(n_negative: int, percentage: float) -> int:
    # exact decimal arithmetic; a float product can land just under an integer
    return math.floor(n_negative * Fraction(str(percentage)) / 100)


def sample_negative_positions(n_negative: int, spec: SamplingSpec) -> np.ndarray:
    """Sorted positions (into the negatives, in input order) that survive sampling."""
    keep = retained_negative_count(n_negative, spec.percentage)
    if keep == 0:
        raise ValueError(
            f"down sampling {n_negative} negatives at {spec.percentage}% leaves none")
    if keep == n_negative:
        return np.arange(n_negative)
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    return np.sort(rng.choice(n_negative, size=keep, replace=False))


def down_sample_mask(positive, spec: SamplingSpec) -> np.ndarray:
    """Boolean keep-mask over training rows given their positive flags."""
    positive = np.asarray(positive, dtype=bool)
    neg_rows = np.flatnonzero(~positive)
    if neg_rows.size == 0:
        raise ValueError("down sampling needs at least one negative training document")
    mask = positive.copy()
    mask[neg_rows[sample_negative_positions(neg_rows.size, spec)]] = True
    return mask


def down_sample(docs, spec: SamplingSpec, is_positive=None) -> list:
    """Keep every positive and a seeded uniform subset of the negatives.

    Input order is preserved. ``is_positive`` defaults to the documents'
    ``relevant`` attribute.
    """
    docs = list(docs)
    if is_positive is None:
        flags = [d.relevant for d in docs]
    else:
        flags = [bool(is_positive(d)) for d in docs]
    mask = down_sample_mask(flags, spec)
    return [d for d, keep in zip(docs, mask) if keep]
