"""Raw text to token sequences: tokenize, optional stemming, n-gram expansion."""

from __future__ import annotations

import re
from dataclasses import dataclass

from .porter import porter_stem

# Unicode alphanumeric runs; "_" is excluded so it acts as a separator.
_TOKEN_RE = re.compile(r"[^\W_]+")


@dataclass(frozen=True)
class TokenSequence:
    tokens: tuple[str, ...]
    ngram_order: int

    def __len__(self):
        return len(self.tokens)

    def __iter__(self):
        return iter(self.tokens)


def tokenize(text: str) -> list[str]:
    """Lowercase ``text`` and split it on every non-alphanumeric run.

    >>> tokenize("breast-cancer 2017")
    ['breast', 'cancer', '2017']
    """
    return _TOKEN_RE.findall(text.lower())


def stem(tokens: list[str], enabled: bool) -> list[str]:
    if not enabled:
        return list(tokens)
    return [porter_stem(t) for t in tokens]


def ngrams(tokens: list[str], n: int) -> TokenSequence:
    """All contiguous grams of order 1..n, ordered by order then position.

    Grams are joined with a single space.
    """
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise ValueError(f"ngrams: n must be a positive integer, got {n!r}")
    tokens = list(tokens)
    out = list(tokens)
    m = len(tokens)
    for k in range(2, min(n, m) + 1):
        out.extend(" ".join(tokens[i:i + k]) for i in range(m - k + 1))
    return TokenSequence(tuple(out), n)


def preprocess(text: str, stemming: bool, n: int) -> TokenSequence:
    """tokenize -> stem -> ngrams, the fixed pipeline order."""
    return ngrams(stem(tokenize(text), stemming), n)
