"""Synthetic corpora for fixtures and desk-scale replications."""

from __future__ import annotations

import numpy as np

from .corpus import NOT_RELEVANT, RELEVANT, TRAINING, VALIDATION, Corpus, Document

# (training relevant, training not relevant, validation relevant, validation not relevant)
PROJECT_COUNTS = {
    1: (1126, 2897, 206, 1368),
    2: (527, 1114, 292, 1298),
    3: (5743, 6540, 801, 788),
}

_CONSONANTS = "bdfgklmnprstvz"
_VOWELS = "ao"
# inflections the stemmer folds back onto the bare word
_SUFFIXES = ("", "", "", "", "s", "ed", "ing")


def pseudo_words(count: int, rng: np.random.Generator, syllables=(2, 4)) -> list[str]:
    """Distinct lowercase CV-syllable words ending in a vowel.

    Such words are Porter-stable, so stemming only removes the suffixes added
    by the generators below.
    """
    words: list[str] = []
    seen = set()
    while len(words) < count:
        n = int(rng.integers(syllables[0], syllables[1] + 1))
        w = "".join(_CONSONANTS[rng.integers(len(_CONSONANTS))] + _VOWELS[rng.integers(len(_VOWELS))]
                    for _ in range(n))
        if w not in seen:
            seen.add(w)
            words.append(w)
    return words


def _zipf_probs(n: int, exponent: float = 1.1) -> np.ndarray:
    p = 1.0 / np.arange(1, n + 1) ** exponent
    return p / p.sum()


def _inflect(words, rng) -> list[str]:
    suffix = rng.integers(len(_SUFFIXES), size=len(words))
    return [w + _SUFFIXES[s] for w, s in zip(words, suffix)]


def project_corpus(project: int = 1, seed: int = 0, length=(5, 15), vocabulary_size: int = 500,
                  name: str | None = None) -> Corpus:
    """Random-text corpus whose class distribution matches one of the published projects."""
    counts = PROJECT_COUNTS[project]
    rng = np.random.default_rng(seed)
    vocab = pseudo_words(vocabulary_size, rng)
    probs = _zipf_probs(vocabulary_size)
    cells = ((TRAINING, RELEVANT), (TRAINING, NOT_RELEVANT),
             (VALIDATION, RELEVANT), (VALIDATION, NOT_RELEVANT))
    docs = []
    for (split, label), n in zip(cells, counts):
        for _ in range(n):
            k = int(rng.integers(length[0], length[1] + 1))
            words = [vocab[i] for i in rng.choice(vocabulary_size, size=k, p=probs)]
            docs.append(Document(f"p{project}-{len(docs):06d}", " ".join(words), label, split))
    return Corpus(docs, name=name or f"project{project}")


def planted_corpus(n_docs: int = 2000, prevalence: float = 0.15, n_planted: int = 20,
                   validation_fraction: float = 0.4, seed: int = 0,
                   vocabulary_size: int = 3000, length=(25, 60),
                   decoy_rate: float = 0.5, name: str = "planted") -> Corpus:
    """Corpus where a set of planted words decides relevance.

    A document is relevant iff it contains at least two distinct planted
    words. Relevant documents carry 2-4 of them; a ``decoy_rate`` share of
    the others carry exactly one (possibly repeated), so counting-style
    token values blur the signal while presence-style values keep it
    linearly separable. Background text is Zipfian over pseudo-words and
    every word may be inflected.
    """
    rng = np.random.default_rng(seed)
    words = pseudo_words(vocabulary_size + n_planted, rng)
    planted, background = words[:n_planted], words[n_planted:]
    probs = _zipf_probs(vocabulary_size)
    n_rel = int(round(prevalence * n_docs))
    labels = np.zeros(n_docs, dtype=bool)
    labels[rng.choice(n_docs, size=n_rel, replace=False)] = True
    n_val = int(round(validation_fraction * n_docs))
    is_val = np.zeros(n_docs, dtype=bool)
    # stratified split keeps the prevalence in both splits
    for cls in (True, False):
        idx = np.flatnonzero(labels == cls)
        is_val[rng.choice(idx, size=int(round(len(idx) * n_val / n_docs)), replace=False)] = True
    docs = []
    for i in range(n_docs):
        k = int(rng.integers(length[0], length[1] + 1))
        text = [background[j] for j in rng.choice(vocabulary_size, size=k, p=probs)]
        if labels[i]:
            chosen = rng.choice(n_planted, size=int(rng.integers(2, 5)), replace=False)
        elif rng.random() < decoy_rate:
            chosen = rng.choice(n_planted, size=1)
        else:
            chosen = []
        for c in chosen:
            for _ in range(int(rng.integers(1, 4))):
                text.insert(int(rng.integers(len(text) + 1)), planted[c])
        docs.append(Document(f"d{i:05d}", " ".join(_inflect(text, rng)),
                             RELEVANT if labels[i] else NOT_RELEVANT,
                             VALIDATION if is_val[i] else TRAINING))
    return Corpus(docs, name=name)
