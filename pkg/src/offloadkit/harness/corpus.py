"""Synthetic text corpora sized like the experiment's three text files."""

from __future__ import annotations

import random
from functools import lru_cache

import numpy as np

CORPUS_WORDS = {
    "Small": 39_799,
    "Medium": 316_323,
    "Large": 1_095_649,
}

MIN_WORD_LEN = 3
MAX_WORD_LEN = 9


def corpus_words(size: str | int) -> int:
    """Word count for a named size, or an explicit count passed through."""
    if isinstance(size, bool):
        raise ValueError(f"bad corpus size {size!r}")
    if isinstance(size, int):
        if size < 0:
            raise ValueError("word count must be >= 0")
        return size
    try:
        return CORPUS_WORDS[size]
    except KeyError:
        if size.isdigit():
            return int(size)
        raise ValueError(f"unknown corpus size {size!r}; expected one of {sorted(CORPUS_WORDS)}") from None


@lru_cache(maxsize=8)
def generate_corpus(words: int, seed: int = 1) -> bytes:
    """``words`` lowercase pseudo-words of 3-9 letters, single-space separated."""
    if words < 0:
        raise ValueError("words must be >= 0")
    if words == 0:
        return b""
    rng = np.random.default_rng(seed)
    lengths = rng.integers(MIN_WORD_LEN, MAX_WORD_LEN + 1, size=words)
    total = int(lengths.sum()) + words - 1
    text = rng.integers(ord("a"), ord("z") + 1, size=total, dtype=np.uint8)
    spaces = np.cumsum(lengths + 1)[:-1] - 1
    text[spaces] = ord(" ")
    return text.tobytes()


def default_pattern(text: bytes, seed: int) -> bytes:
    """A word taken from ``text`` at a seeded position, so it matches at least once."""
    words = text.split(b" ")
    if not words or words == [b""]:
        raise ValueError("cannot pick a pattern from an empty corpus")
    return words[random.Random(seed).randrange(len(words))]
