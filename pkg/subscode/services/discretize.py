"""
Discretization: turn each token's substitute distribution into S sampled
(word, substitute) co-occurrence pairs.
"""

import logging
from itertools import zip_longest
from pathlib import Path
from typing import Iterable, Iterator, List, Tuple, Union

import numpy as np

from subscode.errors import FormatError
from subscode.models.pipeline_types import CooccurrencePair, SubstituteDistribution, Vocabulary

logger = logging.getLogger(__name__)

# substitute files carry 6 significant digits
NORMALIZATION_TOLERANCE = 1e-3

_MISSING = object()


def token_rng(seed: int, token_index: int) -> np.random.Generator:
    """independent generator for one corpus token, keyed by (seed, token index)"""
    return np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFF, int(token_index)]))


def sample_substitutes(dist: SubstituteDistribution, S: int, rng: np.random.Generator) -> np.ndarray:
    """
    Draw S substitute ids with replacement

    Args:
        dist: normalized substitute distribution
        S: number of draws
        rng: numpy Generator

    Returns:
        int64 array of S ids
    """
    if S < 1:
        raise ValueError(f"S must be >= 1, got {S}")
    probs = dist.probabilities()
    if probs.size == 0:
        raise ValueError(f"empty substitute distribution at position {dist.position}")
    if np.any(probs <= 0) or abs(probs.sum() - 1.0) > NORMALIZATION_TOLERANCE:
        raise ValueError(f"substitute distribution at position {dist.position} is not normalized (sum={probs.sum():.6f})")
    cdf = np.cumsum(probs)
    draws = rng.random(S) * cdf[-1]
    index = np.minimum(np.searchsorted(cdf, draws, side="right"), probs.size - 1)
    return dist.ids()[index]


def emit_pairs(
    words: Iterable[str],
    distributions: Iterable[SubstituteDistribution],
    S: int,
    seed: int,
    vocab: Vocabulary,
) -> Iterator[CooccurrencePair]:
    """
    S pairs per token in corpus order, samples contiguous per token

    Token i draws from token_rng(seed, i), so any split of the corpus into
    shards replays the same pairs for every token.
    """
    for index, (word, dist) in enumerate(zip_longest(words, distributions, fillvalue=_MISSING)):
        if word is _MISSING or dist is _MISSING:
            raise ValueError(f"token stream and distribution stream differ in length at token {index}")
        yield from _token_pairs(index, word, dist, S, seed, vocab)


def _token_pairs(index, word, dist, S, seed, vocab):
    for y in sample_substitutes(dist, S, token_rng(seed, index)):
        yield CooccurrencePair(word, vocab.word_of(int(y)))


def _flatten(sentences: Iterable[List[Tuple[str, SubstituteDistribution]]]):
    for sentence in sentences:
        yield from sentence


def pairs_from_substitutes(
    sentences: Iterable[List[Tuple[str, SubstituteDistribution]]], S: int, seed: int, vocab: Vocabulary
) -> Iterator[CooccurrencePair]:
    """pairs for a substitute-file stream, as yielded by read_substitutes"""
    for index, (word, dist) in enumerate(_flatten(sentences)):
        yield from _token_pairs(index, word, dist, S, seed, vocab)


def write_pairs(path: Union[str, Path], pairs: Iterable[CooccurrencePair]) -> int:
    written = 0
    with open(path, "w", encoding="utf-8") as f:
        for pair in pairs:
            f.write(f"{pair.x}\t{pair.y}\n")
            written += 1
    logger.info(f"✅ Wrote {written} pairs to {path}")
    return written


def read_pairs(path: Union[str, Path]) -> Iterator[CooccurrencePair]:
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, 1):
            fields = line.rstrip("\n").split("\t")
            if len(fields) != 2 or not fields[0] or not fields[1]:
                raise FormatError(path, line_no, "expected 'word<TAB>substitute'")
            yield CooccurrencePair(fields[0], fields[1])
