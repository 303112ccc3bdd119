"""
Substitute word distributions.

For a target position the score of a candidate word is the log of the
n-gram chain restricted to the terms whose conditioning window covers the
target: the term predicting the target itself and the n-1 terms to its
right. Every other factor of the sentence probability is the same for all
candidates and cancels in the normalization.
"""

import heapq
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Iterable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from subscode.errors import FormatError
from subscode.models.pipeline_types import EOS, ContextWindow, SubstituteDistribution, Vocabulary
from subscode.services.ngram import NgramModel

logger = logging.getLogger(__name__)

# bound slack absorbing float rounding between bound and exact score sums
BOUND_SLACK = 1e-9


class _Scorer:
    """Scores candidates for one window; brute-force and pruned search share it."""

    def __init__(self, model: NgramModel, window: ContextWindow):
        n = model.order
        if window.half_width != n - 1:
            raise ValueError(f"window half_width {window.half_width} does not match model order {n}")
        vocab = model.vocab
        self.model = model
        self.padded = [vocab.bos_id] * (n - 1) + list(window.sentence) + [vocab.eos_id]
        self.t = window.position + n - 1
        self.left_history = self.padded[self.t - n + 1 : self.t]
        # right terms whose history includes the target, dropped past eos
        self.right = []
        for j in range(1, n):
            q = self.t + j
            if q >= len(self.padded):
                break
            start = q - n + 1
            self.right.append((self.padded[q], self.padded[start:q], self.t - start))

    def left_vector(self) -> np.ndarray:
        return self.model.logprob_vector(self.left_history)

    def score(self, left: float, candidate: int) -> float:
        total = left
        for word, history, slot in self.right:
            history = list(history)
            history[slot] = candidate
            total += self.model.logprob(word, history)
        return total

    def right_bound(self) -> float:
        bound = 0.0
        for word, _, _ in self.right:
            bound += min(0.0, self.model.upper_bound10(word)) * np.log(10.0)
        return bound


def context_score(model: NgramModel, window: ContextWindow, candidate: int) -> float:
    """natural-log score of filling window.position with candidate"""
    scorer = _Scorer(model, window)
    return scorer.score(model.logprob(candidate, scorer.left_history), candidate)


def _normalized(ranked: List[Tuple[float, int]], position: int) -> SubstituteDistribution:
    scores = np.array([s for s, _ in ranked], dtype=np.float64)
    weights = np.exp(scores - scores[0])
    probs = weights / weights.sum()
    entries = [(int(w), float(p)) for (_, w), p in zip(ranked, probs)]
    return SubstituteDistribution(position=position, entries=entries)


def substitute_distribution(model: NgramModel, window: ContextWindow, K: int) -> SubstituteDistribution:
    """
    Exhaustive top-K substitutes

    Every id except the boundary markers is a candidate, the target and UNK included.
    Ties are broken by ascending id; the kept entries are renormalized.
    """
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    scorer = _Scorer(model, window)
    left = scorer.left_vector()
    candidates = model.vocab.candidate_ids()
    scores = np.array([scorer.score(left[c], int(c)) for c in candidates])
    order = np.lexsort((candidates, -scores))[:K]
    ranked = [(float(scores[i]), int(candidates[i])) for i in order]
    return _normalized(ranked, window.position)


def substitute_distribution_pruned(model: NgramModel, window: ContextWindow, K: int) -> SubstituteDistribution:
    """
    Top-K substitutes by bounded best-first search

    Candidates are visited by their left-term score; the right terms are
    bounded by the largest stored probability of each right-hand word, so
    the scan stops once no remaining candidate can enter the top K.
    Output matches substitute_distribution exactly.
    """
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    scorer = _Scorer(model, window)
    left = scorer.left_vector()
    candidates = model.vocab.candidate_ids()
    left_c = left[candidates]
    visit = np.lexsort((candidates, -left_c))
    right_bound = scorer.right_bound()

    # min-heap of (score, -id): the root is the current K-th best
    heap: List[Tuple[float, int]] = []
    scored = 0
    for i in visit:
        if len(heap) == K and left_c[i] + right_bound + BOUND_SLACK < heap[0][0]:
            break
        candidate = int(candidates[i])
        item = (scorer.score(left_c[i], candidate), -candidate)
        scored += 1
        if len(heap) < K:
            heapq.heappush(heap, item)
        elif item > heap[0]:
            heapq.heapreplace(heap, item)

    logger.debug(f"🔍 pruned search scored {scored}/{len(candidates)} candidates at position {window.position}")
    ranked = sorted(((s, -neg) for s, neg in heap), key=lambda e: (-e[0], e[1]))
    return _normalized(ranked, window.position)


def substitutes_for_sentence(
    model: NgramModel, sentence: Sequence[int], K: int, pruned: bool = True
) -> List[SubstituteDistribution]:
    search = substitute_distribution_pruned if pruned else substitute_distribution
    sentence = tuple(sentence)
    half_width = model.order - 1
    return [search(model, ContextWindow(sentence, i, half_width), K) for i in range(len(sentence))]


def substitutes_for_corpus(
    model: NgramModel,
    corpus: Iterable[Sequence[int]],
    K: int,
    pruned: bool = True,
    threads: int = 1,
    chunk_size: int = 256,
) -> Iterator[List[SubstituteDistribution]]:
    """
    One list of distributions per sentence, in corpus order

    Sentences are scored on a thread pool in chunks; results come back in
    input order whatever the scheduling.
    """
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")

    def work(sentence):
        return substitutes_for_sentence(model, sentence, K, pruned)

    if threads <= 1:
        for sentence in corpus:
            yield work(sentence)
        return

    with ThreadPoolExecutor(max_workers=threads) as executor:
        chunk = []
        for sentence in corpus:
            chunk.append(sentence)
            if len(chunk) == chunk_size:
                yield from executor.map(work, chunk)
                chunk = []
        if chunk:
            yield from executor.map(work, chunk)


def format_probability(p: float) -> str:
    """6 significant digits, always positional (never 1e-07)"""
    return np.format_float_positional(p, precision=6, unique=False, fractional=False, trim="-")


def format_substitute_line(word: str, dist: SubstituteDistribution, vocab: Vocabulary) -> str:
    fields = [word] + [f"{vocab.word_of(w)} {format_probability(p)}" for w, p in dist.entries]
    return "\t".join(fields)


def write_substitutes(
    path: Union[str, Path],
    tokens: Iterable[Sequence[str]],
    distributions: Iterable[List[SubstituteDistribution]],
    vocab: Vocabulary,
) -> int:
    """
    Write one line per token and a bare </s> line after each sentence

    Args:
        path: output file
        tokens: per sentence, the token column as it should appear (word
            types of the corpus being embedded, rare ones already folded
            into the unknown tag)
        distributions: per sentence, one distribution per token
        vocab: language model vocabulary the substitute ids belong to

    Returns:
        number of token lines written
    """
    written = 0
    with open(path, "w", encoding="utf-8") as f:
        for index, (sentence, dists) in enumerate(zip(tokens, distributions)):
            if len(sentence) != len(dists):
                raise ValueError(f"sentence {index}: {len(sentence)} tokens but {len(dists)} distributions")
            for word, dist in zip(sentence, dists):
                f.write(format_substitute_line(word, dist, vocab) + "\n")
                written += 1
            f.write(EOS + "\n")
    return written


def read_substitutes(
    path: Union[str, Path], vocab: Vocabulary
) -> Iterator[List[Tuple[str, SubstituteDistribution]]]:
    """Yield per sentence the (token word, distribution) pairs; substitutes map through vocab."""
    sentence: List[Tuple[str, SubstituteDistribution]] = []
    pending: Optional[int] = None
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, 1):
            line = line.rstrip("\n")
            pending = line_no
            if line == EOS:
                yield sentence
                sentence = []
                pending = None
                continue
            fields = line.split("\t")
            if len(fields) < 2:
                raise FormatError(path, line_no, "expected a word followed by at least one substitute")
            entries = []
            for field in fields[1:]:
                parts = field.split(" ")
                if len(parts) != 2:
                    raise FormatError(path, line_no, f"expected 'substitute probability', got {field!r}")
                sub, prob_text = parts
                if sub not in vocab:
                    raise FormatError(path, line_no, f"substitute {sub!r} is not in the vocabulary")
                try:
                    prob = float(prob_text)
                except ValueError:
                    raise FormatError(path, line_no, f"not a probability: {prob_text!r}")
                if not prob > 0:
                    raise FormatError(path, line_no, f"probability must be positive, got {prob_text}")
                entries.append((vocab.index[sub], prob))
            sentence.append((fields[0], SubstituteDistribution(position=len(sentence), entries=entries)))
    if pending is not None:
        raise FormatError(path, pending, f"last sentence is not terminated by {EOS}")
