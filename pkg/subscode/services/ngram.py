"""
n-gram language model with interpolated Kneser-Ney discounting.

Probabilities are stored the way ARPA files store them: log10 values for
every seen k-gram plus a log10 backoff weight per seen context. For an
interpolated model the backoff weight of a context is its interpolation
weight, so querying through the backoff recursion reproduces the
interpolated estimate exactly.
"""

import logging
import math
from collections import Counter, defaultdict
from functools import lru_cache
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from subscode.models.pipeline_types import CountTable, Vocabulary

logger = logging.getLogger(__name__)

LOG10_ZERO = -99.0
LN10 = math.log(10.0)
FALLBACK_DISCOUNT = 0.5
QUERY_CACHE_SIZE = 1 << 20

Gram = Tuple[int, ...]


class NgramModel:
    """Immutable backoff-form n-gram model; safe to share between threads for queries."""

    def __init__(
        self,
        order: int,
        vocab: Vocabulary,
        logprobs: Dict[Gram, float],
        backoffs: Dict[Gram, float],
        discounts: Optional[List[float]] = None,
    ):
        if order < 1:
            raise ValueError(f"order must be >= 1, got {order}")
        self.order = order
        self.vocab = vocab
        self.logprobs = logprobs
        self.backoffs = backoffs
        self.discounts = discounts
        self._build_indexes()
        # memo over (word, context); lru_cache is safe to share between threads
        self._cached_logprob10 = lru_cache(maxsize=QUERY_CACHE_SIZE)(self._walk_backoff)

    @classmethod
    def uniform(cls, vocab: Vocabulary, order: int = 1) -> "NgramModel":
        """every predictable word gets 1/|V|, whatever the history"""
        predictable = vocab.predictable_ids()
        p = math.log10(1.0 / len(predictable))
        logprobs = {(int(w),): p for w in predictable}
        logprobs[(vocab.bos_id,)] = LOG10_ZERO
        return cls(order, vocab, logprobs, {})

    def _build_indexes(self):
        bos = self.vocab.bos_id
        size = len(self.vocab)
        grouped = defaultdict(list)
        self._max_logprob10 = np.full(size, LOG10_ZERO)
        for gram, p in self.logprobs.items():
            word = gram[-1]
            if word == bos:
                continue
            if len(gram) > 1 and p <= LOG10_ZERO:
                continue
            grouped[gram[:-1]].append((word, p))
            if p > self._max_logprob10[word]:
                self._max_logprob10[word] = p
        self._successors = {}
        for context, items in grouped.items():
            items.sort()
            ids = np.array([w for w, _ in items], dtype=np.int64)
            lps = np.array([p for _, p in items], dtype=np.float64)
            self._successors[context] = (ids, lps)
        self._max_backoff10 = max([0.0] + list(self.backoffs.values()))

    def __repr__(self):
        sizes = ", ".join(f"{k}={n}" for k, n in sorted(self.gram_counts().items()))
        return f"<NgramModel(order={self.order}, vocab={len(self.vocab)}, {sizes})>"

    def gram_counts(self) -> Dict[int, int]:
        counts = Counter(len(g) for g in self.logprobs)
        return {k: counts.get(k, 0) for k in range(1, self.order + 1)}

    def _context(self, history: Sequence[int]) -> Gram:
        if self.order == 1:
            return ()
        return tuple(history[-(self.order - 1) :])

    def _check_word(self, word: int):
        if not 0 <= word < len(self.vocab) or word == self.vocab.bos_id:
            raise ValueError(f"word id {word} is not a predictable vocabulary id")

    def logprob10(self, word: int, history: Sequence[int]) -> float:
        """log10 P(word | history), backing off until a stored entry is found"""
        self._check_word(word)
        return self._cached_logprob10(int(word), tuple(int(h) for h in self._context(history)))

    def _walk_backoff(self, word: int, context: Gram) -> float:
        total = 0.0
        while True:
            p = self.logprobs.get(context + (word,))
            if p is not None and (p > LOG10_ZERO or not context):
                return total + p
            if not context:
                raise ValueError(f"no unigram entry for word id {word}")
            total += self.backoffs.get(context, 0.0)
            context = context[1:]

    def logprob(self, word: int, history: Sequence[int]) -> float:
        """natural-log P(word | history); histories longer than n-1 are truncated"""
        return self.logprob10(word, history) * LN10

    def logprob10_vector(self, history: Sequence[int]) -> np.ndarray:
        """log10 P(w | history) for every id w; bos gets -inf"""
        vector = self._vector10(self._context(history))
        vector[self.vocab.bos_id] = -np.inf
        return vector

    def logprob_vector(self, history: Sequence[int]) -> np.ndarray:
        return self.logprob10_vector(history) * LN10

    def _vector10(self, context: Gram) -> np.ndarray:
        if context:
            vector = self._vector10(context[1:]) + self.backoffs.get(context, 0.0)
        else:
            vector = np.full(len(self.vocab), -np.inf)
        successors = self._successors.get(context)
        if successors is not None:
            ids, lps = successors
            vector[ids] = lps
        return vector

    def upper_bound10(self, word: int) -> float:
        """bound on log10 P(word | h) over every history h"""
        return float(self._max_logprob10[word]) + (self.order - 1) * self._max_backoff10


def _padded(sentence: Sequence[int], order: int, vocab: Vocabulary) -> List[int]:
    return [vocab.bos_id] * (order - 1) + list(sentence) + [vocab.eos_id]


def count_ngrams(corpus: Iterable[Sequence[int]], order: int, vocab: Vocabulary) -> CountTable:
    """
    Count every k-gram, k <= order, that ends on a predicted token

    Args:
        corpus: sentences as id sequences (no boundary markers)
        order: model order n; sentences get n-1 bos markers and one eos

    Returns:
        CountTable; empty sentences contribute nothing
    """
    table = CountTable(order=order, vocab=vocab)
    for sentence in corpus:
        if not sentence:
            continue
        padded = _padded(sentence, order, vocab)
        for i in range(order - 1, len(padded)):
            for k in range(1, order + 1):
                gram = tuple(padded[i - k + 1 : i + 1])
                level = table.counts[k - 1]
                level[gram] = level.get(gram, 0) + 1
    return table


def adjusted_counts(counts: CountTable) -> List[Dict[Gram, int]]:
    """
    Kneser-Ney counts per order: raw counts at the top order and for k-grams
    starting with bos, left-continuation counts N1+(. g) otherwise
    """
    n = counts.order
    bos = counts.vocab.bos_id
    adjusted: List[Dict[Gram, int]] = [dict() for _ in range(n)]
    adjusted[n - 1] = dict(counts[n])
    for k in range(n - 1, 0, -1):
        continuation = Counter(gram[1:] for gram in counts[k + 1])
        adjusted[k - 1] = {gram: (c if gram[0] == bos else continuation[gram]) for gram, c in counts[k].items()}
    return adjusted


def kn_discount(level: Dict[Gram, int]) -> float:
    """D = n1 / (n1 + 2 n2) from counts-of-counts, 0.5 when either is zero"""
    n1 = sum(1 for c in level.values() if c == 1)
    n2 = sum(1 for c in level.values() if c == 2)
    if n1 == 0 or n2 == 0:
        return FALLBACK_DISCOUNT
    return n1 / (n1 + 2.0 * n2)


def _context_totals(level: Dict[Gram, int]):
    totals = defaultdict(int)
    types = defaultdict(int)
    for gram, c in level.items():
        totals[gram[:-1]] += c
        types[gram[:-1]] += 1
    return totals, types


def _add_context_placeholders(logprobs: Dict[Gram, float], backoffs: Dict[Gram, float], vocab: Vocabulary):
    # ARPA attaches backoff weights to entries, so every context needs one
    logprobs.setdefault((vocab.bos_id,), LOG10_ZERO)
    for context in backoffs:
        logprobs.setdefault(context, LOG10_ZERO)


def estimate_kn(counts: CountTable) -> NgramModel:
    """
    Interpolated Kneser-Ney with one discount per order

    P_k(w|h) = (a_k(hw) - D_k) / S_h + (D_k N1+(h.) / S_h) P_{k-1}(w|h')
    with the unigram level interpolating with the uniform 1/|V|.
    """
    if counts.is_empty():
        raise ValueError("cannot estimate a language model from empty counts")

    vocab = counts.vocab
    n = counts.order
    adjusted = adjusted_counts(counts)
    discounts = [kn_discount(level) for level in adjusted]

    predictable = [int(w) for w in vocab.predictable_ids()]
    uniform = 1.0 / len(predictable)

    probs: Dict[Gram, float] = {}
    logprobs: Dict[Gram, float] = {}
    backoffs: Dict[Gram, float] = {}

    unigrams = adjusted[0]
    total = sum(unigrams.values())
    d1 = discounts[0]
    gamma = d1 * len(unigrams) / total
    for w in predictable:
        c = unigrams.get((w,), 0)
        probs[(w,)] = max(c - d1, 0.0) / total + gamma * uniform

    for k in range(2, n + 1):
        level = adjusted[k - 1]
        d = discounts[k - 1]
        totals, types = _context_totals(level)
        for gram in sorted(level):
            context = gram[:-1]
            s = totals[context]
            probs[gram] = (level[gram] - d) / s + d * types[context] / s * probs[gram[1:]]
        for context in sorted(totals):
            backoffs[context] = math.log10(d * types[context] / totals[context])

    for gram, p in probs.items():
        logprobs[gram] = math.log10(p)
    _add_context_placeholders(logprobs, backoffs, vocab)

    model = NgramModel(n, vocab, logprobs, backoffs, discounts)
    logger.info(f"✅ Estimated KN model {model} with discounts {[round(x, 4) for x in discounts]}")
    return model


def estimate_additive(counts: CountTable) -> NgramModel:
    """
    Add-one baseline on the top order: P(w|h) = (c(hw) + 1) / (c(h) + |V|),
    unseen histories fall back to the uniform distribution
    """
    if counts.is_empty():
        raise ValueError("cannot estimate a language model from empty counts")

    vocab = counts.vocab
    n = counts.order
    predictable = [int(w) for w in vocab.predictable_ids()]
    size = len(predictable)
    logprobs: Dict[Gram, float] = {}
    backoffs: Dict[Gram, float] = {}

    top = counts[n]
    if n == 1:
        total = sum(top.values())
        for w in predictable:
            logprobs[(w,)] = math.log10((top.get((w,), 0) + 1.0) / (total + size))
    else:
        for w in predictable:
            logprobs[(w,)] = math.log10(1.0 / size)
        totals, _ = _context_totals(top)
        for gram in sorted(top):
            logprobs[gram] = math.log10((top[gram] + 1.0) / (totals[gram[:-1]] + size))
        for context in sorted(totals):
            backoffs[context] = math.log10(size / (totals[context] + size))

    _add_context_placeholders(logprobs, backoffs, vocab)
    model = NgramModel(n, vocab, logprobs, backoffs)
    logger.info(f"✅ Estimated add-one model {model}")
    return model


def perplexity(model: NgramModel, corpus: Iterable[Sequence[int]]) -> float:
    """10^(-sum log10 P / T) over every predicted token, eos included"""
    total10 = 0.0
    predicted = 0
    n = model.order
    for sentence in corpus:
        if not sentence:
            continue
        padded = _padded(sentence, n, model.vocab)
        for i in range(n - 1, len(padded)):
            total10 += model.logprob10(padded[i], padded[i - n + 1 : i])
            predicted += 1
    if predicted == 0:
        raise ValueError("perplexity needs a non-empty corpus")
    return 10.0 ** (-total10 / predicted)
