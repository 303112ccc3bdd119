"""
Corpus ingestion: tokenization, the lowercase sentence filter, and
vocabulary construction with rare-word replacement.
"""

import logging
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from itertools import islice
from pathlib import Path
from typing import Iterable, Iterator, List, Sequence, Union

from subscode.errors import FormatError
from subscode.models.pipeline_types import (
    RESERVED_WORDS,
    UNK,
    CorpusStatistics,
    Vocabulary,
)

logger = logging.getLogger(__name__)

Line = Union[str, bytes]


def tokenize_line(text: Line) -> List[str]:
    """split on runs of whitespace, case preserved"""
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    return text.split()


def lowercase_fraction(text: str) -> float:
    """share of non-whitespace characters that are ASCII a-z; NaN for blank text"""
    visible = [ch for ch in text if not ch.isspace()]
    if not visible:
        return float("nan")
    lower = sum(1 for ch in visible if "a" <= ch <= "z")
    return lower / len(visible)


def clean_corpus(lines: Iterable[str], lowercase_ratio: float) -> Iterator[str]:
    """
    Drop sentences that are not mostly lowercase a-z

    Args:
        lines: corpus lines (one sentence per line)
        lowercase_ratio: minimum share of a-z among non-whitespace characters

    Yields:
        Kept lines, unchanged. Blank lines are dropped.
    """
    if not 0.0 <= lowercase_ratio <= 1.0:
        raise ValueError(f"lowercase_ratio must be within [0, 1], got {lowercase_ratio}")
    for line in lines:
        ratio = lowercase_fraction(line)
        # NaN compares False, so blank lines fall through
        if ratio >= lowercase_ratio:
            yield line


def _count_shard(shard: Iterable[str]) -> Counter:
    counts = Counter()
    for line in shard:
        counts.update(tokenize_line(line))
    return counts


def count_tokens(lines: Iterable[str], threads: int = 1, shard_size: int = 10000) -> Counter:
    """Token counts; shards are merged in input order so the result matches a sequential pass."""
    if threads <= 1:
        return _count_shard(lines)
    lines = iter(lines)
    shards = iter(lambda: list(islice(lines, shard_size)), [])
    total = Counter()
    with ThreadPoolExecutor(max_workers=threads) as executor:
        for counts in executor.map(_count_shard, shards):
            total.update(counts)
    return total


def _rank_key(item):
    word, count = item
    return (-count, word.encode("utf-8"))


def build_vocabulary(lines: Iterable[str], min_count: int = 2, threads: int = 1) -> Vocabulary:
    """
    Count tokens and replace rare words with the unknown tag

    Args:
        lines: corpus lines
        min_count: words seen fewer times are absorbed by UNK
        threads: counting shards processed concurrently

    Returns:
        Vocabulary with ids in descending-count order, ties by UTF-8 bytes
    """
    if min_count < 1:
        raise ValueError(f"min_count must be >= 1, got {min_count}")

    counts = count_tokens(lines, threads=threads)
    if not counts:
        raise ValueError("cannot build a vocabulary from an empty corpus")

    for marker in RESERVED_WORDS:
        if marker in counts:
            raise ValueError(f"reserved boundary marker {marker!r} found in corpus content")

    # a literal unknown tag in the text is just another unknown word
    unk_count = counts.pop(UNK, 0)
    retained = []
    for word, count in counts.items():
        if count >= min_count:
            retained.append((word, count))
        else:
            unk_count += count
    retained.sort(key=_rank_key)

    vocab = Vocabulary.from_ranked(retained, unk_count)
    logger.info(f"✅ Vocabulary: {len(retained)} words kept (min_count={min_count}), UNK absorbs {unk_count} tokens")
    return vocab


def apply_vocabulary(sentence: Sequence[str], vocab: Vocabulary) -> List[int]:
    """map words to ids, unknown and reserved strings to unk_id; no boundary markers added"""
    return [vocab.id_of(word) for word in sentence]


def vocabulary_words(sentence: Sequence[str], vocab: Vocabulary) -> List[str]:
    """retained words as written, everything else as the unknown tag"""
    return [vocab.word_of(vocab.id_of(word)) for word in sentence]


def corpus_statistics(lines: Iterable[str]) -> CorpusStatistics:
    stats = CorpusStatistics()
    types = set()
    for line in lines:
        tokens = tokenize_line(line)
        if not tokens:
            continue
        stats.sentences += 1
        stats.tokens += len(tokens)
        types.update(tokens)
    stats.types = len(types)
    return stats


def read_lines(path: Union[str, Path]) -> Iterator[str]:
    """Stream a UTF-8 corpus, one sentence per line, without the trailing newline."""
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            yield line.rstrip("\n")


def read_corpus(path: Union[str, Path], vocab: Vocabulary) -> Iterator[List[int]]:
    for line in read_lines(path):
        yield apply_vocabulary(tokenize_line(line), vocab)


def read_tokens(path: Union[str, Path], vocab: Vocabulary) -> Iterator[List[str]]:
    for line in read_lines(path):
        yield vocabulary_words(tokenize_line(line), vocab)


def write_lines(path: Union[str, Path], lines: Iterable[str]) -> int:
    written = 0
    with open(path, "w", encoding="utf-8") as f:
        for line in lines:
            f.write(line + "\n")
            written += 1
    return written


def write_vocabulary(vocab: Vocabulary, path: Union[str, Path]):
    """UNK line first, then the retained words in id order"""
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"{UNK}\t{vocab.counts[vocab.unk_id]}\n")
        for i, word in enumerate(vocab.retained):
            f.write(f"{word}\t{vocab.counts[i]}\n")


def read_vocabulary(path: Union[str, Path]) -> Vocabulary:
    ranked = []
    unk_count = None
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, 1):
            line = line.rstrip("\n")
            parts = line.split("\t")
            if len(parts) != 2:
                raise FormatError(path, line_no, "expected 'word<TAB>count'")
            word, count_text = parts
            try:
                count = int(count_text)
            except ValueError:
                raise FormatError(path, line_no, f"count is not an integer: {count_text!r}")
            if line_no == 1:
                if word != UNK:
                    raise FormatError(path, line_no, f"first line must be {UNK}")
                unk_count = count
            else:
                ranked.append((word, count))
    if unk_count is None:
        raise FormatError(path, None, "empty vocabulary file")
    try:
        return Vocabulary.from_ranked(ranked, unk_count)
    except ValueError as e:
        raise FormatError(path, None, str(e))
