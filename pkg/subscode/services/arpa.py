"""
ARPA backoff language model files.

Layout written here follows the common toolkit convention: a \\data\\ block
with one "ngram k=count" line per order, one \\k-grams: section per order
with tab-separated "logprob<TAB>w1 ... wk[<TAB>backoff]" lines, then \\end\\.
Gzipped files are read and written transparently when the path ends in .gz.
"""

import gzip
import logging
import re
from pathlib import Path
from typing import Dict, List, Tuple, Union

from subscode.errors import FormatError
from subscode.models.pipeline_types import BOS, EOS, UNK, Vocabulary
from subscode.services.ngram import LOG10_ZERO, NgramModel

logger = logging.getLogger(__name__)

NGRAM_COUNT = re.compile(r"^ngram\s+(\d+)\s*=\s*(\d+)$")
SECTION = re.compile(r"^\\(\d+)-grams:$")

PathLike = Union[str, Path]


def _open(path: PathLike, mode: str):
    if str(path).endswith(".gz"):
        return gzip.open(path, mode + "t", encoding="utf-8")
    return open(path, mode, encoding="utf-8")


def write_arpa(model: NgramModel, path: PathLike):
    """Write every stored entry; unigrams keep vocabulary id order so ids survive a round trip."""
    vocab = model.vocab
    by_order: Dict[int, List[Tuple[int, ...]]] = {k: [] for k in range(1, model.order + 1)}
    for gram in model.logprobs:
        by_order[len(gram)].append(gram)

    with _open(path, "w") as f:
        f.write("\\data\\\n")
        for k in range(1, model.order + 1):
            f.write(f"ngram {k}={len(by_order[k])}\n")
        for k in range(1, model.order + 1):
            f.write(f"\n\\{k}-grams:\n")
            for gram in sorted(by_order[k]):
                words = " ".join(vocab.word_of(w) for w in gram)
                line = f"{model.logprobs[gram]:.6f}\t{words}"
                if k < model.order and gram in model.backoffs:
                    line += f"\t{model.backoffs[gram]:.6f}"
                f.write(line + "\n")
        f.write("\n\\end\\\n")
    logger.info(f"✅ Wrote ARPA model to {path}")


def _parse_float(text: str, path: PathLike, line_no: int) -> float:
    try:
        return float(text)
    except ValueError:
        raise FormatError(path, line_no, f"not a number: {text!r}")


def _parse_sections(path: PathLike):
    declared: Dict[int, int] = {}
    entries: Dict[int, List[Tuple[Tuple[str, ...], float, float, int]]] = {}
    state = "start"
    order = 0
    section_line = 0

    def close_section(line_no: int):
        if order and len(entries[order]) != declared[order]:
            raise FormatError(
                path,
                section_line,
                f"\\{order}-grams: has {len(entries[order])} entries but \\data\\ declares {declared[order]}",
            )

    with _open(path, "r") as f:
        line_no = 0
        for line_no, raw in enumerate(f, 1):
            line = raw.strip()
            if not line:
                continue
            if state == "start":
                if line == "\\data\\":
                    state = "data"
                continue
            if state == "end":
                continue

            if line == "\\end\\":
                close_section(line_no)
                state = "end"
                continue

            match = SECTION.match(line)
            if match:
                close_section(line_no)
                order = int(match.group(1))
                if order not in declared:
                    raise FormatError(path, line_no, f"section \\{order}-grams: not declared in \\data\\")
                if order in entries:
                    raise FormatError(path, line_no, f"duplicate section \\{order}-grams:")
                entries[order] = []
                section_line = line_no
                state = "grams"
                continue

            if state == "data":
                match = NGRAM_COUNT.match(line)
                if not match:
                    raise FormatError(path, line_no, f"expected 'ngram k=count', got {line!r}")
                declared[int(match.group(1))] = int(match.group(2))
                continue

            if line.startswith("\\"):
                raise FormatError(path, line_no, f"malformed section header {line!r}")

            parts = line.split()
            if len(parts) not in (order + 1, order + 2):
                raise FormatError(path, line_no, f"expected {order} words for a {order}-gram entry")
            prob = _parse_float(parts[0], path, line_no)
            words = tuple(parts[1 : order + 1])
            backoff = _parse_float(parts[order + 1], path, line_no) if len(parts) == order + 2 else 0.0
            entries[order].append((words, prob, backoff, line_no))

    if state == "start":
        raise FormatError(path, None, "missing \\data\\ header")
    if state != "end":
        raise FormatError(path, line_no, "missing \\end\\ marker")
    for k in declared:
        if k not in entries:
            raise FormatError(path, None, f"\\data\\ declares order {k} but no \\{k}-grams: section follows")
    if 1 not in declared:
        raise FormatError(path, None, "no unigram section")
    return declared, entries


def read_arpa(path: PathLike) -> NgramModel:
    """
    Load an ARPA model

    Content words take ids in unigram-section order, followed by the
    unknown tag and the boundary markers. A file without an <unk> entry
    gets one with log10 probability -99.

    Raises:
        FormatError: malformed headers, entries, or count mismatches (with line number)
    """
    declared, entries = _parse_sections(path)
    order = max(declared)

    content = []
    seen = set()
    for words, _, _, line_no in entries[1]:
        word = words[0]
        if word in seen:
            raise FormatError(path, line_no, f"duplicate unigram {word!r}")
        seen.add(word)
        if word not in (UNK, BOS, EOS):
            content.append((word, 0))
    vocab = Vocabulary.from_ranked(content, 0)
    specials = {UNK: vocab.unk_id, BOS: vocab.bos_id, EOS: vocab.eos_id}

    logprobs: Dict[Tuple[int, ...], float] = {}
    backoffs: Dict[Tuple[int, ...], float] = {}
    for k in sorted(entries):
        for words, prob, backoff, line_no in entries[k]:
            ids = []
            for word in words:
                word_id = vocab.index.get(word)
                if word_id is None:
                    raise FormatError(path, line_no, f"word {word!r} has no unigram entry")
                ids.append(word_id)
            gram = tuple(ids)
            logprobs[gram] = prob
            if backoff != 0.0:
                backoffs[gram] = backoff

    for marker in (UNK, EOS, BOS):
        if marker not in seen:
            if marker != BOS:
                logger.warning(f"⚠️ {path} has no {marker} unigram; assigning log10 probability {LOG10_ZERO}")
            logprobs[(specials[marker],)] = LOG10_ZERO

    model = NgramModel(order, vocab, logprobs, backoffs)
    logger.info(f"✅ Loaded ARPA model {model} from {path}")
    return model
