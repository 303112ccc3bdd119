"""
Deterministic synthetic sample corpus.

Sentences come from a small phrase grammar over a fixed lexicon, with
Zipf-like word frequencies inside each part of speech, so the induced
embeddings have known syntactic categories to recover.
"""

import logging
from typing import Dict, Iterator, List

import numpy as np

logger = logging.getLogger(__name__)

DEFAULT_SENTENCES = 10000

LEXICON: Dict[str, List[str]] = {
    "det": ["the", "a", "this", "every", "that", "some"],
    "adj": ["old", "small", "green", "quiet", "bright", "heavy", "strange", "young", "cold", "busy"],
    "noun": [
        "dog", "house", "river", "teacher", "child", "city", "garden", "letter", "doctor", "window",
        "market", "farmer", "song", "road", "boat", "table", "student", "forest", "lamp", "stone",
    ],
    "verb": [
        "sees", "likes", "finds", "builds", "watches", "carries", "paints", "opens", "follows",
        "remembers", "visits", "cleans", "moves", "sells",
    ],
    "prep": ["near", "behind", "under", "with", "across", "inside"],
    "adv": ["slowly", "often", "quickly", "rarely", "quietly", "gladly", "never", "again"],
}

# part-of-speech templates; "adj?" and "pp?" are optional
TEMPLATES = [
    ["det", "adj?", "noun", "verb", "det", "adj?", "noun", "pp?"],
    ["det", "noun", "adv", "verb", "det", "noun"],
    ["det", "adj?", "noun", "verb", "adv"],
    ["det", "noun", "verb", "det", "noun", "prep", "det", "noun"],
]


CONSONANTS = "bdfgklmnprstvz"
VOWELS = "aeiou"
# share of noun slots filled with a made-up, mostly unique word
RARE_NOUN_RATE = 0.03


def _zipf_weights(size: int) -> np.ndarray:
    weights = 1.0 / np.arange(1, size + 1)
    return weights / weights.sum()


def generate_sentences(count: int = DEFAULT_SENTENCES, seed: int = 0) -> Iterator[str]:
    if count < 0:
        raise ValueError(f"count must be >= 0, got {count}")
    rng = np.random.default_rng(seed)
    weights = {pos: _zipf_weights(len(words)) for pos, words in LEXICON.items()}

    def draw(pos: str) -> str:
        if pos == "noun" and rng.random() < RARE_NOUN_RATE:
            return "".join(CONSONANTS[rng.integers(len(CONSONANTS))] + VOWELS[rng.integers(len(VOWELS))] for _ in range(3))
        return LEXICON[pos][rng.choice(len(LEXICON[pos]), p=weights[pos])]

    for _ in range(count):
        template = TEMPLATES[rng.integers(len(TEMPLATES))]
        words = []
        for slot in template:
            if slot == "adj?":
                if rng.random() < 0.4:
                    words.append(draw("adj"))
            elif slot == "pp?":
                if rng.random() < 0.3:
                    words.extend([draw("prep"), draw("det"), draw("noun")])
            else:
                words.append(draw(slot))
        yield " ".join(words)
