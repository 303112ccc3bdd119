from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from subscode.errors import ConfigError

UNK = "<unk>"
BOS = "<s>"
EOS = "</s>"
RESERVED_WORDS = (BOS, EOS)


@dataclass
class Vocabulary:
    """Word <-> id map with counts.

    Retained words take ids 0..m-1 in descending-count order, followed by
    the unknown tag and the two sentence-boundary markers.
    """

    words: List[str]
    counts: List[int]
    unk_id: int
    bos_id: int
    eos_id: int
    index: Dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        if len(self.words) != len(self.counts):
            raise ValueError("words and counts must have the same length")
        self.index = {}
        for i, word in enumerate(self.words):
            if word in self.index:
                raise ValueError(f"duplicate vocabulary entry: {word!r}")
            self.index[word] = i
        for name, value in (("unk_id", self.unk_id), ("bos_id", self.bos_id), ("eos_id", self.eos_id)):
            if not 0 <= value < len(self.words):
                raise ValueError(f"{name}={value} outside vocabulary of size {len(self.words)}")

    @classmethod
    def from_ranked(cls, ranked: List[Tuple[str, int]], unk_count: int) -> "Vocabulary":
        """build from (word, count) pairs already in id order"""
        words = [w for w, _ in ranked] + [UNK, BOS, EOS]
        counts = [c for _, c in ranked] + [unk_count, 0, 0]
        m = len(ranked)
        return cls(words=words, counts=counts, unk_id=m, bos_id=m + 1, eos_id=m + 2)

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word: str) -> bool:
        return word in self.index

    @property
    def retained(self) -> List[str]:
        """content words, without the unknown tag and boundary markers"""
        return self.words[: self.unk_id]

    def id_of(self, word: str) -> int:
        if word in RESERVED_WORDS:
            return self.unk_id
        return self.index.get(word, self.unk_id)

    def word_of(self, word_id: int) -> str:
        return self.words[word_id]

    def count_of(self, word: str) -> int:
        return self.counts[self.id_of(word)]

    def candidate_ids(self) -> np.ndarray:
        """ids that may fill a token position (everything but the boundary markers)"""
        ids = np.arange(len(self.words), dtype=np.int64)
        return ids[(ids != self.bos_id) & (ids != self.eos_id)]

    def predictable_ids(self) -> np.ndarray:
        """ids a language model assigns probability to (bos is never predicted)"""
        ids = np.arange(len(self.words), dtype=np.int64)
        return ids[ids != self.bos_id]


@dataclass
class CountTable:
    """k-gram counts for k = 1..order over bos-padded, eos-terminated sentences"""

    order: int
    vocab: Vocabulary
    counts: List[Dict[Tuple[int, ...], int]] = field(default_factory=list)

    def __post_init__(self):
        if self.order < 1:
            raise ValueError(f"order must be >= 1, got {self.order}")
        if not self.counts:
            self.counts = [{} for _ in range(self.order)]

    def __getitem__(self, k: int) -> Dict[Tuple[int, ...], int]:
        return self.counts[k - 1]

    def is_empty(self) -> bool:
        return not self.counts[0]

    def token_count(self) -> int:
        """predicted tokens, eos included"""
        return sum(self.counts[0].values())


@dataclass(frozen=True)
class ContextWindow:
    """Target position inside a sentence of ids; half_width is n-1."""

    sentence: Tuple[int, ...]
    position: int
    half_width: int

    def __post_init__(self):
        if not 0 <= self.position < len(self.sentence):
            raise ValueError(f"position {self.position} out of range for sentence of length {len(self.sentence)}")
        if self.half_width < 0:
            raise ValueError(f"half_width must be >= 0, got {self.half_width}")

    @property
    def target(self) -> int:
        return self.sentence[self.position]


@dataclass
class SubstituteDistribution:
    """Top-K substitutes for one token, most probable first."""

    position: int
    entries: List[Tuple[int, float]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)

    def ids(self) -> np.ndarray:
        return np.array([w for w, _ in self.entries], dtype=np.int64)

    def probabilities(self) -> np.ndarray:
        return np.array([p for _, p in self.entries], dtype=np.float64)

    def total(self) -> float:
        return float(sum(p for _, p in self.entries))


@dataclass(frozen=True)
class CooccurrencePair:
    """one (word token type, sampled substitute) draw"""

    x: str
    y: str


@dataclass
class EmpiricalDistribution:
    """Pair counts summarized as empirical marginal and joint frequencies.

    Ids on each side are assigned by descending count, ties broken by the
    word's UTF-8 bytes.
    """

    x_words: List[str]
    y_words: List[str]
    x_counts: np.ndarray
    y_counts: np.ndarray
    pair_x: np.ndarray
    pair_y: np.ndarray
    pair_counts: np.ndarray
    n: int
    x_index: Dict[str, int] = field(init=False, repr=False)
    y_index: Dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        self.x_index = {w: i for i, w in enumerate(self.x_words)}
        self.y_index = {w: i for i, w in enumerate(self.y_words)}

    @property
    def p_x(self) -> np.ndarray:
        return self.x_counts / self.n

    @property
    def p_y(self) -> np.ndarray:
        return self.y_counts / self.n

    @property
    def p_xy(self) -> np.ndarray:
        """frequency of each distinct pair, aligned with pair_x / pair_y"""
        return self.pair_counts / self.n

    def joint(self) -> Dict[Tuple[str, str], float]:
        return {
            (self.x_words[x], self.y_words[y]): c / self.n
            for x, y, c in zip(self.pair_x.tolist(), self.pair_y.tolist(), self.pair_counts.tolist())
        }

    def joint_matrix(self) -> np.ndarray:
        """dense |X| x |Y| joint frequencies, for enumerable instances only"""
        m = np.zeros((len(self.x_words), len(self.y_words)))
        m[self.pair_x, self.pair_y] = self.pair_counts / self.n
        return m


@dataclass
class EmbeddingSet:
    """phi vectors for the X side (word types), psi vectors for the Y side (substitutes)"""

    x_words: List[str]
    y_words: List[str]
    phi: np.ndarray
    psi: np.ndarray
    x_index: Dict[str, int] = field(init=False, repr=False)
    y_index: Dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        self.phi = np.ascontiguousarray(self.phi, dtype=np.float64)
        self.psi = np.ascontiguousarray(self.psi, dtype=np.float64)
        if self.phi.shape[0] != len(self.x_words) or self.psi.shape[0] != len(self.y_words):
            raise ValueError("embedding rows must match the word lists")
        if self.phi.shape[1] != self.psi.shape[1]:
            raise ValueError(f"dimension mismatch: phi has {self.phi.shape[1]}, psi has {self.psi.shape[1]}")
        self.x_index = {w: i for i, w in enumerate(self.x_words)}
        self.y_index = {w: i for i, w in enumerate(self.y_words)}

    @property
    def d(self) -> int:
        return self.phi.shape[1]

    def copy(self) -> "EmbeddingSet":
        return EmbeddingSet(list(self.x_words), list(self.y_words), self.phi.copy(), self.psi.copy())

    def max_norm_error(self) -> float:
        norms = np.concatenate([np.linalg.norm(self.phi, axis=1), np.linalg.norm(self.psi, axis=1)])
        return float(np.max(np.abs(norms - 1.0))) if norms.size else 0.0


@dataclass
class TrainConfig:
    """SCODE training parameters"""

    d: int = 50
    z_constant: float = 0.166
    lambda0: float = 0.5
    nu: float = 50.0
    epochs: int = 20
    seed: int = 0
    parallel: bool = False

    def __post_init__(self):
        if self.d < 1:
            raise ConfigError("scode.d", f"must be >= 1, got {self.d}")
        if not self.z_constant > 0:
            raise ConfigError("scode.z_constant", f"must be > 0, got {self.z_constant}")
        if not self.lambda0 > 0:
            raise ConfigError("scode.lambda0", f"must be > 0, got {self.lambda0}")
        if not self.nu > 0:
            raise ConfigError("scode.nu", f"must be > 0, got {self.nu}")
        if self.epochs < 0:
            raise ConfigError("scode.epochs", f"must be >= 0, got {self.epochs}")


@dataclass
class NeighborList:
    query_id: int
    entries: List[Tuple[int, float]] = field(default_factory=list)

    def labeled(self, words: List[str]) -> List[Tuple[str, float]]:
        return [(words[i], dist) for i, dist in self.entries]


@dataclass
class CorpusStatistics:
    sentences: int = 0
    tokens: int = 0
    types: int = 0
    dropped: Optional[int] = None
