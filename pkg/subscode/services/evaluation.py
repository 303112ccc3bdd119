"""
Intrinsic checks and export helpers for trained embeddings.
"""

import logging
from pathlib import Path
from typing import Dict, List, Mapping, Tuple, Union

import numpy as np

from subscode.models.pipeline_types import UNK, EmbeddingSet, NeighborList
from subscode.services.scode import export_vectors, read_embeddings, write_embeddings

logger = logging.getLogger(__name__)

SEPARATION_SIDES = ("phi", "psi", "cross")


def _side(emb: EmbeddingSet, side: str) -> Tuple[List[str], np.ndarray, Dict[str, int]]:
    if side == "phi":
        return emb.x_words, emb.phi, emb.x_index
    if side == "psi":
        return emb.y_words, emb.psi, emb.y_index
    raise ValueError(f"side must be phi or psi, got {side!r}")


def _query(index: Dict[str, int], word: str) -> int:
    if word not in index:
        raise ValueError(f"unknown word {word!r}")
    return index[word]


def nearest_neighbors(emb: EmbeddingSet, word: str, k: int, side: str = "phi") -> NeighborList:
    """
    k closest vectors by squared Euclidean distance, query excluded

    Ties are broken by ascending id.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    _, vectors, index = _side(emb, side)
    query = _query(index, word)
    d2 = np.sum((vectors - vectors[query]) ** 2, axis=1)
    ids = np.arange(vectors.shape[0])
    ranked = [i for i in np.lexsort((ids, d2)) if i != query][:k]
    return NeighborList(query_id=query, entries=[(int(i), float(d2[i])) for i in ranked])


def cosine_neighbors(emb: EmbeddingSet, word: str, k: int, side: str = "phi") -> NeighborList:
    """k most similar vectors by cosine similarity (descending), ties by ascending id"""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    _, vectors, index = _side(emb, side)
    query = _query(index, word)
    norms = np.linalg.norm(vectors, axis=1)
    sims = vectors @ vectors[query] / (norms * norms[query])
    ids = np.arange(vectors.shape[0])
    ranked = [i for i in np.lexsort((ids, -sims)) if i != query][:k]
    return NeighborList(query_id=query, entries=[(int(i), float(sims[i])) for i in ranked])


def block_separation(emb: EmbeddingSet, blocks: Mapping[str, int], side: str = "phi") -> Tuple[float, float]:
    """
    Mean squared distance within and across blocks

    Args:
        emb: trained embeddings
        blocks: word -> block label, covering every word on the compared side(s)
        side: "phi" or "psi" compares distinct words of one side;
            "cross" compares every phi(x) against every psi(y)

    Returns:
        (within mean, cross mean)
    """
    if side not in SEPARATION_SIDES:
        raise ValueError(f"side must be one of {', '.join(SEPARATION_SIDES)}, got {side!r}")

    if side == "cross":
        left_words, left, right_words, right = emb.x_words, emb.phi, emb.y_words, emb.psi
    else:
        left_words, left, _ = _side(emb, side)
        right_words, right = left_words, left

    missing = [w for w in list(left_words) + list(right_words) if w not in blocks]
    if missing:
        raise ValueError(f"{len(missing)} words have no block, e.g. {missing[0]!r}")

    left_labels = np.array([blocks[w] for w in left_words])
    right_labels = np.array([blocks[w] for w in right_words])
    d2 = np.sum(left**2, axis=1)[:, None] + np.sum(right**2, axis=1)[None, :] - 2.0 * left @ right.T
    d2 = np.clip(d2, 0.0, None)
    same = left_labels[:, None] == right_labels[None, :]
    valid = np.ones_like(same)
    if side != "cross":
        # distinct unordered pairs only
        valid = np.triu(valid, k=1)
        labels, sizes = np.unique(left_labels, return_counts=True)
        if np.any(sizes < 2):
            raise ValueError(f"block {labels[sizes < 2][0]!r} has a single word; within-block distance is undefined")

    within = d2[same & valid]
    across = d2[~same & valid]
    if within.size == 0:
        raise ValueError("no within-block pairs")
    if across.size == 0:
        raise ValueError("no cross-block pairs; need at least two blocks")
    return float(within.mean()), float(across.mean())


def export_scaled(
    emb: EmbeddingSet, path: Union[str, Path], sigma: float, side: str = "phi"
) -> int:
    """write vectors multiplied by sigma; emb itself is left as is"""
    if not sigma > 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    words, vectors = export_vectors(emb, side)
    written = write_embeddings(path, words, vectors, scale=sigma)
    logger.info(f"✅ Exported {written} {side} vectors scaled by {sigma} to {path}")
    return written


class EmbeddingLookup:
    """Word -> vector table read from an embeddings file; unknown words get the <unk> vector."""

    def __init__(self, words: List[str], vectors: np.ndarray):
        self.words = list(words)
        self.vectors = np.asarray(vectors, dtype=np.float64)
        self.index = {w: i for i, w in enumerate(self.words)}

    @classmethod
    def load(cls, path: Union[str, Path]) -> "EmbeddingLookup":
        words, vectors = read_embeddings(path)
        return cls(words, vectors)

    def __contains__(self, word: str) -> bool:
        return word in self.index

    def __len__(self) -> int:
        return len(self.words)

    def lookup(self, word: str) -> np.ndarray:
        i = self.index.get(word)
        if i is None:
            i = self.index.get(UNK)
            if i is None:
                raise KeyError(f"{word!r} is not in the table and there is no {UNK} vector")
        return self.vectors[i]
