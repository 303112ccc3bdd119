"""
Spherical co-occurrence data embedding.

Word types x and substitutes y get unit vectors phi(x) and psi(y) in d
dimensions. The model is

    p(x, y) = p(x) p(y) exp(-|phi(x) - psi(y)|^2) / Z

Small instances are handled exactly (likelihood, gradient, full-batch
projected ascent). Corpus-sized instances use stochastic ascent with Z held
at a constant: every observed pair pulls its two vectors together and one
noise pair drawn from the product of the marginals pushes its vectors apart.
"""

import logging
import time
from collections import Counter
from pathlib import Path
from typing import Iterable, List, Optional, Tuple, Union

import numpy as np
from numba import njit, prange
from tqdm import tqdm

from subscode.errors import FormatError
from subscode.models.pipeline_types import CooccurrencePair, EmbeddingSet, EmpiricalDistribution, TrainConfig

logger = logging.getLogger(__name__)

# |X| * |Y| cells up to which the exact likelihood is reported during training
ENUMERABLE_LIMIT = 4_000_000
EXPORT_SIDES = ("phi", "psi", "concat")


# ---------------------------------------------------------------------------
# numba kernels
# ---------------------------------------------------------------------------


@njit(cache=True)
def _normalize_row(v):
    norm = 0.0
    for i in range(v.shape[0]):
        norm += v[i] * v[i]
    norm = np.sqrt(norm)
    if norm > 0.0:
        for i in range(v.shape[0]):
            v[i] /= norm


@njit(cache=True)
def _attract(phi, psi, x, y, step_x, step_y):
    d = phi.shape[1]
    for i in range(d):
        diff = psi[y, i] - phi[x, i]
        phi[x, i] += step_x * 2.0 * diff
        psi[y, i] -= step_y * 2.0 * diff
    _normalize_row(phi[x])
    _normalize_row(psi[y])


@njit(cache=True)
def _repel(phi, psi, x, y, step_x, step_y, inv_z):
    d = phi.shape[1]
    d2 = 0.0
    for i in range(d):
        diff = phi[x, i] - psi[y, i]
        d2 += diff * diff
    weight = inv_z * np.exp(-d2)
    for i in range(d):
        diff = phi[x, i] - psi[y, i]
        phi[x, i] += step_x * weight * diff
        psi[y, i] -= step_y * weight * diff
    _normalize_row(phi[x])
    _normalize_row(psi[y])


@njit(cache=True)
def _decayed(lambda0, nu, t):
    return lambda0 * nu / (nu + t)


@njit(cache=True)
def _train_epoch(phi, psi, pair_x, pair_y, visit, noise_x, noise_y, lambda0, nu, inv_z, seen_x, seen_y):
    for k in range(visit.shape[0]):
        i = visit[k]
        x = pair_x[i]
        y = pair_y[i]
        _attract(phi, psi, x, y, _decayed(lambda0, nu, seen_x[x]), _decayed(lambda0, nu, seen_y[y]))
        seen_x[x] += 1
        seen_y[y] += 1
        if inv_z > 0.0:
            xn = noise_x[k]
            yn = noise_y[k]
            _repel(phi, psi, xn, yn, _decayed(lambda0, nu, seen_x[xn]), _decayed(lambda0, nu, seen_y[yn]), inv_z)
            seen_x[xn] += 1
            seen_y[yn] += 1


@njit(parallel=True, cache=True)
def _train_epoch_parallel(phi, psi, pair_x, pair_y, visit, noise_x, noise_y, lambda0, nu, inv_z, seen_x, seen_y):
    # concurrent updates to a shared vector race; last write wins
    for k in prange(visit.shape[0]):
        i = visit[k]
        x = pair_x[i]
        y = pair_y[i]
        _attract(phi, psi, x, y, _decayed(lambda0, nu, seen_x[x]), _decayed(lambda0, nu, seen_y[y]))
        seen_x[x] += 1
        seen_y[y] += 1
        if inv_z > 0.0:
            xn = noise_x[k]
            yn = noise_y[k]
            _repel(phi, psi, xn, yn, _decayed(lambda0, nu, seen_x[xn]), _decayed(lambda0, nu, seen_y[yn]), inv_z)
            seen_x[xn] += 1
            seen_y[yn] += 1


# ---------------------------------------------------------------------------
# empirical distribution and geometry
# ---------------------------------------------------------------------------


def _ranked_words(counts: Counter) -> List[str]:
    return [w for w, _ in sorted(counts.items(), key=lambda item: (-item[1], item[0].encode("utf-8")))]


def empirical_marginals(pairs: Iterable[CooccurrencePair]) -> EmpiricalDistribution:
    """
    Count pairs into empirical marginal and joint frequencies

    Args:
        pairs: (x, y) co-occurrence pairs

    Returns:
        EmpiricalDistribution; ids on each side by descending count, ties by UTF-8 bytes
    """
    joint = Counter()
    for pair in pairs:
        joint[(pair.x, pair.y)] += 1
    if not joint:
        raise ValueError("cannot summarize an empty pair stream")

    x_counts = Counter()
    y_counts = Counter()
    for (x, y), c in joint.items():
        x_counts[x] += c
        y_counts[y] += c
    x_words = _ranked_words(x_counts)
    y_words = _ranked_words(y_counts)
    x_index = {w: i for i, w in enumerate(x_words)}
    y_index = {w: i for i, w in enumerate(y_words)}

    cells = sorted((x_index[x], y_index[y], c) for (x, y), c in joint.items())
    return EmpiricalDistribution(
        x_words=x_words,
        y_words=y_words,
        x_counts=np.array([x_counts[w] for w in x_words], dtype=np.float64),
        y_counts=np.array([y_counts[w] for w in y_words], dtype=np.float64),
        pair_x=np.array([x for x, _, _ in cells], dtype=np.int64),
        pair_y=np.array([y for _, y, _ in cells], dtype=np.int64),
        pair_counts=np.array([c for _, _, c in cells], dtype=np.float64),
        n=int(sum(joint.values())),
    )


def squared_distance(u: np.ndarray, v: np.ndarray) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    return float(np.sum((u - v) ** 2))


def project_to_sphere(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    norm = np.linalg.norm(v)
    if norm == 0.0:
        raise ValueError("cannot project the zero vector onto the sphere")
    return v / norm


def init_embeddings(x_words: List[str], y_words: List[str], d: int, seed: int) -> EmbeddingSet:
    """Gaussian draws normalized onto the unit sphere; uniform over directions."""
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    rng = np.random.default_rng(seed)
    phi = rng.standard_normal((len(x_words), d))
    psi = rng.standard_normal((len(y_words), d))
    phi /= np.linalg.norm(phi, axis=1, keepdims=True)
    psi /= np.linalg.norm(psi, axis=1, keepdims=True)
    return EmbeddingSet(list(x_words), list(y_words), phi, psi)


def _check_aligned(emb: EmbeddingSet, emp: EmpiricalDistribution):
    if emb.x_words != emp.x_words or emb.y_words != emp.y_words:
        raise ValueError("embedding word lists do not match the empirical distribution")


def _distance_matrix(phi: np.ndarray, psi: np.ndarray) -> np.ndarray:
    return (
        np.sum(phi * phi, axis=1)[:, None] + np.sum(psi * psi, axis=1)[None, :] - 2.0 * phi @ psi.T
    )


def _partition_terms(emb: EmbeddingSet, emp: EmpiricalDistribution):
    d2 = _distance_matrix(emb.phi, emb.psi)
    weights = emp.p_x[:, None] * emp.p_y[None, :] * np.exp(-d2)
    return d2, weights, weights.sum()


def exact_log_likelihood(emb: EmbeddingSet, emp: EmpiricalDistribution) -> float:
    """sum over pairs of p(x,y) log p(x,y) under the model, with Z summed exactly"""
    _check_aligned(emb, emp)
    d2, _, z = _partition_terms(emb, emp)
    x, y = emp.pair_x, emp.pair_y
    log_model = np.log(emp.p_x[x]) + np.log(emp.p_y[y]) - d2[x, y] - np.log(z)
    return float(np.sum(emp.p_xy * log_model))


def exact_gradient(emb: EmbeddingSet, emp: EmpiricalDistribution) -> Tuple[np.ndarray, np.ndarray]:
    """
    Gradient of exact_log_likelihood with respect to every phi and psi row

    attraction: sum_y p(x,y) 2 (psi(y) - phi(x))
    repulsion:  (2/Z) sum_y p(x) p(y) exp(-d2) (phi(x) - psi(y))
    and the mirror terms for psi.
    """
    _check_aligned(emb, emp)
    phi, psi = emb.phi, emb.psi
    _, weights, z = _partition_terms(emb, emp)

    observed = np.zeros_like(weights)
    np.add.at(observed, (emp.pair_x, emp.pair_y), emp.p_xy)

    grad_phi = 2.0 * (observed @ psi - observed.sum(axis=1)[:, None] * phi)
    grad_psi = 2.0 * (observed.T @ phi - observed.sum(axis=0)[:, None] * psi)
    grad_phi += (2.0 / z) * (weights.sum(axis=1)[:, None] * phi - weights @ psi)
    grad_psi += (2.0 / z) * (weights.sum(axis=0)[:, None] * psi - weights.T @ phi)
    return grad_phi, grad_psi


def tangent_component(gradient: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    """drop the radial part of each row of gradient"""
    radial = np.sum(gradient * vectors, axis=1, keepdims=True)
    return gradient - radial * vectors


def ascend_exact(
    emb: EmbeddingSet, emp: EmpiricalDistribution, step: float, iterations: int
) -> Tuple[EmbeddingSet, List[float]]:
    """
    Full-batch projected gradient ascent with the exact partition function

    Returns:
        final embeddings and the likelihood before each step plus after the last
    """
    if step <= 0:
        raise ValueError(f"step must be > 0, got {step}")
    current = emb.copy()
    history = [exact_log_likelihood(current, emp)]
    for _ in range(iterations):
        grad_phi, grad_psi = exact_gradient(current, emp)
        current.phi += step * grad_phi
        current.psi += step * grad_psi
        current.phi /= np.linalg.norm(current.phi, axis=1, keepdims=True)
        current.psi /= np.linalg.norm(current.psi, axis=1, keepdims=True)
        history.append(exact_log_likelihood(current, emp))
    return current, history


# ---------------------------------------------------------------------------
# stochastic training
# ---------------------------------------------------------------------------


def sgd_step(
    emb: EmbeddingSet,
    pair: Tuple[int, int],
    noise: Optional[Tuple[int, int]],
    step: float,
    z_constant: float,
) -> EmbeddingSet:
    """
    One stochastic update with the partition function held at z_constant

    Args:
        emb: current embeddings (left untouched)
        pair: observed (x id, y id); pulled together with force 2 step (psi - phi)
        noise: (x' id, y' id) drawn from the product of marginals; pushed apart
            with force step (1/z_constant) exp(-d2) (phi - psi). None skips it.
        step: learning rate for all four vectors

    Returns:
        updated copy, every touched vector back on the sphere
    """
    updated = emb.copy()
    x, y = pair
    _attract(updated.phi, updated.psi, int(x), int(y), float(step), float(step))
    if noise is not None:
        inv_z = 1.0 / z_constant
        if inv_z > 0.0:
            _repel(updated.phi, updated.psi, int(noise[0]), int(noise[1]), float(step), float(step), inv_z)
    return updated


def train(
    emp: EmpiricalDistribution,
    config: TrainConfig,
    init: Optional[EmbeddingSet] = None,
    progress: bool = True,
) -> EmbeddingSet:
    """
    Stochastic ascent over the pair multiset

    Pairs are visited in one seeded shuffle, repeated every epoch. Each pair
    gets one noise pair with x' ~ p(x) and y' ~ p(y) drawn independently.
    Every vector keeps its own update counter t and steps with
    lambda0 * nu / (nu + t).
    """
    start = time.time()
    # init_embeddings consumes default_rng(seed); the visit order and noise use a sibling stream
    rng = np.random.default_rng(np.random.SeedSequence([int(config.seed) & 0xFFFFFFFF, 1]))
    emb = init.copy() if init is not None else init_embeddings(emp.x_words, emp.y_words, config.d, config.seed)
    _check_aligned(emb, emp)

    pair_x = np.repeat(emp.pair_x, emp.pair_counts.astype(np.int64))
    pair_y = np.repeat(emp.pair_y, emp.pair_counts.astype(np.int64))
    visit = rng.permutation(pair_x.shape[0]).astype(np.int64)
    seen_x = np.zeros(len(emp.x_words), dtype=np.int64)
    seen_y = np.zeros(len(emp.y_words), dtype=np.int64)
    inv_z = 1.0 / config.z_constant
    kernel = _train_epoch_parallel if config.parallel else _train_epoch
    enumerable = len(emp.x_words) * len(emp.y_words) <= ENUMERABLE_LIMIT

    if enumerable:
        logger.info(f"🔍 exact log-likelihood at init: {exact_log_likelihood(emb, emp):.6f}")

    for epoch in tqdm(range(config.epochs), desc="scode epochs", disable=not progress):
        noise_x = rng.choice(len(emp.x_words), size=visit.shape[0], p=emp.p_x).astype(np.int64)
        noise_y = rng.choice(len(emp.y_words), size=visit.shape[0], p=emp.p_y).astype(np.int64)
        kernel(emb.phi, emb.psi, pair_x, pair_y, visit, noise_x, noise_y, config.lambda0, config.nu, inv_z, seen_x, seen_y)
        if enumerable and logger.isEnabledFor(logging.DEBUG):
            logger.debug(f"epoch {epoch + 1}/{config.epochs}: log-likelihood {exact_log_likelihood(emb, emp):.6f}")

    if enumerable:
        logger.info(f"✅ exact log-likelihood after training: {exact_log_likelihood(emb, emp):.6f}")
    logger.info(
        f"✅ Trained {len(emp.x_words)}x{len(emp.y_words)} embeddings (d={config.d}, "
        f"{config.epochs} epochs, {emp.n} pairs) in {time.time() - start:.2f}s"
    )
    return emb


# ---------------------------------------------------------------------------
# embeddings files
# ---------------------------------------------------------------------------


def write_embeddings(path: Union[str, Path], words: List[str], vectors: np.ndarray, scale: float = 1.0) -> int:
    """'count d' header, then 'word v1 ... vd' with 6 decimals"""
    vectors = np.asarray(vectors, dtype=np.float64) * scale
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"{len(words)} {vectors.shape[1]}\n")
        for word, row in zip(words, vectors):
            f.write(word + " " + " ".join(f"{v:.6f}" for v in row) + "\n")
    return len(words)


def read_embeddings(path: Union[str, Path]) -> Tuple[List[str], np.ndarray]:
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().split()
        if len(header) != 2:
            raise FormatError(path, 1, "expected a 'count dimension' header")
        try:
            count, d = int(header[0]), int(header[1])
        except ValueError:
            raise FormatError(path, 1, "header values must be integers")
        words = []
        vectors = np.zeros((count, d))
        for line_no, line in enumerate(f, 2):
            parts = line.rstrip("\n").split(" ")
            if len(parts) != d + 1:
                raise FormatError(path, line_no, f"expected a word and {d} values")
            if len(words) >= count:
                raise FormatError(path, line_no, f"more rows than the {count} declared")
            try:
                vectors[len(words)] = [float(v) for v in parts[1:]]
            except ValueError:
                raise FormatError(path, line_no, "vector values must be numbers")
            words.append(parts[0])
    if len(words) != count:
        raise FormatError(path, None, f"header declares {count} rows, found {len(words)}")
    return words, vectors


def export_vectors(emb: EmbeddingSet, side: str = "phi") -> Tuple[List[str], np.ndarray]:
    """
    Vectors to publish for each word

    phi: word-type vectors; psi: substitute vectors; concat: [phi ; psi] for
    words present on both sides.
    """
    if side == "phi":
        return list(emb.x_words), emb.phi
    if side == "psi":
        return list(emb.y_words), emb.psi
    if side == "concat":
        words = [w for w in emb.x_words if w in emb.y_index]
        dropped = len(emb.x_words) - len(words)
        if dropped:
            logger.warning(f"⚠️ {dropped} word types have no substitute vector and are left out of the concatenation")
        rows = np.hstack(
            [emb.phi[[emb.x_index[w] for w in words]], emb.psi[[emb.y_index[w] for w in words]]]
        )
        return words, rows
    raise ValueError(f"side must be one of {', '.join(EXPORT_SIDES)}, got {side!r}")


def save_embedding_set(emb: EmbeddingSet, phi_path: Union[str, Path], psi_path: Union[str, Path]):
    write_embeddings(phi_path, emb.x_words, emb.phi)
    write_embeddings(psi_path, emb.y_words, emb.psi)
    logger.info(f"✅ Saved phi to {phi_path} and psi to {psi_path}")


def load_embedding_set(phi_path: Union[str, Path], psi_path: Union[str, Path]) -> EmbeddingSet:
    x_words, phi = read_embeddings(phi_path)
    y_words, psi = read_embeddings(psi_path)
    return EmbeddingSet(x_words, y_words, phi, psi)
