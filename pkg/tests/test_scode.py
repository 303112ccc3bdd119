import logging
import math
from collections import Counter

import numpy as np
import pytest

from subscode.errors import ConfigError, FormatError
from subscode.models import CooccurrencePair, EmbeddingSet, TrainConfig
from subscode.services import scode
from subscode.services.evaluation import block_separation
from subscode.services.scode import (
    ascend_exact,
    empirical_marginals,
    exact_gradient,
    exact_log_likelihood,
    export_vectors,
    init_embeddings,
    load_embedding_set,
    project_to_sphere,
    read_embeddings,
    save_embedding_set,
    sgd_step,
    squared_distance,
    tangent_component,
    train,
    write_embeddings,
)

BLOCKS = {"x1": 0, "x2": 0, "x3": 1, "x4": 1, "y1": 0, "y2": 0, "y3": 1, "y4": 1}


def pairs_of(*cells):
    return [CooccurrencePair(x, y) for x, y in cells]


def random_empirical(seed, nx=3, ny=4, n=60):
    rng = np.random.default_rng(seed)
    xs = [f"x{i}" for i in range(nx)]
    ys = [f"y{i}" for i in range(ny)]
    pairs = [CooccurrencePair(xs[i], ys[j]) for i, j in zip(rng.integers(nx, size=n), rng.integers(ny, size=n))]
    return empirical_marginals(pairs)


def block_pairs():
    cells = []
    for x, y in [("x1", "y1"), ("x1", "y2"), ("x2", "y1"), ("x2", "y2"), ("x3", "y3"), ("x3", "y4"), ("x4", "y3"), ("x4", "y4")]:
        cells += [(x, y)] * 1250
    return pairs_of(*cells)


def test_marginals_single_pair():
    emp = empirical_marginals(pairs_of(("a", "b")))
    assert emp.p_x.tolist() == [1.0]
    assert emp.p_y.tolist() == [1.0]
    assert emp.joint() == {("a", "b"): 1.0}


def test_marginals_ranked_by_count_then_bytes():
    emp = empirical_marginals(pairs_of(("b", "y"), ("a", "y"), ("c", "z"), ("c", "y")))
    assert emp.x_words == ["c", "a", "b"]
    assert emp.y_words == ["y", "z"]
    assert emp.p_y.tolist() == [0.75, 0.25]


def test_marginals_match_direct_counts():
    rng = np.random.default_rng(0)
    words = [f"w{i}" for i in range(30)]
    pairs = [CooccurrencePair(words[i], words[j]) for i, j in rng.integers(30, size=(20000, 2))]
    emp = empirical_marginals(pairs)

    x_counts = Counter(p.x for p in pairs)
    joint = emp.joint()
    for w in emp.x_words:
        assert emp.p_x[emp.x_index[w]] == pytest.approx(x_counts[w] / len(pairs), abs=1e-12)
        assert sum(p for (x, _), p in joint.items() if x == w) == pytest.approx(emp.p_x[emp.x_index[w]], abs=1e-12)
    assert emp.p_x.sum() == pytest.approx(1.0, abs=1e-12)
    assert emp.p_y.sum() == pytest.approx(1.0, abs=1e-12)
    assert emp.joint_matrix().sum() == pytest.approx(1.0, abs=1e-12)


def test_marginals_reject_empty_stream():
    with pytest.raises(ValueError):
        empirical_marginals([])


def test_squared_distance_and_projection():
    assert squared_distance([1.0, 0.0], [0.0, 1.0]) == pytest.approx(2.0)
    assert squared_distance([1.0, 0.0], [-1.0, 0.0]) == pytest.approx(4.0)
    assert project_to_sphere(np.array([3.0, 4.0])).tolist() == pytest.approx([0.6, 0.8])
    with pytest.raises(ValueError):
        project_to_sphere(np.zeros(3))
    with pytest.raises(ValueError):
        squared_distance([1.0], [1.0, 0.0])


def test_init_embeddings_are_unit_and_seeded():
    first = init_embeddings(["a", "b", "c"], ["d", "e"], 7, seed=3)
    second = init_embeddings(["a", "b", "c"], ["d", "e"], 7, seed=3)
    assert first.phi.shape == (3, 7) and first.psi.shape == (2, 7)
    assert first.max_norm_error() < 1e-12
    np.testing.assert_array_equal(first.phi, second.phi)
    assert not np.array_equal(first.phi, init_embeddings(["a", "b", "c"], ["d", "e"], 7, seed=4).phi)


def test_likelihood_with_collapsed_vectors():
    emp = empirical_marginals(pairs_of(("a", "c"), ("a", "d"), ("b", "c"), ("b", "d")))
    point = np.array([[1.0, 0.0], [1.0, 0.0]])
    emb = EmbeddingSet(emp.x_words, emp.y_words, point, point.copy())
    assert exact_log_likelihood(emb, emp) == pytest.approx(math.log(0.25), abs=1e-6)
    assert exact_log_likelihood(emb, emp) == pytest.approx(-1.386294, abs=1e-6)


@pytest.mark.parametrize("seed", range(5))
def test_likelihood_never_exceeds_negative_entropy(seed):
    emp = random_empirical(seed)
    emb = init_embeddings(emp.x_words, emp.y_words, 3, seed)
    bound = float(np.sum(emp.p_xy * np.log(emp.p_xy)))
    assert exact_log_likelihood(emb, emp) <= bound + 1e-12


def finite_difference(emb, emp, h=1e-6):
    grads = []
    for name in ("phi", "psi"):
        matrix = getattr(emb, name)
        grad = np.zeros_like(matrix)
        for i in range(matrix.shape[0]):
            for j in range(matrix.shape[1]):
                original = matrix[i, j]
                matrix[i, j] = original + h
                up = exact_log_likelihood(emb, emp)
                matrix[i, j] = original - h
                down = exact_log_likelihood(emb, emp)
                matrix[i, j] = original
                grad[i, j] = (up - down) / (2 * h)
        grads.append(grad)
    return grads


def gradient_instances():
    """100 instances: 50 seeded shapes with |X|, |Y| in 2..6, each at d = 2 and d = 5"""
    for seed in range(50):
        nx, ny = (int(v) for v in np.random.default_rng(1000 + seed).integers(2, 7, size=2))
        for d in (2, 5):
            yield pytest.param(seed, nx, ny, d, id=f"{seed}-{nx}x{ny}-d{d}")


@pytest.mark.parametrize("seed, nx, ny, d", gradient_instances())
def test_gradient_matches_finite_differences(seed, nx, ny, d):
    emp = random_empirical(seed, nx=nx, ny=ny)
    emb = init_embeddings(emp.x_words, emp.y_words, d, seed)
    grad_phi, grad_psi = exact_gradient(emb, emp)
    fd_phi, fd_psi = finite_difference(emb, emp)

    for exact, numeric, vectors in ((grad_phi, fd_phi, emb.phi), (grad_psi, fd_psi, emb.psi)):
        exact_t = tangent_component(exact, vectors)
        numeric_t = tangent_component(numeric, vectors)
        assert np.linalg.norm(exact_t - numeric_t) <= 1e-4 * np.linalg.norm(numeric_t)
        np.testing.assert_allclose(exact, numeric, rtol=1e-4, atol=1e-8)


def test_single_cell_gradient_is_zero():
    emp = empirical_marginals(pairs_of(("a", "b")))
    emb = EmbeddingSet(emp.x_words, emp.y_words, np.array([[1.0, 0.0]]), np.array([[0.0, 1.0]]))
    grad_phi, grad_psi = exact_gradient(emb, emp)
    np.testing.assert_allclose(grad_phi, 0.0, atol=1e-12)
    np.testing.assert_allclose(grad_psi, 0.0, atol=1e-12)
    assert exact_log_likelihood(emb, emp) == pytest.approx(0.0, abs=1e-12)


def test_tangent_component_is_orthogonal():
    vectors = init_embeddings(["a", "b"], ["c"], 4, seed=0).phi
    gradient = np.random.default_rng(1).standard_normal((2, 4))
    tangent = tangent_component(gradient, vectors)
    np.testing.assert_allclose(np.sum(tangent * vectors, axis=1), 0.0, atol=1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_exact_ascent_never_decreases_likelihood(seed):
    emp = random_empirical(seed, nx=4, ny=4, n=80)
    emb = init_embeddings(emp.x_words, emp.y_words, 3, seed)
    final, history = ascend_exact(emb, emp, step=0.01, iterations=500)

    assert len(history) == 501
    assert np.all(np.diff(history) >= -1e-10)
    assert history[-1] > history[0]
    assert final.max_norm_error() < 1e-12
    np.testing.assert_array_equal(emb.phi, init_embeddings(emp.x_words, emp.y_words, 3, seed).phi)


def test_sgd_step_with_zero_rate_changes_nothing():
    emb = init_embeddings(["a", "b"], ["c", "d"], 5, seed=0)
    updated = sgd_step(emb, (0, 1), (1, 0), step=0.0, z_constant=0.166)
    np.testing.assert_allclose(updated.phi, emb.phi, atol=1e-12)
    np.testing.assert_allclose(updated.psi, emb.psi, atol=1e-12)


def test_sgd_step_keeps_vectors_on_sphere_and_input_untouched():
    emb = init_embeddings(["a", "b"], ["c", "d"], 5, seed=0)
    before = emb.copy()
    updated = sgd_step(emb, (0, 1), (1, 0), step=0.3, z_constant=0.166)
    assert updated.max_norm_error() < 1e-12
    np.testing.assert_array_equal(emb.phi, before.phi)
    np.testing.assert_array_equal(emb.psi, before.psi)
    assert not np.allclose(updated.phi, emb.phi)


def test_sgd_step_noise_pushes_apart():
    phi = np.array([[1.0, 0.0]])
    psi = np.array([[math.cos(0.5), math.sin(0.5)]])
    emb = EmbeddingSet(["a"], ["b"], phi, psi)
    pushed = sgd_step(emb, (0, 0), (0, 0), step=0.0, z_constant=0.166)
    assert squared_distance(pushed.phi[0], pushed.psi[0]) == pytest.approx(squared_distance(phi[0], psi[0]))
    pulled = sgd_step(EmbeddingSet(["a"], ["b"], phi, psi), (0, 0), None, step=0.1, z_constant=0.166)
    both = sgd_step(EmbeddingSet(["a"], ["b"], phi, psi), (0, 0), (0, 0), step=0.1, z_constant=0.166)
    assert squared_distance(both.phi[0], both.psi[0]) > squared_distance(pulled.phi[0], pulled.psi[0])


def test_repeated_pair_converges():
    emb = init_embeddings(["a"], ["b"], 3, seed=5)
    for _ in range(200):
        emb = sgd_step(emb, (0, 0), None, step=0.1, z_constant=math.inf)
    assert squared_distance(emb.phi[0], emb.psi[0]) < 0.01


def test_repeated_pair_converges_while_noise_repels_others():
    emb = init_embeddings(["a", "c"], ["b", "d"], 3, seed=5)
    apart = squared_distance(emb.phi[1], emb.psi[1])
    for _ in range(1000):
        emb = sgd_step(emb, (0, 0), (1, 1), step=0.1, z_constant=0.166)
    assert squared_distance(emb.phi[0], emb.psi[0]) < 0.01
    assert squared_distance(emb.phi[1], emb.psi[1]) > apart
    assert emb.max_norm_error() < 1e-12


def test_self_noise_settles_where_pull_and_push_balance():
    # with step 0.1 and Z = 0.166 the attract/repel cycle has a fixed point at d2 ~ 1.301
    emb = init_embeddings(["a"], ["b"], 3, seed=5)
    for _ in range(1000):
        emb = sgd_step(emb, (0, 0), (0, 0), step=0.1, z_constant=0.166)
    assert squared_distance(emb.phi[0], emb.psi[0]) == pytest.approx(1.301, abs=0.02)


def test_train_without_epochs_returns_init():
    emp = random_empirical(0)
    init = init_embeddings(emp.x_words, emp.y_words, 4, seed=2)
    trained = train(emp, TrainConfig(d=4, epochs=0, seed=2), init=init, progress=False)
    np.testing.assert_array_equal(trained.phi, init.phi)
    np.testing.assert_array_equal(trained.psi, init.psi)


def test_train_rejects_misaligned_init():
    emp = random_empirical(0)
    init = init_embeddings(["other"], emp.y_words, 4, seed=2)
    with pytest.raises(ValueError):
        train(emp, TrainConfig(d=4, epochs=1), init=init, progress=False)


def test_train_is_deterministic():
    emp = random_empirical(3, n=500)
    config = TrainConfig(d=5, epochs=3, seed=11)
    first = train(emp, config, progress=False)
    second = train(emp, config, progress=False)
    np.testing.assert_array_equal(first.phi, second.phi)
    np.testing.assert_array_equal(first.psi, second.psi)
    assert first.max_norm_error() < 1e-9


@pytest.mark.parametrize("level, evaluations", [(logging.INFO, 2), (logging.DEBUG, 7)])
def test_per_epoch_likelihood_only_when_debugging(monkeypatch, caplog, level, evaluations):
    calls = []
    original = scode.exact_log_likelihood

    def counted(emb, emp):
        calls.append(1)
        return original(emb, emp)

    monkeypatch.setattr(scode, "exact_log_likelihood", counted)
    caplog.set_level(level, logger=scode.__name__)
    train(random_empirical(0), TrainConfig(d=3, epochs=5, seed=1), progress=False)
    assert len(calls) == evaluations


def test_long_training_run_stays_on_sphere():
    emp = random_empirical(6, nx=6, ny=6, n=10000)
    emb = train(emp, TrainConfig(d=5, epochs=100, seed=6), progress=False)
    assert emp.n * 100 >= 10**6
    np.testing.assert_allclose(np.linalg.norm(emb.phi, axis=1), 1.0, atol=1e-6)
    np.testing.assert_allclose(np.linalg.norm(emb.psi, axis=1), 1.0, atol=1e-6)


@pytest.mark.parametrize("seed", range(10))
def test_train_recovers_blocks(seed):
    emp = empirical_marginals(block_pairs())
    emb = train(emp, TrainConfig(d=2, seed=seed), progress=False)
    within, cross = block_separation(emb, BLOCKS, side="cross")
    assert within + 0.5 <= cross


def test_train_config_validation_names_key():
    with pytest.raises(ConfigError, match="scode.d"):
        TrainConfig(d=0)
    with pytest.raises(ConfigError, match="scode.z_constant"):
        TrainConfig(z_constant=0.0)
    with pytest.raises(ConfigError, match="scode.epochs"):
        TrainConfig(epochs=-1)


def test_embeddings_file_round_trip(tmp_path):
    emb = init_embeddings(["a", "b"], ["c", "d", "e"], 4, seed=0)
    phi_path, psi_path = tmp_path / "emb.txt", tmp_path / "emb.psi.txt"
    save_embedding_set(emb, phi_path, psi_path)

    assert phi_path.read_text(encoding="utf-8").splitlines()[0] == "2 4"
    loaded = load_embedding_set(phi_path, psi_path)
    assert loaded.x_words == emb.x_words and loaded.y_words == emb.y_words
    np.testing.assert_allclose(loaded.phi, emb.phi, atol=1e-6)
    np.testing.assert_allclose(loaded.psi, emb.psi, atol=1e-6)


def test_read_embeddings_rejects_bad_files(tmp_path):
    path = tmp_path / "emb.txt"
    path.write_text("2 2\na 0.1 0.2\n", encoding="utf-8")
    with pytest.raises(FormatError, match="declares 2"):
        read_embeddings(path)

    path.write_text("1 2\na 0.1\n", encoding="utf-8")
    with pytest.raises(FormatError) as excinfo:
        read_embeddings(path)
    assert excinfo.value.line == 2


def test_export_vectors_sides():
    emb = init_embeddings(["a", "b"], ["b", "c"], 3, seed=0)
    words, rows = export_vectors(emb, "concat")
    assert words == ["b"]
    assert rows.shape == (1, 6)
    np.testing.assert_array_equal(rows[0, :3], emb.phi[1])
    np.testing.assert_array_equal(rows[0, 3:], emb.psi[0])
    assert export_vectors(emb, "psi")[0] == ["b", "c"]
    with pytest.raises(ValueError):
        export_vectors(emb, "both")


def test_written_values_have_six_decimals(tmp_path):
    path = tmp_path / "emb.txt"
    write_embeddings(path, ["a"], np.array([[0.6, 0.8]]), scale=0.1)
    assert path.read_text(encoding="utf-8") == "1 2\na 0.060000 0.080000\n"
