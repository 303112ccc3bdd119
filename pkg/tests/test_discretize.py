import numpy as np
import pytest

from subscode.errors import FormatError
from subscode.models import CooccurrencePair, SubstituteDistribution
from subscode.services.discretize import (
    emit_pairs,
    pairs_from_substitutes,
    read_pairs,
    sample_substitutes,
    token_rng,
    write_pairs,
)
from tests.conftest import make_vocab


@pytest.fixture
def vocab():
    return make_vocab(["a", "b", "c"])


def dist(*entries, position=0):
    return SubstituteDistribution(position=position, entries=list(entries))


def test_point_mass(vocab):
    draws = sample_substitutes(dist((0, 1.0)), 5, token_rng(1, 0))
    assert draws.tolist() == [0] * 5


def test_sampling_frequency_concentrates():
    draws = sample_substitutes(dist((0, 0.75), (1, 0.25)), 100000, token_rng(42, 0))
    assert np.mean(draws == 0) == pytest.approx(0.75, abs=0.01)


def test_three_entry_frequencies_match_probabilities():
    probs = np.array([0.5, 0.3, 0.2])
    draws = sample_substitutes(dist((0, 0.5), (1, 0.3), (2, 0.2)), 100000, token_rng(7, 0))
    observed = np.bincount(draws, minlength=3)

    np.testing.assert_allclose(observed / draws.size, probs, atol=0.01)
    expected = probs * draws.size
    chi2 = float(np.sum((observed - expected) ** 2 / expected))
    # 2 degrees of freedom, p = 0.001
    assert chi2 < 13.82


def test_draws_follow_distribution_across_tokens():
    d = dist((2, 0.6), (0, 0.25), (1, 0.15))
    observed = np.zeros(3)
    for index in range(500):
        observed += np.bincount(sample_substitutes(d, 100, token_rng(3, index)), minlength=3)
    expected = np.array([0.25, 0.15, 0.6]) * observed.sum()
    assert float(np.sum((observed - expected) ** 2 / expected)) < 13.82


def test_same_seed_same_draws():
    d = dist((0, 0.5), (1, 0.3), (2, 0.2))
    first = sample_substitutes(d, 50, token_rng(9, 3))
    second = sample_substitutes(d, 50, token_rng(9, 3))
    assert first.tolist() == second.tolist()
    other = sample_substitutes(d, 50, token_rng(9, 4))
    assert first.tolist() != other.tolist()


def test_rejects_unnormalized_or_empty():
    with pytest.raises(ValueError, match="not normalized"):
        sample_substitutes(dist((0, 0.5), (1, 0.2)), 3, token_rng(0, 0))
    with pytest.raises(ValueError):
        sample_substitutes(dist(), 3, token_rng(0, 0))
    with pytest.raises(ValueError):
        sample_substitutes(dist((0, 1.0)), 0, token_rng(0, 0))


def test_tolerates_rounded_probabilities():
    draws = sample_substitutes(dist((0, 0.333333), (1, 0.333333), (2, 0.333333)), 10, token_rng(0, 0))
    assert set(draws.tolist()) <= {0, 1, 2}


def test_emit_pairs_counts_and_layout(vocab):
    words = ["a", "b", "a"]
    dists = [dist((1, 0.6), (2, 0.4)), dist((0, 1.0)), dist((2, 1.0))]
    pairs = list(emit_pairs(words, dists, 4, seed=3, vocab=vocab))

    assert len(pairs) == 12
    assert [p.x for p in pairs] == ["a"] * 4 + ["b"] * 4 + ["a"] * 4
    assert all(p.y in ("b", "c") for p in pairs[:4])
    assert pairs[4:8] == [CooccurrencePair("b", "a")] * 4
    assert pairs[8:] == [CooccurrencePair("a", "c")] * 4


def test_emit_pairs_is_deterministic(vocab):
    words = ["a", "b", "c"] * 5
    dists = [dist((0, 0.4), (1, 0.3), (2, 0.3), position=i) for i in range(15)]
    first = list(emit_pairs(words, dists, 7, seed=11, vocab=vocab))
    second = list(emit_pairs(words, dists, 7, seed=11, vocab=vocab))
    assert first == second


def test_emit_pairs_length_mismatch(vocab):
    with pytest.raises(ValueError, match="token 1"):
        list(emit_pairs(["a", "b"], [dist((0, 1.0))], 2, seed=0, vocab=vocab))
    with pytest.raises(ValueError):
        list(emit_pairs(["a"], [dist((0, 1.0)), dist((1, 1.0))], 2, seed=0, vocab=vocab))


def test_substitute_stream_replays_flat_emission(vocab):
    sentences = [
        [("a", dist((0, 0.5), (1, 0.5))), ("b", dist((1, 0.2), (2, 0.8)))],
        [("c", dist((0, 0.1), (2, 0.9)))],
    ]
    flat = [token for sentence in sentences for token in sentence]
    expected = list(emit_pairs([w for w, _ in flat], [d for _, d in flat], 6, seed=5, vocab=vocab))
    assert list(pairs_from_substitutes(sentences, 6, seed=5, vocab=vocab)) == expected


def test_pairs_file(tmp_path):
    pairs = [CooccurrencePair("the", "a"), CooccurrencePair("cat", "dog")]
    path = tmp_path / "pairs.tsv"
    assert write_pairs(path, pairs) == 2
    assert path.read_text(encoding="utf-8") == "the\ta\ncat\tdog\n"
    assert list(read_pairs(path)) == pairs


def test_read_pairs_reports_bad_line(tmp_path):
    path = tmp_path / "pairs.tsv"
    path.write_text("the\ta\nbroken\n", encoding="utf-8")
    with pytest.raises(FormatError) as excinfo:
        list(read_pairs(path))
    assert excinfo.value.line == 2
