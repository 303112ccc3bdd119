import pytest

from subscode.config.settings import settings
from subscode.models import Vocabulary
from subscode.services.corpus import apply_vocabulary, build_vocabulary, tokenize_line
from subscode.services.ngram import count_ngrams, estimate_kn
from subscode.services.sample_corpus import generate_sentences


@pytest.fixture(autouse=True)
def no_ledger(monkeypatch):
    """keep test runs out of the default sqlite ledger"""
    monkeypatch.setattr(settings, "DATABASE_URL", "")


def make_vocab(words, count=10, unk_count=0):
    return Vocabulary.from_ranked([(w, count) for w in words], unk_count)


def encode(lines, vocab):
    return [apply_vocabulary(tokenize_line(line), vocab) for line in lines]


def train_kn(lines, order, min_count=1):
    vocab = build_vocabulary(lines, min_count=min_count)
    return estimate_kn(count_ngrams(encode(lines, vocab), order, vocab))


@pytest.fixture(scope="session")
def desk_lines():
    return list(generate_sentences(300, seed=7))


@pytest.fixture(scope="session")
def desk_model(desk_lines):
    """4-gram KN model over a small synthetic corpus"""
    return train_kn(desk_lines, order=4, min_count=2)
