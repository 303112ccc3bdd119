"""
subscode: word embeddings from substitute distributions

a complete induction pipeline supporting:
- corpus cleaning and vocabulary building with rare-word replacement
- interpolated kneser-ney n-gram models with arpa import/export
- top-k substitute distributions with exact pruned search
- sampling substitutes into co-occurrence pairs
- spherical co-occurrence embeddings (exact and stochastic training)
- nearest neighbors, block separation and scaled export
"""

__version__ = "0.1.0"

# Import main classes for easy access
from .database import RunLedger
from .models import EmbeddingSet, TrainConfig, Vocabulary
from .services.ngram import NgramModel

__all__ = [
    "EmbeddingSet",
    "NgramModel",
    "RunLedger",
    "TrainConfig",
    "Vocabulary",
]
