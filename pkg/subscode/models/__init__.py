from subscode.models.pipeline_types import (
    BOS,
    EOS,
    UNK,
    ContextWindow,
    CooccurrencePair,
    CorpusStatistics,
    CountTable,
    EmbeddingSet,
    EmpiricalDistribution,
    NeighborList,
    SubstituteDistribution,
    TrainConfig,
    Vocabulary,
)

__all__ = [
    "BOS",
    "EOS",
    "UNK",
    "ContextWindow",
    "CooccurrencePair",
    "CorpusStatistics",
    "CountTable",
    "EmbeddingSet",
    "EmpiricalDistribution",
    "NeighborList",
    "SubstituteDistribution",
    "TrainConfig",
    "Vocabulary",
]
