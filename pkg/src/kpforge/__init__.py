"""Two-stage contrastive keyphrase extraction and generation toolkit."""

__version__ = "0.1.0"

from kpforge.corpus import (
    CorpusStats,
    LabeledDocument,
    TokenizedDocument,
    corpus_stats,
    load_corpus,
    partition_keyphrases,
    tokenize,
    tokenize_text,
)
from kpforge.errors import DataError, KpforgeError, NumericError, UsageError
from kpforge.stem import stem_phrase, stem_word

__all__ = [
    "CorpusStats",
    "DataError",
    "KpforgeError",
    "LabeledDocument",
    "NumericError",
    "TokenizedDocument",
    "UsageError",
    "__version__",
    "corpus_stats",
    "load_corpus",
    "partition_keyphrases",
    "stem_phrase",
    "stem_word",
    "tokenize",
    "tokenize_text",
]
