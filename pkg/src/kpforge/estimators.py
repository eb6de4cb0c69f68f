"""Scikit-learn style estimators wrapping the pipeline stages.

These follow the fit/transform/predict conventions (plus ``get_params``
via ``BaseEstimator``) so the models compose with the wider ecosystem;
the heavy lifting lives in the functional modules.
"""

from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from kpforge import extractor as extractor_mod
from kpforge import reranker as reranker_mod
from kpforge.corpus import partition_keyphrases, tokenize
from kpforge.encoder import EncoderConfig
from kpforge.errors import DataError
from kpforge.evaluation import calibrate_threshold, evaluate_documents
from kpforge.mining import MinerConfig, mine_candidates
from kpforge.stem import stem_phrase
from kpforge.tagging import TagSetTable, tag_tokens
from kpforge.validation import coerce_documents, require_labels


def _miner_config(max_ngram: int, noun_only: bool) -> MinerConfig:
    table = TagSetTable.nouns_only() if noun_only else TagSetTable.default()
    return MinerConfig(max_ngram=max_ngram, table=table)


class CandidateMiner(TransformerMixin, BaseEstimator):
    """Stateless transformer from documents to candidate phrase lists."""

    def __init__(self, max_ngram: int = 6, noun_only: bool = False):
        self.max_ngram = max_ngram
        self.noun_only = noun_only

    def fit(self, X, y=None):
        self.n_features_in_ = 1
        return self

    def transform(self, X):
        config = _miner_config(self.max_ngram, self.noun_only)
        output = []
        for doc in coerce_documents(X):
            tokenized = tokenize(doc)
            tagged = tag_tokens(tokenized.tokens, doc.pre_tags)
            output.append(mine_candidates(tagged, config))
        return output


class ContrastiveKeyphraseExtractor(BaseEstimator):
    """Stage one: joint contrastive extraction and sequence generation.

    ``fit(X, y)`` expects documents plus gold keyphrase lists;
    ``predict`` returns the selected present keyphrases per document.
    """

    def __init__(
        self,
        embed_dim: int = 32,
        hidden_dim: int = 32,
        context_mixing: bool = True,
        max_ngram: int = 6,
        noun_only: bool = False,
        temperature: float = 0.1,
        contrastive_weight: float = 0.3,
        learning_rate: float = 0.05,
        warmup_fraction: float = 0.0,
        batch_size: int = 8,
        epochs: int = 10,
        patience: int = 10,
        validation_fraction: float = 0.1,
        min_predictions: int = 5,
        seed: int = 0,
    ):
        self.embed_dim = embed_dim
        self.hidden_dim = hidden_dim
        self.context_mixing = context_mixing
        self.max_ngram = max_ngram
        self.noun_only = noun_only
        self.temperature = temperature
        self.contrastive_weight = contrastive_weight
        self.learning_rate = learning_rate
        self.warmup_fraction = warmup_fraction
        self.batch_size = batch_size
        self.epochs = epochs
        self.patience = patience
        self.validation_fraction = validation_fraction
        self.min_predictions = min_predictions
        self.seed = seed

    def _split(self, documents):
        rng = np.random.default_rng(self.seed)
        order = rng.permutation(len(documents))
        n_val = min(
            max(1, math.ceil(self.validation_fraction * len(documents))),
            max(0, len(documents) - 1),
        )
        val_idx = set(order[:n_val].tolist())
        train = [documents[i] for i in range(len(documents)) if i not in val_idx]
        val = [documents[i] for i in sorted(val_idx)]
        return train, val

    def fit(self, X, y=None):
        documents = coerce_documents(X, y)
        require_labels(documents)
        train_docs, val_docs = self._split(documents)
        encoder_config = EncoderConfig(
            embed_dim=self.embed_dim,
            hidden_dim=self.hidden_dim,
            context_mixing=self.context_mixing,
            seed=self.seed,
        )
        train_config = extractor_mod.TrainConfig(
            temperature=self.temperature,
            contrastive_weight=self.contrastive_weight,
            learning_rate=self.learning_rate,
            warmup_fraction=self.warmup_fraction,
            batch_size=self.batch_size,
            epochs=self.epochs,
            patience=self.patience,
            seed=self.seed,
        )
        self.model_, self.history_ = extractor_mod.train_stage1(
            train_docs,
            encoder_config,
            _miner_config(self.max_ngram, self.noun_only),
            train_config,
            validation_documents=val_docs,
        )
        self.threshold_ = self._calibrate(val_docs or train_docs)
        return self

    def _calibrate(self, documents) -> float:
        scored_docs = []
        for doc in documents:
            tokenized = tokenize(doc)
            present, _ = partition_keyphrases(tokenized, doc.keyphrases)
            gold = {stem_phrase(p) for p in present}
            scored = extractor_mod.score_candidates(self.model_, doc)
            if scored and gold:
                scored_docs.append((scored, gold))
        if not scored_docs:
            return -1.0
        return calibrate_threshold(scored_docs)

    def predict_scored(self, X):
        check_is_fitted(self, "model_")
        return [
            extractor_mod.predict_present(
                self.model_, doc, self.threshold_, self.min_predictions
            )
            for doc in coerce_documents(X)
        ]

    def predict(self, X):
        return [[p.surface for p in doc] for doc in self.predict_scored(X)]

    def generate(self, X, beam_size: int = 50, max_len: int = 64):
        """Overgenerated absent-keyphrase candidate surfaces per document."""
        check_is_fitted(self, "model_")
        output = []
        for doc in coerce_documents(X):
            phrases, _ = reranker_mod.overgenerate_for_document(
                self.model_, doc, beam_size=beam_size, max_len=max_len
            )
            output.append([p.surface for p in phrases])
        return output

    def score(self, X, y=None):
        """Macro F1@5 of present-keyphrase predictions."""
        documents = coerce_documents(X, y)
        triples = []
        for doc, predicted in zip(documents, self.predict(documents)):
            tokenized = tokenize(doc)
            present, _ = partition_keyphrases(tokenized, doc.keyphrases)
            triples.append((doc.id, predicted, present))
        return evaluate_documents(triples).f1_at_5


class AbsentKeyphraseReranker(BaseEstimator):
    """Stage two: dual-encoder reranking of overgenerated candidates.

    Requires a fitted extractor (or one is fitted here from the same
    training data when an unfitted instance is supplied).
    """

    def __init__(
        self,
        extractor: ContrastiveKeyphraseExtractor | None = None,
        beam_size: int = 50,
        max_len: int = 64,
        temperature: float = 0.1,
        learning_rate: float = 0.05,
        warmup_fraction: float = 0.1,
        batch_size: int = 8,
        epochs: int = 10,
        min_predictions: int = 5,
        seed: int = 0,
    ):
        self.extractor = extractor
        self.beam_size = beam_size
        self.max_len = max_len
        self.temperature = temperature
        self.learning_rate = learning_rate
        self.warmup_fraction = warmup_fraction
        self.batch_size = batch_size
        self.epochs = epochs
        self.min_predictions = min_predictions
        self.seed = seed

    def fit(self, X, y=None):
        documents = coerce_documents(X, y)
        require_labels(documents)
        if self.extractor is None:
            raise DataError("AbsentKeyphraseReranker requires an extractor")
        extractor = self.extractor
        if not hasattr(extractor, "model_"):
            from sklearn.base import clone

            extractor = clone(extractor).fit(documents)
        self.extractor_ = extractor

        examples, self.n_excluded_ = reranker_mod.build_rerank_corpus(
            extractor.model_, documents, beam_size=self.beam_size, max_len=self.max_len
        )
        train_config = extractor_mod.TrainConfig(
            temperature=self.temperature,
            learning_rate=self.learning_rate,
            warmup_fraction=self.warmup_fraction,
            batch_size=self.batch_size,
            epochs=self.epochs,
            seed=self.seed,
        )
        self.model_, self.history_ = reranker_mod.train_stage2(
            examples,
            extractor.model_.vocab,
            extractor.model_.encoder_config,
            train_config,
        )
        self.threshold_ = self._calibrate(documents)
        return self

    def _calibrate(self, documents) -> float:
        scored_docs = []
        for doc in documents:
            tokenized = tokenize(doc)
            _, absent = partition_keyphrases(tokenized, doc.keyphrases)
            gold = {stem_phrase(p) for p in absent}
            if not gold:
                continue
            phrases, _ = reranker_mod.overgenerate_for_document(
                self.extractor_.model_, doc, self.beam_size, self.max_len
            )
            scored = reranker_mod.score_generated(
                self.model_, doc, [p.surface for p in phrases]
            )
            if scored:
                scored_docs.append((scored, gold))
        if not scored_docs:
            return -1.0
        return calibrate_threshold(scored_docs)

    def predict_scored(self, X):
        check_is_fitted(self, "model_")
        output = []
        for doc in coerce_documents(X):
            phrases, _ = reranker_mod.overgenerate_for_document(
                self.extractor_.model_, doc, self.beam_size, self.max_len
            )
            output.append(
                reranker_mod.predict_absent(
                    self.model_,
                    doc,
                    [p.surface for p in phrases],
                    self.threshold_,
                    self.min_predictions,
                )
            )
        return output

    def predict(self, X):
        return [[p.surface for p in doc] for doc in self.predict_scored(X)]


class KeyphrasePipeline(BaseEstimator):
    """Both stages end to end: fit trains extractor then reranker;
    predict returns {"present": [...], "absent": [...]} per document."""

    def __init__(
        self,
        extractor: ContrastiveKeyphraseExtractor | None = None,
        reranker: AbsentKeyphraseReranker | None = None,
    ):
        self.extractor = extractor
        self.reranker = reranker

    def fit(self, X, y=None):
        from sklearn.base import clone

        documents = coerce_documents(X, y)
        extractor = clone(self.extractor) if self.extractor is not None else (
            ContrastiveKeyphraseExtractor()
        )
        self.extractor_ = extractor.fit(documents)
        reranker = clone(self.reranker) if self.reranker is not None else (
            AbsentKeyphraseReranker()
        )
        reranker.extractor = self.extractor_
        self.reranker_ = reranker.fit(documents)
        return self

    def predict(self, X):
        check_is_fitted(self, "extractor_")
        documents = coerce_documents(X)
        present = self.extractor_.predict(documents)
        absent = self.reranker_.predict(documents)
        return [
            {"present": p, "absent": a} for p, a in zip(present, absent)
        ]
