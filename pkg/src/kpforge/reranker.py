"""Second-stage reranking of overgenerated absent-keyphrase candidates.

Two independent encoders (document side and phrase side, shared
vocabulary only) are trained contrastively: candidates whose stemmed
form matches a gold absent keyphrase are pulled toward their document,
the rest of the generated candidates are pushed away.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from kpforge import autodiff as ad
from kpforge.corpus import LabeledDocument, partition_keyphrases, tokenize, tokenize_text
from kpforge.encoder import EncoderConfig, TextEncoder, cosine_rows_t, init_encoder_params
from kpforge.errors import DataError, NumericError
from kpforge.extractor import (
    ScoredPhrase,
    Stage1Model,
    TrainConfig,
    contrastive_loss_t,
)
from kpforge.generator import GruBeamDecoder, beam_search, beams_to_phrases
from kpforge.optim import AdamW, LinearSchedule
from kpforge.stem import stem_phrase
from kpforge.vocab import Vocabulary


@dataclass
class RerankExample:
    """One training document: generated candidates plus a positive mask
    marking stem matches against the gold absent keyphrases."""

    doc_id: str
    doc_tokens: list[str]
    candidates: list[str]
    positive_mask: list[bool]

    def __post_init__(self) -> None:
        if len(self.candidates) != len(self.positive_mask):
            raise DataError("candidate/mask length mismatch")


def overgenerate_for_document(
    model: Stage1Model, doc: LabeledDocument, beam_size: int = 50, max_len: int = 64
):
    """Beam-decode a document and return (unique phrases, raw beams)."""
    tokenized = tokenize(doc)
    encoder = model.encoder()
    encoded = encoder.encode_tokens(tokenized.tokens)
    adapter = GruBeamDecoder(model.decoder(), encoded.doc_vector)
    beams = beam_search(adapter, beam_size=beam_size, max_len=max_len)
    return beams_to_phrases(beams, model.vocab), beams


def build_rerank_corpus(
    model: Stage1Model, documents, beam_size: int = 50, max_len: int = 64
) -> tuple[list[RerankExample], int]:
    """Overgenerate per document and keep those with at least one
    correctly generated absent keyphrase; returns (examples, n_excluded)."""
    examples: list[RerankExample] = []
    excluded = 0
    for doc in documents:
        tokenized = tokenize(doc)
        _, absent = partition_keyphrases(tokenized, doc.keyphrases)
        absent_stems = {stem_phrase(p) for p in absent}
        phrases, _ = overgenerate_for_document(model, doc, beam_size, max_len)
        if not phrases:
            excluded += 1
            continue
        mask = [p.stemmed in absent_stems for p in phrases]
        if not any(mask):
            excluded += 1
            continue
        examples.append(
            RerankExample(
                doc_id=doc.id,
                doc_tokens=list(tokenized.tokens),
                candidates=[p.surface for p in phrases],
                positive_mask=mask,
            )
        )
    return examples, excluded


@dataclass
class RerankerModel:
    """Dual-encoder scorer: document-side and phrase-side parameters are
    disjoint; only the vocabulary is shared."""

    vocab: Vocabulary
    encoder_config: EncoderConfig
    params: dict[str, ad.Tensor]

    def doc_encoder(self) -> TextEncoder:
        return TextEncoder(self.encoder_config, self.vocab, self.params, prefix="docside_")

    def phrase_encoder(self) -> TextEncoder:
        return TextEncoder(self.encoder_config, self.vocab, self.params, prefix="phrase_")


def build_reranker(
    vocab: Vocabulary, encoder_config: EncoderConfig, seed: int | None = None
) -> RerankerModel:
    rng = np.random.default_rng(encoder_config.seed if seed is None else seed)
    params = init_encoder_params(encoder_config, len(vocab), rng, prefix="docside_")
    params.update(init_encoder_params(encoder_config, len(vocab), rng, prefix="phrase_"))
    return RerankerModel(vocab, encoder_config, params)


def _similarities_t(
    model: RerankerModel, doc_tokens, candidates
) -> ad.Tensor:
    """(n,) cosine similarities between the document and each candidate,
    both encoded in isolation by their own encoders."""
    doc_encoder = model.doc_encoder()
    phrase_encoder = model.phrase_encoder()

    doc_ids = model.vocab.encode(doc_tokens)
    encoded_doc = doc_encoder.encode_ids_t(doc_ids)
    z_doc = doc_encoder.project_doc_t(doc_encoder.doc_row_t(encoded_doc))

    rows = []
    for candidate in candidates:
        tokens = tokenize_text(candidate)
        encoded = phrase_encoder.encode_ids_t(model.vocab.encode(tokens))
        rows.append(phrase_encoder.doc_row_t(encoded))
    phrase_matrix = ad.concat_rows(rows)
    z_phrases = phrase_encoder.project_phrases_t(phrase_matrix)
    return cosine_rows_t(z_phrases, z_doc)


def train_stage2(
    examples, vocab: Vocabulary, encoder_config: EncoderConfig, config: TrainConfig
) -> tuple[RerankerModel, list]:
    """Contrastive training of the dual encoder over generated candidates."""
    from kpforge.extractor import TrainHistoryRow

    examples = list(examples)
    if not examples:
        raise DataError("reranker training requires a non-empty corpus")
    model = build_reranker(vocab, encoder_config, seed=config.seed)

    rng = np.random.default_rng(config.seed)
    steps_per_epoch = max(1, math.ceil(len(examples) / config.batch_size))
    schedule = LinearSchedule(
        config.learning_rate, config.epochs * steps_per_epoch, config.warmup_fraction
    )
    optimizer = AdamW(
        model.params,
        lr=config.learning_rate,
        weight_decay=config.weight_decay,
        max_grad_norm=config.max_grad_norm,
    )

    history: list[TrainHistoryRow] = []
    step = 0
    for _ in range(config.epochs):
        order = rng.permutation(len(examples))
        for batch_start in range(0, len(examples), config.batch_size):
            batch = [examples[i] for i in order[batch_start : batch_start + config.batch_size]]
            optimizer.zero_grad()
            total = ad.Tensor(0.0)
            cl_sum = 0.0
            for example in batch:
                sims = _similarities_t(model, example.doc_tokens, example.candidates)
                positives = [i for i, m in enumerate(example.positive_mask) if m]
                negatives = [i for i, m in enumerate(example.positive_mask) if not m]
                term = contrastive_loss_t(
                    sims, positives, negatives, config.temperature
                )
                total = total + term
                cl_sum += term.item()
            total = total * (1.0 / len(batch))
            if not math.isfinite(total.item()):
                raise NumericError(f"non-finite reranker loss at step {step}")
            if total.requires_grad:
                total.backward()
                optimizer.clip_gradients()
                optimizer.step(lr=schedule.lr_at(step))
            history.append(TrainHistoryRow(step, 0.0, cl_sum / len(batch)))
            step += 1
    return model, history


def save_reranker(path, model: RerankerModel, fingerprint: str) -> None:
    from kpforge.checkpoint import save_checkpoint

    config = {
        "embed_dim": model.encoder_config.embed_dim,
        "hidden_dim": model.encoder_config.hidden_dim,
        "context_mixing": model.encoder_config.context_mixing,
        "seed": model.encoder_config.seed,
    }
    save_checkpoint(path, "reranker", model.params, model.vocab, fingerprint, config)


def load_reranker(path) -> RerankerModel:
    from kpforge.checkpoint import load_checkpoint, params_as_tensors

    loaded = load_checkpoint(path, expected_kind="reranker")
    cfg = loaded.config
    encoder_config = EncoderConfig(
        embed_dim=cfg["embed_dim"],
        hidden_dim=cfg["hidden_dim"],
        context_mixing=cfg["context_mixing"],
        seed=cfg["seed"],
    )
    return RerankerModel(loaded.vocab, encoder_config, params_as_tensors(loaded.params))


def score_generated(
    model: RerankerModel, doc: LabeledDocument, candidates
) -> list[ScoredPhrase]:
    """Rerank candidate surfaces by document-phrase cosine, keeping the
    best score per stemmed form."""
    candidates = list(candidates)
    if not candidates:
        return []
    tokenized = tokenize(doc)
    with ad.no_grad():
        sims = _similarities_t(model, list(tokenized.tokens), candidates).data

    best: dict[str, ScoredPhrase] = {}
    for surface, sim in zip(candidates, sims):
        stemmed = stem_phrase(surface)
        current = best.get(stemmed)
        if current is None or sim > current.score:
            best[stemmed] = ScoredPhrase(stemmed, surface, float(sim))
    return sorted(best.values(), key=lambda p: (-p.score, p.stemmed))


def predict_absent(
    model: RerankerModel,
    doc: LabeledDocument,
    candidates,
    threshold: float,
    min_k: int = 5,
) -> list[ScoredPhrase]:
    """Threshold-plus-top-up selection over reranked candidates, with the
    same rules as present-keyphrase prediction."""
    from kpforge.evaluation import select_by_threshold

    return select_by_threshold(score_generated(model, doc, candidates), threshold, min_k)
