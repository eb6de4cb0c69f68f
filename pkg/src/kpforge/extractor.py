"""Present-keyphrase extraction trained jointly with absent-keyphrase
generation: a softmax contrastive objective over mined candidates plus
the teacher-forced likelihood of the absent-keyphrase sequence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from kpforge import autodiff as ad
from kpforge.corpus import LabeledDocument, partition_keyphrases, tokenize
from kpforge.encoder import (
    EncoderConfig,
    TextEncoder,
    cosine,
    cosine_rows_t,
    init_encoder_params,
    pool_spans_t,
)
from kpforge.errors import DataError, NumericError
from kpforge.generator import GruDecoder, build_target_sequence, init_decoder_params, mle_loss_t
from kpforge.mining import MinerConfig, enumerate_spans, mine_candidates
from kpforge.optim import AdamW, LinearSchedule
from kpforge.stem import stem_phrase
from kpforge.tagging import tag_tokens
from kpforge.vocab import Vocabulary


@dataclass(frozen=True)
class TrainConfig:
    """Optimization settings shared by both training stages."""

    temperature: float = 0.1
    contrastive_weight: float = 0.3
    learning_rate: float = 0.05
    warmup_fraction: float = 0.0
    batch_size: int = 8
    epochs: int = 10
    patience: int = 10
    seed: int = 0
    max_grad_norm: float = 1.0
    weight_decay: float = 0.01

    def __post_init__(self) -> None:
        if self.temperature <= 0:
            raise DataError("temperature must be positive")
        if not 0.0 <= self.contrastive_weight <= 1.0:
            raise DataError("contrastive weight must be in [0, 1]")


@dataclass(frozen=True)
class ScoredPhrase:
    stemmed: str
    surface: str
    score: float


def _logsumexp(values: np.ndarray) -> float:
    top = float(values.max())
    return top + math.log(float(np.exp(values - top).sum()))


def contrastive_loss(z_doc, z_pos, z_neg, temperature: float) -> float:
    """Softmax cross-entropy over cosine similarities, summed across the
    positives; each positive competes against all the negatives."""
    if len(z_pos) == 0:
        raise DataError("contrastive loss requires at least one positive")
    if temperature <= 0:
        raise DataError("temperature must be positive")
    pos_sims = np.array([cosine(z_doc, z) for z in z_pos])
    neg_sims = np.array([cosine(z_doc, z) for z in z_neg])
    return contrastive_loss_from_sims(pos_sims, neg_sims, temperature)


def contrastive_loss_from_sims(pos_sims, neg_sims, temperature: float) -> float:
    pos_sims = np.asarray(pos_sims, float) / temperature
    neg_sims = np.asarray(neg_sims, float) / temperature
    if len(pos_sims) == 0:
        raise DataError("contrastive loss requires at least one positive")
    if len(neg_sims) == 0:
        return 0.0
    lse_neg = _logsumexp(neg_sims)
    return float(sum(np.logaddexp(p, lse_neg) - p for p in pos_sims))


def contrastive_loss_t(
    sims: ad.Tensor, positive_rows, negative_rows, temperature: float
) -> ad.Tensor:
    """Tape version over a (n,) similarity vector with index lists."""
    scaled = sims * (1.0 / temperature)
    if len(negative_rows) == 0:
        return ad.Tensor(0.0)
    pos = ad.take_rows(scaled, list(positive_rows))
    lse_neg = ad.logsumexp(ad.take_rows(scaled, list(negative_rows)))
    return ad.tsum(ad.logaddexp(pos, lse_neg)) - ad.tsum(pos)


def joint_loss(mle: float, cl: float, weight: float) -> float:
    if not (math.isfinite(mle) and math.isfinite(cl)):
        raise NumericError("joint loss requires finite inputs")
    return mle + weight * cl


@dataclass
class Stage1Model:
    """Trained (or freshly initialized) extractor-generator bundle."""

    vocab: Vocabulary
    encoder_config: EncoderConfig
    miner_config: MinerConfig
    params: dict[str, ad.Tensor]

    def encoder(self) -> TextEncoder:
        return TextEncoder(self.encoder_config, self.vocab, self.params)

    def decoder(self) -> GruDecoder:
        return GruDecoder(self.params, self.vocab)


def build_stage1(
    vocab: Vocabulary,
    encoder_config: EncoderConfig,
    miner_config: MinerConfig,
    seed: int | None = None,
) -> Stage1Model:
    """Fresh model with the standard uniform initialization."""
    rng = np.random.default_rng(encoder_config.seed if seed is None else seed)
    params = init_encoder_params(encoder_config, len(vocab), rng)
    params.update(
        init_decoder_params(
            len(vocab), encoder_config.embed_dim, encoder_config.hidden_dim, rng
        )
    )
    return Stage1Model(vocab, encoder_config, miner_config, params)


@dataclass
class TrainingExample:
    doc_id: str
    token_ids: list[int]
    positive_spans: list[tuple[int, int]]
    negative_spans: list[tuple[int, int]]
    target_ids: list[int] | None
    gold_present_stems: set[str] = field(default_factory=set)


def prepare_example(
    doc: LabeledDocument, vocab: Vocabulary, miner_config: MinerConfig
) -> TrainingExample:
    tokenized = tokenize(doc)
    tagged = tag_tokens(tokenized.tokens, doc.pre_tags)
    candidates = mine_candidates(tagged, miner_config)
    present, absent = partition_keyphrases(tokenized, doc.keyphrases)
    present_stems = {stem_phrase(p) for p in present}

    positive_spans, negative_spans = [], []
    for candidate in candidates:
        spans = positive_spans if candidate.stemmed in present_stems else negative_spans
        spans.append((candidate.start, candidate.end))

    target_ids = None
    if absent:
        ordered = [p for p in doc.keyphrases if p in absent]
        target_ids = vocab.encode(build_target_sequence(ordered), strict=False)
    return TrainingExample(
        doc_id=doc.id,
        token_ids=vocab.encode(tokenized.tokens),
        positive_spans=positive_spans,
        negative_spans=negative_spans,
        target_ids=target_ids,
        gold_present_stems=present_stems,
    )


def _document_loss_t(
    model: Stage1Model, example: TrainingExample, config: TrainConfig
) -> tuple[ad.Tensor | None, ad.Tensor | None]:
    """(mle, contrastive) tape losses; either may be None when undefined."""
    encoder = model.encoder()
    if not example.token_ids:
        return None, None
    encoded = encoder.encode_ids_t(example.token_ids)
    doc_row = encoder.doc_row_t(encoded)

    cl_term = None
    if example.positive_spans:
        spans = example.positive_spans + example.negative_spans
        pooled = pool_spans_t(encoded, spans)
        z_phrases = encoder.project_phrases_t(pooled)
        z_doc = encoder.project_doc_t(doc_row)
        sims = cosine_rows_t(z_phrases, z_doc)
        n_pos = len(example.positive_spans)
        cl_term = contrastive_loss_t(
            sims,
            positive_rows=range(n_pos),
            negative_rows=range(n_pos, len(spans)),
            temperature=config.temperature,
        )

    mle_term = None
    if example.target_ids:
        mle_term = mle_loss_t(model.decoder(), doc_row, example.target_ids)
    return mle_term, cl_term


@dataclass
class TrainHistoryRow:
    step: int
    mle_loss: float
    cl_loss: float
    val_f1m: float | None = None


def train_stage1(
    documents,
    encoder_config: EncoderConfig,
    miner_config: MinerConfig,
    config: TrainConfig,
    validation_documents=None,
) -> tuple[Stage1Model, list[TrainHistoryRow]]:
    """Optimize the joint objective with AdamW, warmup/decay, clipping,
    per-epoch validation, and patience-based early stopping."""
    documents = list(documents)
    if not documents:
        raise DataError("training requires a non-empty corpus")
    vocab = Vocabulary.from_documents(documents)
    model = build_stage1(vocab, encoder_config, miner_config, seed=config.seed)
    examples = [prepare_example(d, vocab, miner_config) for d in documents]
    val_docs = list(validation_documents) if validation_documents else []

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
    best_f1 = -1.0
    best_params: dict[str, np.ndarray] | None = None
    tolerance = 0
    step = 0
    stop = False

    for _ in range(config.epochs):
        order = rng.permutation(len(examples))
        for batch_start in range(0, len(examples), config.batch_size):
            batch = [examples[i] for i in order[batch_start : batch_start + config.batch_size]]
            optimizer.zero_grad()
            total = ad.Tensor(0.0)
            mle_sum = 0.0
            cl_sum = 0.0
            for example in batch:
                mle_term, cl_term = _document_loss_t(model, example, config)
                if mle_term is not None:
                    total = total + mle_term
                    mle_sum += mle_term.item()
                if cl_term is not None:
                    total = total + cl_term * config.contrastive_weight
                    cl_sum += cl_term.item()
            total = total * (1.0 / len(batch))
            if not math.isfinite(total.item()):
                raise NumericError(f"non-finite training loss at step {step}")
            if total.requires_grad:
                total.backward()
                optimizer.clip_gradients()
                optimizer.step(lr=schedule.lr_at(step))
            history.append(
                TrainHistoryRow(step, mle_sum / len(batch), cl_sum / len(batch))
            )
            step += 1

        if val_docs:
            val_f1 = validation_f1m(model, val_docs)
            history[-1].val_f1m = val_f1
            if val_f1 > best_f1:
                best_f1 = val_f1
                best_params = {k: p.data.copy() for k, p in model.params.items()}
                tolerance = 0
            else:
                tolerance += 1
                if tolerance > config.patience:
                    stop = True
        if stop:
            break

    if best_params is not None:
        for name, param in model.params.items():
            param.data = best_params[name]
    return model, history


def save_stage1(path, model: Stage1Model, fingerprint: str) -> None:
    from kpforge.checkpoint import save_checkpoint
    from kpforge.tagging import TagSetTable

    config = {
        "embed_dim": model.encoder_config.embed_dim,
        "hidden_dim": model.encoder_config.hidden_dim,
        "context_mixing": model.encoder_config.context_mixing,
        "seed": model.encoder_config.seed,
        "max_ngram": model.miner_config.max_ngram,
        "noun_only": model.miner_config.table == TagSetTable.nouns_only(),
        "require_content_tag": model.miner_config.require_content_tag,
    }
    save_checkpoint(path, "stage1", model.params, model.vocab, fingerprint, config)


def load_stage1(path) -> Stage1Model:
    from kpforge.checkpoint import load_checkpoint, params_as_tensors
    from kpforge.tagging import TagSetTable

    loaded = load_checkpoint(path, expected_kind="stage1")
    cfg = loaded.config
    encoder_config = EncoderConfig(
        embed_dim=cfg["embed_dim"],
        hidden_dim=cfg["hidden_dim"],
        context_mixing=cfg["context_mixing"],
        seed=cfg["seed"],
    )
    table = TagSetTable.nouns_only() if cfg.get("noun_only") else TagSetTable.default()
    miner_config = MinerConfig(
        max_ngram=cfg["max_ngram"],
        table=table,
        require_content_tag=cfg.get("require_content_tag", True),
    )
    return Stage1Model(
        loaded.vocab, encoder_config, miner_config, params_as_tensors(loaded.params)
    )


def score_candidates(model: Stage1Model, doc: LabeledDocument) -> list[ScoredPhrase]:
    """Cosine-score every mineable span and keep the best score per
    stemmed form."""
    tokenized = tokenize(doc)
    tagged = tag_tokens(tokenized.tokens, doc.pre_tags)
    spans = enumerate_spans(tagged, model.miner_config)
    if not spans:
        return []

    encoder = model.encoder()
    with ad.no_grad():
        encoded = encoder.encode_ids_t(model.vocab.encode(tokenized.tokens))
        doc_row = encoder.doc_row_t(encoded)
        pooled = pool_spans_t(encoded, [(s.start, s.end) for s in spans])
        z_phrases = encoder.project_phrases_t(pooled)
        z_doc = encoder.project_doc_t(doc_row)
        sims = cosine_rows_t(z_phrases, z_doc).data

    best: dict[str, ScoredPhrase] = {}
    for span, sim in zip(spans, sims):
        current = best.get(span.stemmed)
        if current is None or sim > current.score:
            best[span.stemmed] = ScoredPhrase(span.stemmed, span.surface, float(sim))
    return sorted(best.values(), key=lambda p: (-p.score, p.stemmed))


def predict_present(
    model: Stage1Model, doc: LabeledDocument, threshold: float, min_k: int = 5
) -> list[ScoredPhrase]:
    """Every candidate scoring at or above the threshold, topped up with
    the next-best candidates to ``min_k`` when the cut selects fewer."""
    from kpforge.evaluation import select_by_threshold

    return select_by_threshold(score_candidates(model, doc), threshold, min_k)


def validation_f1m(model: Stage1Model, documents) -> float:
    """Macro F1 over all predictions at a threshold calibrated on the
    same documents (duplicate spans aggregated by max score)."""
    from kpforge.evaluation import calibrate_threshold, f1_at_m

    scored_docs = []
    gold_sets = []
    for doc in documents:
        tokenized = tokenize(doc)
        present, _ = partition_keyphrases(tokenized, doc.keyphrases)
        gold = {stem_phrase(p) for p in present}
        scored_docs.append((score_candidates(model, doc), gold))
        gold_sets.append(gold)
    eligible = [(s, g) for s, g in scored_docs if g]
    if not eligible:
        return 0.0
    threshold = calibrate_threshold(eligible)
    scores = []
    for scored, gold in eligible:
        from kpforge.evaluation import select_by_threshold

        picked = [p.stemmed for p in select_by_threshold(scored, threshold, min_k=5)]
        value = f1_at_m(picked, gold)
        if value is not None:
            scores.append(value)
    return float(np.mean(scores)) if scores else 0.0
