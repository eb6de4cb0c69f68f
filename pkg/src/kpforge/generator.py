"""Absent-keyphrase generation: gated recurrent decoder, teacher-forced
likelihood loss, beam search, and overgeneration with stem dedup.

Targets follow the concatenated-sequence convention: the tokens of each
absent keyphrase in gold order, separated by a reserved separator token
and terminated by the end token. Beam scores are raw cumulative
log-probabilities (no length normalization) unless requested.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from kpforge import autodiff as ad
from kpforge.corpus import tokenize_text
from kpforge.errors import DataError
from kpforge.stem import stem_word
from kpforge.vocab import EOS, SEP, Vocabulary


def build_target_sequence(absent_keyphrases) -> list[str]:
    """Token strings of each phrase, separator-joined, end-terminated."""
    tokens: list[str] = []
    for i, phrase in enumerate(absent_keyphrases):
        if i:
            tokens.append(SEP)
        tokens.extend(tokenize_text(phrase))
    tokens.append(EOS)
    return tokens


def split_target_sequence(tokens) -> list[str]:
    """Inverse of :func:`build_target_sequence` (phrases as strings)."""
    phrases: list[str] = []
    current: list[str] = []
    for token in tokens:
        if token == EOS:
            break
        if token == SEP:
            phrases.append(" ".join(current))
            current = []
        else:
            current.append(token)
    phrases.append(" ".join(current))
    return [p for p in phrases if p]


def init_decoder_params(
    vocab_size: int, embed_dim: int, hidden_dim: int, rng, prefix: str = "dec_"
) -> dict[str, ad.Tensor]:
    from kpforge.encoder import uniform_init

    params: dict[str, ad.Tensor] = {
        f"{prefix}init_w": uniform_init(rng, (hidden_dim, embed_dim)),
        f"{prefix}init_b": uniform_init(rng, (hidden_dim,)),
        f"{prefix}out_w": uniform_init(rng, (vocab_size, hidden_dim)),
        f"{prefix}out_b": uniform_init(rng, (vocab_size,)),
    }
    for gate in ("update", "reset", "cand"):
        params[f"{prefix}{gate}_e"] = uniform_init(rng, (hidden_dim, embed_dim))
        params[f"{prefix}{gate}_h"] = uniform_init(rng, (hidden_dim, hidden_dim))
        params[f"{prefix}{gate}_d"] = uniform_init(rng, (hidden_dim, embed_dim))
        params[f"{prefix}{gate}_b"] = uniform_init(rng, (hidden_dim,))
    return params


class GruDecoder:
    """Gated state updates combining the previous state, previous token
    embedding, and the document vector; linear projection to vocab logits."""

    def __init__(
        self,
        params: dict[str, ad.Tensor],
        vocab: Vocabulary,
        embed_key: str = "embed",
        prefix: str = "dec_",
    ) -> None:
        self.params = params
        self.vocab = vocab
        self.embed_key = embed_key
        self.prefix = prefix

    @property
    def vocab_size(self) -> int:
        return self.params[f"{self.prefix}out_w"].shape[0]

    def _p(self, name: str) -> ad.Tensor:
        return self.params[f"{self.prefix}{name}"]

    def _gate(self, name, emb, state, doc) -> ad.Tensor:
        pre = (
            ad.matmul(emb, ad.transpose(self._p(f"{name}_e")))
            + ad.matmul(state, ad.transpose(self._p(f"{name}_h")))
            + ad.matmul(doc, ad.transpose(self._p(f"{name}_d")))
            + self._p(f"{name}_b")
        )
        return pre

    def initial_state_t(self, doc_row: ad.Tensor) -> ad.Tensor:
        """State before any token is consumed, from the (1, d) doc vector."""
        return ad.tanh(
            ad.matmul(doc_row, ad.transpose(self._p("init_w"))) + self._p("init_b")
        )

    def step_t(self, state: ad.Tensor, token_ids, doc_row: ad.Tensor) -> ad.Tensor:
        """Consume one token per row and return the updated (n, H) state."""
        emb = ad.take_rows(self.params[self.embed_key], list(token_ids))
        update = ad.sigmoid(self._gate("update", emb, state, doc_row))
        reset = ad.sigmoid(self._gate("reset", emb, state, doc_row))
        candidate = ad.tanh(self._gate("cand", emb, reset * state, doc_row))
        return (1.0 - update) * state + update * candidate

    def logits_t(self, state: ad.Tensor) -> ad.Tensor:
        return ad.matmul(state, ad.transpose(self._p("out_w"))) + self._p("out_b")


def mle_loss_t(decoder: GruDecoder, doc_row: ad.Tensor, target_ids) -> ad.Tensor:
    """Teacher-forced negative log-likelihood, averaged over the scored
    steps (everything up to and including the first end token)."""
    target_ids = list(target_ids)
    if not target_ids:
        raise DataError("target sequence must be non-empty")
    if any(t >= decoder.vocab_size or t < 0 for t in target_ids):
        raise DataError("target token id outside the vocabulary")
    eos_id = decoder.vocab.eos_id
    if eos_id in target_ids:
        target_ids = target_ids[: target_ids.index(eos_id) + 1]

    state = decoder.initial_state_t(doc_row)
    state = decoder.step_t(state, [decoder.vocab.bos_id], doc_row)
    total = ad.Tensor(0.0)
    for token_id in target_ids:
        logits = decoder.logits_t(state)
        log_norm = ad.logsumexp(logits, axis=1)
        picked = ad.get(logits, (0, int(token_id)))
        total = total + (ad.tsum(log_norm) - picked)
        state = decoder.step_t(state, [int(token_id)], doc_row)
    return total * (1.0 / len(target_ids))


def mle_loss(decoder: GruDecoder, doc_vector: np.ndarray, target_ids) -> float:
    doc_row = ad.Tensor(np.asarray(doc_vector, float).reshape(1, -1))
    with ad.no_grad():
        return mle_loss_t(decoder, doc_row, target_ids).item()


@dataclass(frozen=True)
class Beam:
    tokens: tuple[int, ...]
    log_prob: float
    finished: bool

    def sort_key(self):
        return (-self.log_prob, not self.finished, len(self.tokens), self.tokens)


class BeamDecoderBase:
    """Minimal stepping interface beam search needs.

    ``state`` is opaque and batched: row i corresponds to live beam i.
    """

    eos_id: int
    vocab_size: int

    def initial_state(self):
        raise NotImplementedError

    def log_probs(self, state) -> np.ndarray:  # (n_live, V)
        raise NotImplementedError

    def advance(self, state, parent_rows, token_ids):
        raise NotImplementedError


class GruBeamDecoder(BeamDecoderBase):
    """Beam-search adapter running the recurrent decoder without a tape."""

    def __init__(self, decoder: GruDecoder, doc_vector: np.ndarray) -> None:
        self.decoder = decoder
        self.eos_id = decoder.vocab.eos_id
        self.vocab_size = decoder.vocab_size
        self._doc = np.asarray(doc_vector, float).reshape(1, -1)

    def initial_state(self) -> np.ndarray:
        with ad.no_grad():
            doc = ad.Tensor(self._doc)
            state = self.decoder.initial_state_t(doc)
            return self.decoder.step_t(state, [self.decoder.vocab.bos_id], doc).data

    def log_probs(self, state: np.ndarray) -> np.ndarray:
        with ad.no_grad():
            logits = self.decoder.logits_t(ad.Tensor(state)).data
        shifted = logits - logits.max(axis=1, keepdims=True)
        log_norm = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
        return shifted - log_norm

    def advance(self, state, parent_rows, token_ids) -> np.ndarray:
        with ad.no_grad():
            doc = ad.Tensor(self._doc)
            gathered = ad.Tensor(state[np.asarray(parent_rows, dtype=int)])
            return self.decoder.step_t(gathered, list(token_ids), doc).data


def beam_search(
    decoder: BeamDecoderBase, beam_size: int, max_len: int
) -> list[Beam]:
    """Breadth-limited search over end-token-terminated sequences.

    ``max_len`` caps the number of ordinary tokens; a sequence reaching
    it is closed with the end token (its probability still counts), so
    every returned beam ends with the end token and scores are exact
    joint log-probabilities. Ties break toward earlier-finishing beams,
    then lexicographically smaller token ids.
    """
    if beam_size < 1:
        raise DataError("beam_size must be >= 1")
    eos = decoder.eos_id
    n_vocab = decoder.vocab_size
    finished: list[Beam] = []
    live: list[Beam] = [Beam(tokens=(), log_prob=0.0, finished=False)]
    state = decoder.initial_state()

    while live:
        log_probs = decoder.log_probs(state)
        scores = np.array([b.log_prob for b in live])
        at_cap = len(live[0].tokens) >= max_len

        if at_cap:
            expanded = [
                (Beam(b.tokens + (eos,), float(scores[i] + log_probs[i, eos]), True), i)
                for i, b in enumerate(live)
            ]
        else:
            # Exact top-k among all (beam, token) expansions. Within one
            # step all expansions share a length, so the tie-break
            # (score desc, finished first, token tuple asc) reduces to
            # (score desc, eos first, parent tuple rank asc, token asc).
            flat_scores = (scores[:, None] + log_probs).ravel()
            parent_rank = np.empty(len(live), dtype=np.intp)
            parent_rank[
                sorted(range(len(live)), key=lambda i: live[i].tokens)
            ] = np.arange(len(live))
            tokens_flat = np.tile(np.arange(n_vocab), len(live))
            order = np.lexsort(
                (
                    tokens_flat,
                    np.repeat(parent_rank, n_vocab),
                    tokens_flat != eos,
                    -flat_scores,
                )
            )[:beam_size]
            expanded = []
            for flat_index in order:
                row, token = divmod(int(flat_index), n_vocab)
                beam = live[row]
                expanded.append(
                    (
                        Beam(
                            beam.tokens + (token,),
                            float(flat_scores[flat_index]),
                            token == eos,
                        ),
                        row,
                    )
                )

        pool = [(b, -1) for b in finished] + expanded
        pool.sort(key=lambda pair: pair[0].sort_key())
        kept = pool[:beam_size]

        finished = [beam for beam, _ in kept if beam.finished]
        new_live = [(beam, row) for beam, row in kept if not beam.finished]
        if not new_live:
            break
        live = [beam for beam, _ in new_live]
        parent_rows = [row for _, row in new_live]
        tokens = [beam.tokens[-1] for beam in live]
        state = decoder.advance(state, parent_rows, tokens)

    return sorted(finished, key=Beam.sort_key)


@dataclass(frozen=True)
class GeneratedPhrase:
    surface: str
    stemmed: str


def beams_to_phrases(beams: list[Beam], vocab: Vocabulary) -> list[GeneratedPhrase]:
    """Split beams at separators, stem, and keep the first occurrence of
    each stemmed form scanning beams best-first."""
    seen: set[str] = set()
    unique: list[GeneratedPhrase] = []
    for beam in beams:
        tokens = vocab.decode(beam.tokens)
        for phrase in split_target_sequence(tokens):
            stemmed = " ".join(stem_word(t) for t in phrase.split())
            if not stemmed or stemmed in seen:
                continue
            seen.add(stemmed)
            unique.append(GeneratedPhrase(surface=phrase, stemmed=stemmed))
    return unique


def render_beam(beam: Beam, vocab: Vocabulary) -> str:
    """Readable beam text with ';' between phrases, end token dropped."""
    words = []
    for token in vocab.decode(beam.tokens):
        if token == EOS:
            break
        words.append(";" if token == SEP else token)
    return " ".join(words)
