"""Decoder losses, beam search vs exhaustive enumeration, overgeneration."""

import itertools
import math
import time

import numpy as np
import pytest

from kpforge import autodiff as ad
from kpforge.encoder import EncoderConfig
from kpforge.errors import DataError
from kpforge.generator import (
    Beam,
    BeamDecoderBase,
    GruBeamDecoder,
    GruDecoder,
    beam_search,
    beams_to_phrases,
    build_target_sequence,
    init_decoder_params,
    mle_loss,
    render_beam,
    split_target_sequence,
)
from kpforge.vocab import EOS, RESERVED, SEP, Vocabulary


def make_decoder(vocab_tokens=("alpha", "beta"), seed=0, zero_output=False):
    vocab = Vocabulary(list(RESERVED) + list(vocab_tokens))
    rng = np.random.default_rng(seed)
    params = {"embed": ad.Tensor(rng.uniform(-0.1, 0.1, (len(vocab), 4)), requires_grad=True)}
    params.update(init_decoder_params(len(vocab), 4, 5, rng))
    if zero_output:
        params["dec_out_w"].data[:] = 0.0
        params["dec_out_b"].data[:] = 0.0
    return GruDecoder(params, vocab), vocab


class TestTargetSequence:
    def test_phrases_joined_with_separator(self):
        assert build_target_sequence(["a b", "c"]) == ["a", "b", SEP, "c", EOS]

    def test_empty_list(self):
        assert build_target_sequence([]) == [EOS]

    def test_round_trip(self):
        phrases = ["neural nets", "graph mining", "x"]
        assert split_target_sequence(build_target_sequence(phrases)) == phrases

    def test_split_drops_empties(self):
        assert split_target_sequence(["a", SEP, SEP, "b", EOS]) == ["a", "b"]


class TestMleLoss:
    def test_uniform_model_gives_log_vocab(self):
        # Zeroed output projection makes every step uniform over |V|=4.
        vocab = Vocabulary(RESERVED)  # 5 reserved; build a raw 4-logit head
        rng = np.random.default_rng(1)
        params = {"embed": ad.Tensor(rng.uniform(-0.1, 0.1, (4, 3)), requires_grad=True)}
        params.update(init_decoder_params(4, 3, 4, rng))
        params["dec_out_w"].data[:] = 0.0
        params["dec_out_b"].data[:] = 0.0

        class TinyVocab:
            bos_id = 0
            eos_id = 1

        decoder = GruDecoder(params, TinyVocab())
        loss = mle_loss(decoder, np.zeros(3), [2, 3])
        assert loss == pytest.approx(math.log(4.0), abs=1e-12)

    def test_perfect_model_gives_zero(self):
        decoder, vocab = make_decoder()
        target = vocab.encode(["alpha", EOS])
        # Push all the probability to the right token at each step via a
        # huge output bias toward the target; with two steps we check the
        # limit numerically by scaling the bias.
        decoder.params["dec_out_w"].data[:] = 0.0
        decoder.params["dec_out_b"].data[:] = -1e9
        decoder.params["dec_out_b"].data[target[0]] = 0.0
        first = mle_loss(decoder, np.zeros(4), [target[0]])
        assert first == pytest.approx(0.0, abs=1e-9)

    def test_tokens_after_eos_excluded(self):
        decoder, vocab = make_decoder()
        doc = np.zeros(4)
        base = vocab.encode(["alpha", EOS])
        padded = base + vocab.encode(["beta", "beta"])
        assert mle_loss(decoder, doc, base) == pytest.approx(
            mle_loss(decoder, doc, padded), abs=1e-12
        )

    def test_out_of_vocab_target_rejected(self):
        decoder, _ = make_decoder()
        with pytest.raises(DataError):
            mle_loss(decoder, np.zeros(4), [99])

    def test_empty_target_rejected(self):
        decoder, _ = make_decoder()
        with pytest.raises(DataError):
            mle_loss(decoder, np.zeros(4), [])


class TableDecoder(BeamDecoderBase):
    """Log-probabilities depend on (position, previous token): the exact
    setting where exhaustive enumeration is cheap."""

    def __init__(self, tables, eos_id=0):
        # tables[pos] is a (V, V) row-stochastic matrix: row = prev token.
        self.tables = [np.log(t) for t in tables]
        self.eos_id = eos_id
        self.vocab_size = tables[0].shape[1]

    def initial_state(self):
        return [(0, 0)]  # (position, prev token) per live beam

    def log_probs(self, state):
        return np.vstack([self.tables[min(pos, len(self.tables) - 1)][prev] for pos, prev in state])

    def advance(self, state, parent_rows, token_ids):
        return [(state[row][0] + 1, token) for row, token in zip(parent_rows, token_ids)]


def random_table_decoder(rng, vocab_size, max_len, eos_id=0):
    tables = []
    for _ in range(max_len + 1):
        raw = rng.uniform(0.05, 1.0, size=(vocab_size, vocab_size))
        tables.append(raw / raw.sum(axis=1, keepdims=True))
    return TableDecoder(tables, eos_id=eos_id)


def exhaustive_best(decoder: TableDecoder, max_len: int):
    """Enumerate every end-terminated sequence of at most max_len ordinary
    tokens and return the argmax by (score, earlier-finish, token order)."""
    best = None
    V = decoder.vocab_size
    eos = decoder.eos_id
    for length in range(0, max_len + 1):
        for body in itertools.product(range(V), repeat=length):
            tokens = body + (eos,)
            score = 0.0
            prev = 0
            ok = True
            for pos, token in enumerate(tokens):
                table = decoder.tables[min(pos, len(decoder.tables) - 1)]
                score += table[prev][token]
                prev = token
                if pos < len(tokens) - 1 and token == eos:
                    ok = False  # interior end token would have terminated
                    break
            if not ok:
                continue
            key = (-score, len(tokens), tokens)
            if best is None or key < best[0]:
                best = (key, tokens, score)
    return best


class TestBeamSearch:
    def test_beam_one_equals_greedy(self):
        rng = np.random.default_rng(5)
        decoder = random_table_decoder(rng, vocab_size=4, max_len=3)
        beams = beam_search(decoder, beam_size=1, max_len=3)
        assert len(beams) == 1

        tokens = []
        state = decoder.initial_state()
        for _ in range(4):
            lp = decoder.log_probs(state)[0]
            token = int(np.argmax(lp)) if len(tokens) < 3 else decoder.eos_id
            tokens.append(token)
            if token == decoder.eos_id:
                break
            state = decoder.advance(state, [0], [token])
        assert beams[0].tokens == tuple(tokens)

    def test_scores_non_increasing(self):
        rng = np.random.default_rng(7)
        decoder = random_table_decoder(rng, vocab_size=4, max_len=3)
        beams = beam_search(decoder, beam_size=8, max_len=3)
        scores = [b.log_prob for b in beams]
        assert scores == sorted(scores, reverse=True)
        assert all(b.finished and b.tokens[-1] == decoder.eos_id for b in beams)

    def test_full_width_matches_exhaustive_argmax(self):
        rng = np.random.default_rng(11)
        start = time.perf_counter()
        for trial in range(100):
            vocab_size = int(rng.integers(2, 6))
            max_len = int(rng.integers(1, 5))
            decoder = random_table_decoder(rng, vocab_size, max_len)
            beams = beam_search(
                decoder, beam_size=vocab_size**max_len + 1, max_len=max_len
            )
            _, expected_tokens, expected_score = exhaustive_best(decoder, max_len)
            assert beams[0].tokens == expected_tokens, f"trial {trial}"
            assert beams[0].log_prob == pytest.approx(expected_score, abs=1e-9)
        assert time.perf_counter() - start < 10.0

    def test_gru_adapter_runs(self):
        decoder, vocab = make_decoder()
        adapter = GruBeamDecoder(decoder, np.zeros(4))
        beams = beam_search(adapter, beam_size=4, max_len=3)
        assert beams
        assert all(b.tokens[-1] == vocab.eos_id for b in beams)

    def test_invalid_beam_size(self):
        decoder, _ = make_decoder()
        with pytest.raises(DataError):
            beam_search(GruBeamDecoder(decoder, np.zeros(4)), beam_size=0, max_len=2)


class TestOvergeneration:
    def test_dedup_in_beam_order(self):
        vocab = Vocabulary(list(RESERVED) + ["kp", "a", "b", "c"])
        enc = vocab.encode
        beams = [
            Beam(tuple(enc(["kp", "a", SEP, "kp", "b", EOS])), -0.1, True),
            Beam(tuple(enc(["kp", "a", SEP, "kp", "c", EOS])), -0.2, True),
        ]
        phrases = beams_to_phrases(beams, vocab)
        assert [p.surface for p in phrases] == ["kp a", "kp b", "kp c"]

    def test_stem_collisions_collapse(self):
        vocab = Vocabulary(list(RESERVED) + ["models", "model"])
        enc = vocab.encode
        beams = [
            Beam(tuple(enc(["models", EOS])), -0.1, True),
            Beam(tuple(enc(["model", EOS])), -0.2, True),
        ]
        phrases = beams_to_phrases(beams, vocab)
        assert len(phrases) == 1
        assert phrases[0].surface == "models"

    def test_empty_phrases_dropped(self):
        vocab = Vocabulary(list(RESERVED) + ["a"])
        beams = [Beam(tuple(vocab.encode([SEP, "a", EOS])), -0.1, True)]
        phrases = beams_to_phrases(beams, vocab)
        assert [p.surface for p in phrases] == ["a"]

    def test_render_beam(self):
        vocab = Vocabulary(list(RESERVED) + ["a", "b"])
        beam = Beam(tuple(vocab.encode(["a", SEP, "b", EOS])), -0.5, True)
        assert render_beam(beam, vocab) == "a ; b"
