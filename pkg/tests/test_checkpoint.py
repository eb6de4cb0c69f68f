"""Checkpoint container: round trips, verification, determinism."""

import numpy as np
import pytest

from kpforge import autodiff as ad
from kpforge.checkpoint import load_checkpoint, save_checkpoint
from kpforge.errors import DataError
from kpforge.vocab import RESERVED, Vocabulary


@pytest.fixture
def params():
    rng = np.random.default_rng(0)
    return {
        "embed": ad.Tensor(rng.normal(size=(7, 3)), requires_grad=True),
        "head_w": ad.Tensor(rng.normal(size=(2, 3)), requires_grad=True),
        "head_b": ad.Tensor(rng.normal(size=(2,)), requires_grad=True),
    }


@pytest.fixture
def vocab():
    return Vocabulary(list(RESERVED) + ["alpha", "beta"])


def test_round_trip(tmp_path, params, vocab):
    path = tmp_path / "model.kpc"
    save_checkpoint(path, "stage1", params, vocab, "fp123", {"embed_dim": 3})
    loaded = load_checkpoint(path)
    assert loaded.kind == "stage1"
    assert loaded.fingerprint == "fp123"
    assert loaded.config == {"embed_dim": 3}
    assert list(loaded.vocab.tokens) == list(vocab.tokens)
    for name, tensor in params.items():
        # float32 storage: equality after a float32 round trip
        assert np.array_equal(
            loaded.params[name], tensor.data.astype("<f4").astype(np.float64)
        )


def test_kind_mismatch_rejected(tmp_path, params, vocab):
    path = tmp_path / "model.kpc"
    save_checkpoint(path, "reranker", params, vocab, "fp", {})
    with pytest.raises(DataError):
        load_checkpoint(path, expected_kind="stage1")


def test_corrupt_blob_detected(tmp_path, params, vocab):
    path = tmp_path / "model.kpc"
    save_checkpoint(path, "stage1", params, vocab, "fp", {})
    raw = bytearray(path.read_bytes())
    raw[-1] ^= 0xFF
    path.write_bytes(bytes(raw))
    with pytest.raises(DataError, match="checksum"):
        load_checkpoint(path)


def test_not_a_checkpoint(tmp_path):
    path = tmp_path / "junk.kpc"
    path.write_bytes(b"hello world")
    with pytest.raises(DataError):
        load_checkpoint(path)


def test_missing_file(tmp_path):
    with pytest.raises(DataError):
        load_checkpoint(tmp_path / "absent.kpc")


def test_byte_identical_across_saves(tmp_path, params, vocab):
    a = tmp_path / "a.kpc"
    b = tmp_path / "b.kpc"
    save_checkpoint(a, "stage1", params, vocab, "fp", {"k": 1})
    save_checkpoint(b, "stage1", params, vocab, "fp", {"k": 1})
    assert a.read_bytes() == b.read_bytes()
