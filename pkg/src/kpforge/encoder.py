"""Trainable text encoder: embedding lookup, optional context mixing,
span sum pooling, tanh projection heads, and cosine similarity.

The encoder is a lightweight stand-in behind a small interface; the
representation learning losses, not the backbone, are the focus here.
A document vector is the representation of a reserved start token
prepended to the token sequence.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from kpforge import autodiff as ad
from kpforge.errors import DataError
from kpforge.vocab import Vocabulary

INIT_SCALE = 0.1


@dataclass(frozen=True)
class EncoderConfig:
    embed_dim: int = 32
    hidden_dim: int = 32
    context_mixing: bool = True
    seed: int = 0

    def __post_init__(self) -> None:
        if self.embed_dim < 2 or self.hidden_dim < 2:
            raise DataError("embedding and hidden dimensions must be >= 2")


@dataclass(frozen=True)
class EncodedDocument:
    """Per-token vectors plus the document vector, as plain arrays."""

    token_vectors: np.ndarray  # (T, d)
    doc_vector: np.ndarray  # (d,)


def uniform_init(rng: np.random.Generator, shape) -> ad.Tensor:
    data = rng.uniform(-INIT_SCALE, INIT_SCALE, size=shape)
    return ad.Tensor(data, requires_grad=True)


def init_encoder_params(
    config: EncoderConfig, vocab_size: int, rng: np.random.Generator, prefix: str = ""
) -> dict[str, ad.Tensor]:
    """Embedding table plus document- and phrase-side projection heads."""
    d, h = config.embed_dim, config.hidden_dim
    return {
        f"{prefix}embed": uniform_init(rng, (vocab_size, d)),
        f"{prefix}doc_proj_w": uniform_init(rng, (h, d)),
        f"{prefix}doc_proj_b": uniform_init(rng, (h,)),
        f"{prefix}phrase_proj_w": uniform_init(rng, (h, d)),
        f"{prefix}phrase_proj_b": uniform_init(rng, (h,)),
    }


def encode_ids(
    params: dict[str, ad.Tensor],
    ids,
    *,
    context_mixing: bool,
    prefix: str = "",
) -> ad.Tensor:
    """Differentiable encoding of [start token] + ids -> (T+1, d) matrix.

    With mixing enabled, each output row is the average of the raw
    embedding and its similarity-weighted combination of all rows, so
    token identity survives while every vector absorbs document context.
    """
    if len(ids) == 0:
        raise DataError("cannot encode an empty token sequence")
    embed = params[f"{prefix}embed"]
    rows = ad.take_rows(embed, list(ids))
    if not context_mixing:
        return rows
    d = rows.shape[1]
    scores = ad.matmul(rows, ad.transpose(rows)) * (1.0 / math.sqrt(d))
    weights = ad.row_softmax(scores)
    mixed = ad.matmul(weights, rows)
    return (rows + mixed) * 0.5


class TextEncoder:
    """Bundles a vocabulary, config, and parameters for convenience."""

    def __init__(
        self,
        config: EncoderConfig,
        vocab: Vocabulary,
        params: dict[str, ad.Tensor] | None = None,
        prefix: str = "",
    ) -> None:
        self.config = config
        self.vocab = vocab
        self.prefix = prefix
        if params is None:
            rng = np.random.default_rng(config.seed)
            params = init_encoder_params(config, len(vocab), rng, prefix)
        self.params = params

    def encode_ids_t(self, ids) -> ad.Tensor:
        full = [self.vocab.bos_id] + list(ids)
        return encode_ids(
            self.params,
            full,
            context_mixing=self.config.context_mixing,
            prefix=self.prefix,
        )

    def encode_tokens(self, tokens) -> EncodedDocument:
        """Inference-mode encoding of lowercase word tokens."""
        tokens = list(tokens)
        if not tokens:
            raise DataError("cannot encode an empty token list")
        ids = self.vocab.encode(tokens)
        with ad.no_grad():
            matrix = self.encode_ids_t(ids).data
        return EncodedDocument(token_vectors=matrix[1:], doc_vector=matrix[0])

    def doc_row_t(self, encoded: ad.Tensor) -> ad.Tensor:
        """Row 0 of the encoded matrix as a (1, d) document vector."""
        return ad.get(encoded, slice(0, 1))

    def project_doc_t(self, doc_row: ad.Tensor) -> ad.Tensor:
        """Project a (1, d) document row to its (1, h) hidden form."""
        w = self.params[f"{self.prefix}doc_proj_w"]
        b = self.params[f"{self.prefix}doc_proj_b"]
        return ad.tanh(ad.matmul(doc_row, ad.transpose(w)) + b)

    def project_phrases_t(self, matrix: ad.Tensor) -> ad.Tensor:
        """Project (n, d) pooled span vectors to (n, h)."""
        w = self.params[f"{self.prefix}phrase_proj_w"]
        b = self.params[f"{self.prefix}phrase_proj_b"]
        return ad.tanh(ad.matmul(matrix, ad.transpose(w)) + b)


def encode_tokens(encoder: TextEncoder, tokens) -> EncodedDocument:
    return encoder.encode_tokens(tokens)


def pool_span(doc: EncodedDocument, start: int, end: int) -> np.ndarray:
    """Sum the token vectors of the span [start, end)."""
    T = doc.token_vectors.shape[0]
    if not 0 <= start < end <= T:
        raise DataError(f"span [{start}, {end}) out of range for {T} tokens")
    return doc.token_vectors[start:end].sum(axis=0)


def pool_spans_t(encoded: ad.Tensor, spans) -> ad.Tensor:
    """Differentiable batch pooling: one row per (start, end) span.

    ``encoded`` is the (T+1, d) matrix whose row 0 is the document
    vector; spans address token coordinates, hence the +1 offset.
    """
    n_rows = encoded.shape[0]
    selector = np.zeros((len(spans), n_rows))
    for row, (start, end) in enumerate(spans):
        if not 0 <= start < end <= n_rows - 1:
            raise DataError(f"span [{start}, {end}) out of range")
        selector[row, start + 1 : end + 1] = 1.0
    return ad.matmul(ad.Tensor(selector), encoded)


def project(w: np.ndarray, b: np.ndarray, x: np.ndarray) -> np.ndarray:
    """tanh(Wx + b) with shape validation."""
    w, b, x = np.asarray(w, float), np.asarray(b, float), np.asarray(x, float)
    if w.ndim != 2 or w.shape[1] != x.shape[0] or b.shape[0] != w.shape[0]:
        raise DataError(
            f"projection shape mismatch: W{w.shape}, b{b.shape}, x{x.shape}"
        )
    return np.tanh(w @ x + b)


def cosine(u, v) -> float:
    """Cosine similarity; zero vectors compare as 0 with a warning."""
    u, v = np.asarray(u, float), np.asarray(v, float)
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        warnings.warn("cosine of a zero vector is defined as 0", RuntimeWarning)
        return 0.0
    return float(u @ v / (nu * nv))


def cosine_rows_t(matrix: ad.Tensor, vector: ad.Tensor) -> ad.Tensor:
    """Differentiable cosine of each matrix row against a vector -> (n,)."""
    dots = ad.tsum(matrix * vector, axis=1)
    row_norms = ad.sqrt(ad.tsum(matrix * matrix, axis=1))
    vec_norm = ad.sqrt(ad.tsum(vector * vector))
    return dots / (row_norms * vec_norm)
