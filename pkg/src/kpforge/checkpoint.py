"""Versioned on-disk checkpoint container.

Layout: an 8-byte magic, a 4-byte little-endian header length, a JSON
header, then one binary blob of little-endian float32 parameter data.
The header carries the parameter manifest (name, shape, byte offset),
the vocabulary, the producing run's config fingerprint, a model config
echo, and a SHA-256 checksum of the blob; loading verifies both the
checksum and every shape.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass

import numpy as np

from kpforge import autodiff as ad
from kpforge.errors import DataError
from kpforge.vocab import Vocabulary

MAGIC = b"KPFORGE1"
FORMAT_VERSION = 1


@dataclass
class LoadedCheckpoint:
    kind: str
    params: dict[str, np.ndarray]
    vocab: Vocabulary
    fingerprint: str
    config: dict


def save_checkpoint(
    path,
    kind: str,
    params: dict[str, ad.Tensor],
    vocab: Vocabulary,
    fingerprint: str,
    config: dict,
) -> None:
    manifest = []
    blob = bytearray()
    for name in sorted(params):
        data = np.ascontiguousarray(params[name].data, dtype="<f4")
        manifest.append(
            {"name": name, "shape": list(data.shape), "offset": len(blob)}
        )
        blob.extend(data.tobytes())
    header = {
        "format_version": FORMAT_VERSION,
        "kind": kind,
        "fingerprint": fingerprint,
        "config": config,
        "vocab": list(vocab.tokens),
        "params": manifest,
        "blob_sha256": hashlib.sha256(bytes(blob)).hexdigest(),
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    with open(path, "wb") as handle:
        handle.write(MAGIC)
        handle.write(struct.pack("<I", len(header_bytes)))
        handle.write(header_bytes)
        handle.write(bytes(blob))


def load_checkpoint(path, expected_kind: str | None = None) -> LoadedCheckpoint:
    try:
        with open(path, "rb") as handle:
            raw = handle.read()
    except OSError as exc:
        raise DataError(f"cannot read checkpoint {path}: {exc}") from exc

    if len(raw) < len(MAGIC) + 4 or raw[: len(MAGIC)] != MAGIC:
        raise DataError(f"{path} is not a kpforge checkpoint")
    header_len = struct.unpack_from("<I", raw, len(MAGIC))[0]
    header_start = len(MAGIC) + 4
    try:
        header = json.loads(raw[header_start : header_start + header_len])
    except json.JSONDecodeError as exc:
        raise DataError(f"corrupt checkpoint header in {path}") from exc
    if header.get("format_version") != FORMAT_VERSION:
        raise DataError(
            f"unsupported checkpoint version {header.get('format_version')} in {path}"
        )
    blob = raw[header_start + header_len :]
    digest = hashlib.sha256(blob).hexdigest()
    if digest != header["blob_sha256"]:
        raise DataError(f"checksum mismatch in {path}; file is corrupt")
    if expected_kind is not None and header["kind"] != expected_kind:
        raise DataError(
            f"checkpoint {path} holds a {header['kind']!r} model, "
            f"expected {expected_kind!r}"
        )

    params: dict[str, np.ndarray] = {}
    for entry in header["params"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = entry["offset"]
        arr = np.frombuffer(blob, dtype="<f4", count=count, offset=start)
        if arr.size != count:
            raise DataError(f"parameter {entry['name']!r} truncated in {path}")
        params[entry["name"]] = arr.reshape(shape).astype(np.float64)
    return LoadedCheckpoint(
        kind=header["kind"],
        params=params,
        vocab=Vocabulary(header["vocab"]),
        fingerprint=header["fingerprint"],
        config=header["config"],
    )


def params_as_tensors(arrays: dict[str, np.ndarray]) -> dict[str, ad.Tensor]:
    return {name: ad.Tensor(data, requires_grad=True) for name, data in arrays.items()}
