"""Run configuration: flat key=value files, flag overrides, fingerprints.

Every artifact a run produces embeds the fingerprint of the fully
resolved configuration, so any output can be traced to (and regenerated
from) its settings and seed. The KPFORGE_SEED environment variable
overrides the configured seed.
"""

from __future__ import annotations

import dataclasses
import hashlib
import os
from dataclasses import dataclass

from kpforge.errors import UsageError

# File/flag spellings that differ from field names.
KEY_ALIASES = {
    "tau": "temperature",
    "lambda": "contrastive_weight",
    "lr": "learning_rate",
}


@dataclass
class RunConfig:
    # paths
    corpus: str | None = None
    val_corpus: str | None = None
    checkpoint: str | None = None
    rerank_checkpoint: str | None = None
    candidates: str | None = None
    predictions: str | None = None
    gold: str | None = None
    output: str | None = None
    log: str | None = None
    # mining
    max_ngram: int = 6
    noun_only: bool = False
    mine_keep_contentless: bool = False
    # encoder
    embed_dim: int = 32
    hidden_dim: int = 32
    context_mixing: bool = True
    # stage-1 training
    temperature: float = 0.1
    contrastive_weight: float = 0.3
    learning_rate: float = 0.05
    warmup: float = 0.0
    batch_size: int = 8
    epochs: int = 10
    max_tolerance: int = 10
    max_grad_norm: float = 1.0
    weight_decay: float = 0.01
    # stage-2 training
    rerank_temperature: float = 0.1
    rerank_learning_rate: float = 0.05
    rerank_warmup: float = 0.1
    rerank_epochs: int = 10
    # decoding
    beam_size: int = 50
    max_len: int = 64
    # prediction
    threshold_present: float | None = None
    threshold_absent: float | None = None
    min_predictions: int = 5
    # misc
    seed: int = 0
    jobs: int = 1

    def fingerprint(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()[:16]

    def to_text(self) -> str:
        lines = []
        for field in dataclasses.fields(self):
            value = getattr(self, field.name)
            lines.append(f"{field.name} = {_format_value(value)}")
        return "\n".join(lines) + "\n"


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def _format_value(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    return repr(value) if isinstance(value, float) else str(value)


def _parse_value(key: str, raw: str):
    field = _FIELDS[key]
    text = raw.strip()
    annotation = field.type
    if text.lower() in ("none", ""):
        if "None" in annotation:
            return None
        raise UsageError(f"config key {key!r} does not accept an empty value")
    try:
        if "bool" in annotation:
            lowered = text.lower()
            if lowered in ("true", "yes", "1", "on"):
                return True
            if lowered in ("false", "no", "0", "off"):
                return False
            raise ValueError(text)
        if "int" in annotation:
            return int(text)
        if "float" in annotation:
            return float(text)
    except ValueError as exc:
        raise UsageError(f"invalid value {raw!r} for config key {key!r}") from exc
    return text


def resolve_key(key: str) -> str:
    name = KEY_ALIASES.get(key, key)
    if name not in _FIELDS:
        valid = sorted(set(_FIELDS) | set(KEY_ALIASES))
        raise UsageError(
            f"unknown config key {key!r}; valid keys: {', '.join(valid)}"
        )
    return name


def read_config_file(path) -> dict:
    """Parse a flat key=value file (# comments, blank lines allowed)."""
    try:
        with open(path, encoding="utf-8") as handle:
            lines = handle.readlines()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from exc
    values: dict = {}
    for line_no, line in enumerate(lines, start=1):
        text = line.strip()
        if not text or text.startswith("#"):
            continue
        if "=" not in text:
            raise UsageError(f"{path}:{line_no}: expected KEY = VALUE, got {text!r}")
        key, _, raw = text.partition("=")
        name = resolve_key(key.strip())
        values[name] = _parse_value(name, raw)
    return values


def build_config(file_path=None, overrides: dict | None = None) -> RunConfig:
    """Config file values overridden by flag values overridden by the
    KPFORGE_SEED environment variable."""
    values: dict = {}
    if file_path:
        values.update(read_config_file(file_path))
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        values[resolve_key(key)] = value
    config = RunConfig(**values)
    env_seed = os.environ.get("KPFORGE_SEED")
    if env_seed is not None:
        try:
            config.seed = int(env_seed)
        except ValueError as exc:
            raise UsageError(f"KPFORGE_SEED must be an integer, got {env_seed!r}") from exc
    return config


def write_config_file(path, config: RunConfig) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(config.to_text())
