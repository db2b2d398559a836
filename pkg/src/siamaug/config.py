"""Run configuration: one JSON document, overridable from the command line."""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from pathlib import Path
from typing import Any

from .event_log import NEXT_ACTIVITY, OUTCOME
from .patterns import MiningConfig
from .siamese.network import EMBED_POOL_MLP, VARIANTS

OUTPUT_DIR_ENV = "SIAMAUG_OUTPUT_DIR"


class ConfigError(ValueError):
    pass


@dataclass
class DataConfig:
    input: str = ""
    format: str | None = None
    case_column: str = "case:concept:name"
    activity_column: str = "concept:name"
    timestamp_column: str = "time:timestamp"
    max_events: int | None = None
    name: str | None = None
    # synthetic fixture instead of a file: {"n_traces": 500, "seed": 0, "noise": 0.05}
    synthetic: dict | None = None


@dataclass
class EncoderSection:
    embed_dim: int = 16
    hidden_dim: int = 32
    max_len: int | None = None
    encoder_variant: str = EMBED_POOL_MLP
    proj_dim: int | None = None


@dataclass
class PretrainSection:
    tau: float = 0.99
    learning_rate: float = 0.05
    batch_size: int = 32
    epochs: int = 10
    max_trials: int = 30


@dataclass
class FinetuneSection:
    learning_rate: float = 0.1
    batch_size: int = 32
    epochs: int = 40
    use_augmented: bool = False


@dataclass
class RunConfig:
    data: DataConfig = field(default_factory=DataConfig)
    mining: MiningConfig = field(default_factory=MiningConfig)
    factors: list[float] = field(default_factory=lambda: [1.2, 1.5, 2.0])
    task: str = NEXT_ACTIVITY
    outcome_targets: list[str] = field(default_factory=list)
    split: list[float] = field(default_factory=lambda: [0.65, 0.15, 0.20])
    encoder: EncoderSection = field(default_factory=EncoderSection)
    pretrain: PretrainSection = field(default_factory=PretrainSection)
    finetune: FinetuneSection = field(default_factory=FinetuneSection)
    seed: int = 0
    repetitions: int = 5
    output_dir: str = "runs"

    @property
    def dataset_name(self) -> str:
        if self.data.name:
            return self.data.name
        if self.data.input:
            return Path(self.data.input).stem
        return "synthetic"

    def validate(self) -> None:
        if not self.data.input and self.data.synthetic is None:
            raise ConfigError("data.input (or data.synthetic) is required")
        if self.data.input and not Path(self.data.input).exists():
            raise ConfigError(f"input log {self.data.input!r} does not exist")
        if self.task not in (NEXT_ACTIVITY, OUTCOME):
            raise ConfigError(f"task must be {NEXT_ACTIVITY!r} or {OUTCOME!r}")
        if self.task == OUTCOME and not self.outcome_targets:
            raise ConfigError("outcome task needs at least one entry in outcome_targets")
        if len(self.split) != 3 or any(f <= 0 for f in self.split) or abs(sum(self.split) - 1) > 1e-9:
            raise ConfigError(f"split must be three positive fractions summing to 1, got {self.split}")
        if any(f < 1.0 for f in self.factors):
            raise ConfigError("augmentation factors must be >= 1")
        if self.repetitions < 1:
            raise ConfigError("repetitions must be >= 1")
        if self.encoder.encoder_variant not in VARIANTS:
            raise ConfigError(f"encoder_variant must be one of {VARIANTS}")
        if not 0.0 <= self.pretrain.tau < 1.0:
            raise ConfigError("pretrain.tau must lie in [0, 1)")
        for section in (self.encoder,):
            for name in ("embed_dim", "hidden_dim"):
                if getattr(section, name) < 1:
                    raise ConfigError(f"encoder.{name} must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)

    def fingerprint(self, *sections: str) -> str:
        """Hash of the named top-level sections (all when none given)."""
        doc = self.to_dict()
        if sections:
            doc = {k: doc[k] for k in sections}
        return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()[:16]


def _build(cls, data: dict[str, Any]):
    known = {f.name: f for f in fields(cls)}
    unknown = set(data) - set(known)
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    kwargs = {}
    for name, value in data.items():
        default = known[name].default_factory() if callable(known[name].default_factory) else None
        if is_dataclass(default) and isinstance(value, dict):
            value = _build(type(default), {**asdict(default), **value})
        kwargs[name] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def from_dict(doc: dict) -> RunConfig:
    return _build(RunConfig, doc)


def load_config(path: str | Path | None, overrides: list[str] = ()) -> RunConfig:
    doc: dict = {}
    if path is not None:
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for item in overrides:
        key, sep, raw = item.partition("=")
        if not sep:
            raise ConfigError(f"override {item!r} is not KEY=VALUE")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = doc
        *parents, leaf = key.split(".")
        for p in parents:
            node = node.setdefault(p, {})
        node[leaf] = value
    cfg = from_dict(doc)
    if os.environ.get(OUTPUT_DIR_ENV) and not any(o.startswith("output_dir=") for o in overrides):
        cfg.output_dir = os.environ[OUTPUT_DIR_ENV]
    return cfg
