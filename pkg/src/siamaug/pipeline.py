"""The end-to-end workflow shared by the CLI and the experiment scripts."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .augmentor import AugmentationPool, AugmentationStats, augment_log
from .config import ConfigError, RunConfig
from .event_log import (
    NEXT_ACTIVITY,
    OUTCOME,
    ColumnMapping,
    EventLog,
    LabeledExample,
    labeled_examples,
    parse_csv,
    parse_xes,
    temporal_split,
)
from .patterns import MinedPatterns, mine_all
from .siamese import EncoderConfig, TrainConfig, finetune, pretrain
from .siamese.train import Classifier, EpochRecord, PretrainResult
from .synthetic import xor_process_log

MAX_LEN_CAP = 64
FINETUNE_SEED_OFFSET = 1000
STRATEGIES = ("supervised-only", "random-pretrain", "statistical-pretrain")


def load_log(cfg: RunConfig) -> EventLog:
    d = cfg.data
    if d.synthetic is not None and not d.input:
        return xor_process_log(**d.synthetic)
    fmt = (d.format or d.input.rsplit(".", 1)[-1]).lower()
    if fmt == "csv":
        mapping = ColumnMapping(d.case_column, d.activity_column, d.timestamp_column)
        return parse_csv(d.input, mapping, max_events=d.max_events)
    if fmt == "xes":
        return parse_xes(d.input, max_events=d.max_events)
    raise ConfigError(f"unsupported log format {fmt!r}")


@dataclass
class Prepared:
    log: EventLog
    train: EventLog
    validation: EventLog
    test: EventLog
    encoder: EncoderConfig


def prepare(cfg: RunConfig) -> Prepared:
    log = load_log(cfg)
    split = temporal_split(log, tuple(cfg.split))
    e = cfg.encoder
    longest = max(len(t) for t in log.traces)
    max_len = e.max_len or min(longest + cfg.mining.lambda_max, MAX_LEN_CAP)
    enc = EncoderConfig(log.vocab.size, e.embed_dim, e.hidden_dim, max_len, e.encoder_variant, e.proj_dim)
    return Prepared(log, log.subset(split.train), log.subset(split.validation), log.subset(split.test), enc)


def mine(cfg: RunConfig, prep: Prepared) -> MinedPatterns:
    """Mine on the training split only."""
    patterns = mine_all(prep.train, cfg.mining)
    if patterns.is_empty:
        warnings.warn("no statistical patterns were mined; augmentation will use random fallbacks", stacklevel=2)
    return patterns


def check_patterns(patterns: MinedPatterns, prep: Prepared) -> None:
    if patterns.source_fingerprint != prep.train.fingerprint():
        raise ConfigError("patterns were not mined from this configuration's training split")


def pool_for(prep: Prepared, patterns: MinedPatterns, strategy: str = "statistical") -> AugmentationPool:
    return AugmentationPool.build(prep.log.vocab, patterns, use_statistical=strategy.startswith("statistical"))


def augment(prep: Prepared, patterns: MinedPatterns, factor: float, seed: int) -> tuple[EventLog, AugmentationStats]:
    stats = AugmentationStats()
    out = augment_log(prep.train, pool_for(prep, patterns), factor, np.random.default_rng(seed), stats)
    return out, stats


def task_targets(cfg: RunConfig, prep: Prepared) -> dict[str, set[int] | None]:
    """Prediction runs keyed by name: one for next-activity, one binary run per outcome target."""
    if cfg.task == NEXT_ACTIVITY:
        return {NEXT_ACTIVITY: None}
    out = {}
    for name in cfg.outcome_targets:
        try:
            out[name] = {prep.log.vocab.index(name)}
        except KeyError:
            raise ConfigError(f"outcome target {name!r} is not an activity of the log") from None
    return out


def examples_for(cfg: RunConfig, log: EventLog, outcome: set[int] | None) -> tuple[list[LabeledExample], int]:
    if outcome is None:
        return labeled_examples(log, NEXT_ACTIVITY), log.vocab.size
    return labeled_examples(log, OUTCOME, outcome), 2


def pretrain_config(cfg: RunConfig, seed: int, tau: float | None = None) -> TrainConfig:
    p = cfg.pretrain
    return TrainConfig(
        tau=p.tau if tau is None else tau,
        learning_rate=p.learning_rate,
        batch_size=p.batch_size,
        epochs=p.epochs,
        seed=seed,
        max_trials=p.max_trials,
    )


def finetune_config(cfg: RunConfig, seed: int) -> TrainConfig:
    f = cfg.finetune
    return TrainConfig(
        learning_rate=f.learning_rate, batch_size=f.batch_size, epochs=f.epochs, seed=seed + FINETUNE_SEED_OFFSET
    )


def run_pretrain(
    cfg: RunConfig, prep: Prepared, patterns: MinedPatterns, seed: int, strategy: str = "statistical"
) -> PretrainResult:
    prefixes = [e.prefix.activities for e in labeled_examples(prep.train, NEXT_ACTIVITY)]
    return pretrain(prefixes, pool_for(prep, patterns, strategy), prep.encoder, pretrain_config(cfg, seed))


def run_finetune(
    cfg: RunConfig,
    prep: Prepared,
    pretrained,
    outcome: set[int] | None,
    seed: int,
    patterns: MinedPatterns | None = None,
) -> tuple[Classifier, list[EpochRecord], float]:
    """Fine-tune (or train from scratch when ``pretrained`` is None) and return test accuracy."""
    train_log = prep.train
    if cfg.finetune.use_augmented and patterns is not None:
        train_log, _ = augment(prep, patterns, cfg.factors[0], seed)
    train_ex, n_classes = examples_for(cfg, train_log, outcome)
    val_ex, _ = examples_for(cfg, prep.validation, outcome)
    test_ex, _ = examples_for(cfg, prep.test, outcome)
    clf, history = finetune(
        pretrained, train_ex, n_classes, finetune_config(cfg, seed), prep.encoder, val_ex or None, init_seed=seed
    )
    return clf, history, clf.accuracy(test_ex)


def majority_baseline(cfg: RunConfig, prep: Prepared, outcome: set[int] | None) -> float:
    train_ex, _ = examples_for(cfg, prep.train, outcome)
    test_ex, _ = examples_for(cfg, prep.test, outcome)
    labels = [e.target for e in train_ex]
    majority = max(set(labels), key=lambda y: (labels.count(y), -y))
    return sum(e.target == majority for e in test_ex) / len(test_ex)


def summarize(values: list[float]) -> dict:
    arr = np.asarray(values, dtype=float)
    return {"mean": float(arr.mean()), "std": float(arr.std()), "values": [float(v) for v in arr]}


def ablate(cfg: RunConfig, prep: Prepared, patterns: MinedPatterns) -> dict[str, dict[str, dict]]:
    """Test accuracy per target and strategy over ``cfg.repetitions`` seeded repetitions.

    Within a repetition all strategies share the fine-tune seed and the initial
    encoder weights.
    """
    results: dict[str, dict[str, list[float]]] = {}
    targets = task_targets(cfg, prep)
    for i in range(cfg.repetitions):
        seed = cfg.seed + i
        pretrained = {
            "supervised-only": None,
            "random-pretrain": run_pretrain(cfg, prep, patterns, seed, "random").online,
            "statistical-pretrain": run_pretrain(cfg, prep, patterns, seed, "statistical").online,
        }
        for name, outcome in targets.items():
            for strategy in STRATEGIES:
                _, _, acc = run_finetune(cfg, prep, pretrained[strategy], outcome, seed, patterns)
                results.setdefault(name, {}).setdefault(strategy, []).append(acc)
    return {name: {s: summarize(v) for s, v in per.items()} for name, per in results.items()}
