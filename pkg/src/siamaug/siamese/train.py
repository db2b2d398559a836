"""Siamese pretraining with an EMA target network, and supervised fine-tuning."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ..augmentor import (
    AugmentationPool,
    AugmentationStats,
    NotAugmentable,
    generate_view_pair,
    left_pad,
    pad_batch,
)
from ..event_log import LabeledExample
from .network import (
    EncoderConfig,
    NetworkParams,
    classifier_logits,
    classifier_loss_and_grads,
    collapse_metric,
    ema_update,
    init_params,
    loss_and_grads,
)


class TrainingError(RuntimeError):
    pass


class CollapseWarning(UserWarning):
    pass


@dataclass(frozen=True)
class TrainConfig:
    tau: float = 0.99
    learning_rate: float = 0.05
    batch_size: int = 32
    epochs: int = 10
    seed: int = 0
    collapse_floor: float = 0.01
    collapse_patience: int = 3
    max_trials: int = 30
    probe_size: int = 64

    def __post_init__(self):
        if not 0.0 <= self.tau < 1.0:
            raise ValueError(f"tau must lie in [0, 1), got {self.tau}")
        if self.learning_rate <= 0 or self.batch_size < 1 or self.epochs < 0:
            raise ValueError("learning_rate > 0, batch_size >= 1 and epochs >= 0 are required")


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    collapse_metric: float
    validation_accuracy: float | None = None


@dataclass
class PretrainResult:
    online: NetworkParams
    target: NetworkParams
    history: list[EpochRecord]
    stats: AugmentationStats = field(default_factory=AugmentationStats)


def _streams(seed: int, n: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def sgd_step(params: NetworkParams, grads: dict[str, np.ndarray], lr: float) -> None:
    for k, g in grads.items():
        params.arrays[k] -= lr * g


def _check_finite(loss: float, grads: dict[str, np.ndarray], where: str) -> None:
    bad = [k for k, g in grads.items() if not np.all(np.isfinite(g))]
    if bad or not np.isfinite(loss):
        raise TrainingError(f"{where}: non-finite loss ({loss}) or gradients in {bad}")


def probe_batch(sequences: Sequence[tuple[int, ...]], size: int, max_len: int) -> np.ndarray:
    """The first ``size`` distinct sequences (in order), left-padded to ``max_len``."""
    distinct = list(dict.fromkeys(tuple(s) for s in sequences))[:size]
    return left_pad(distinct, max_len)


def pretrain(
    sequences: Sequence[tuple[int, ...]],
    pool: AugmentationPool,
    encoder_cfg: EncoderConfig,
    train_cfg: TrainConfig,
    init: NetworkParams | None = None,
) -> PretrainResult:
    """BYOL-style pretraining on prefix sequences.

    Each step draws a batch, builds two distinct views per prefix, takes one SGD
    step on the online network and then moves the target towards it by EMA.
    Deterministic for a fixed seed.
    """
    init_rng, order_rng, aug_rng = _streams(train_cfg.seed, 3)
    sequences = [tuple(s) for s in sequences]
    if not sequences:
        raise TrainingError("no prefixes to pretrain on")
    online = init.copy() if init is not None else init_params(encoder_cfg, init_rng)
    target = online.without_predictor()
    probe = probe_batch(sequences, train_cfg.probe_size, encoder_cfg.max_len)
    stats = AugmentationStats()
    history: list[EpochRecord] = []
    low_streak = 0
    for epoch in range(1, train_cfg.epochs + 1):
        order = order_rng.permutation(len(sequences))
        losses = []
        for start in range(0, len(order), train_cfg.batch_size):
            pairs = []
            for i in order[start : start + train_cfg.batch_size]:
                try:
                    pairs.append(generate_view_pair(sequences[i], pool, aug_rng, train_cfg.max_trials, stats))
                except NotAugmentable:
                    continue
            if not pairs:
                continue
            batch = pad_batch(pairs, encoder_cfg.max_len)
            loss, grads = loss_and_grads(online, target, batch.v, batch.v_prime)
            _check_finite(loss, grads, f"epoch {epoch}, batch at {start}")
            sgd_step(online, grads, train_cfg.learning_rate)
            target = ema_update(target, online, train_cfg.tau)
            losses.append(loss)
        if not losses:
            raise TrainingError("no augmentable prefixes")
        cm = collapse_metric(online, probe) if len(probe) >= 2 else float("nan")
        history.append(EpochRecord(epoch, float(np.mean(losses)), cm))
        low_streak = low_streak + 1 if cm < train_cfg.collapse_floor else 0
        if low_streak == train_cfg.collapse_patience:
            warnings.warn(
                f"possible representational collapse: embedding std {cm:.4g} below "
                f"{train_cfg.collapse_floor} for {low_streak} epochs",
                CollapseWarning,
                stacklevel=2,
            )
    return PretrainResult(online, target, history, stats)


# -- fine-tuning ------------------------------------------------------------------------------


@dataclass
class Classifier:
    params: NetworkParams
    num_classes: int

    def logits(self, sequences: Sequence[tuple[int, ...]], batch_size: int = 512) -> np.ndarray:
        max_len = self.params.config.max_len
        out = []
        for start in range(0, len(sequences), batch_size):
            chunk = sequences[start : start + batch_size]
            length = min(max(len(s) for s in chunk), max_len)
            out.append(classifier_logits(self.params, left_pad(list(chunk), length)))
        return np.vstack(out) if out else np.zeros((0, self.num_classes))

    def predict(self, sequences: Sequence[tuple[int, ...]]) -> np.ndarray:
        return self.logits(sequences).argmax(-1)

    def accuracy(self, examples: Sequence[LabeledExample]) -> float:
        from ..metrics import accuracy

        preds = self.predict([e.prefix.activities for e in examples])
        return accuracy(preds.tolist(), [e.target for e in examples])


def init_classifier(
    encoder_cfg: EncoderConfig,
    num_classes: int,
    head_seed: int,
    pretrained: NetworkParams | None = None,
    encoder_seed: int | None = None,
) -> Classifier:
    """Encoder from ``pretrained`` (projector / predictor dropped) or freshly initialised, plus a linear head.

    A fresh encoder drawn with ``encoder_seed`` equals the one :func:`pretrain`
    starts from under that seed.
    """
    if pretrained is None:
        init_rng = _streams(head_seed if encoder_seed is None else encoder_seed, 3)[0]
        enc = init_params(encoder_cfg, init_rng, predictor=False).encoder_only()
    else:
        enc = pretrained.encoder_only()
    head_rng = np.random.default_rng(np.random.SeedSequence(head_seed).spawn(4)[3])
    h = enc.config.hidden_dim
    enc.arrays["head_W"] = head_rng.normal(0.0, 1.0 / np.sqrt(h), size=(h, num_classes))
    enc.arrays["head_b"] = np.zeros(num_classes)
    return Classifier(enc, num_classes)


def finetune(
    pretrained: NetworkParams | None,
    examples: Sequence[LabeledExample],
    num_classes: int,
    train_cfg: TrainConfig,
    encoder_cfg: EncoderConfig | None = None,
    eval_examples: Sequence[LabeledExample] | None = None,
    init_seed: int | None = None,
) -> tuple[Classifier, list[EpochRecord]]:
    """End-to-end cross-entropy training of encoder + softmax head.

    ``init_seed`` seeds the fresh encoder when ``pretrained`` is None; the head
    and the batch order always follow ``train_cfg.seed``.
    """
    if not examples:
        raise TrainingError("no training examples")
    labels = np.array([e.target for e in examples], dtype=np.int64)
    if len(np.unique(labels)) < 2:
        raise TrainingError("fine-tuning needs at least two distinct classes in the labels")
    if labels.max() >= num_classes:
        raise TrainingError(f"label {labels.max()} outside {num_classes} classes")
    encoder_cfg = encoder_cfg or pretrained.config
    clf = init_classifier(encoder_cfg, num_classes, train_cfg.seed, pretrained, init_seed)
    order_rng = _streams(train_cfg.seed, 3)[2]
    seqs = [e.prefix.activities for e in examples]
    max_len = encoder_cfg.max_len
    history = []
    for epoch in range(1, train_cfg.epochs + 1):
        order = order_rng.permutation(len(seqs))
        losses = []
        for start in range(0, len(order), train_cfg.batch_size):
            idx = order[start : start + train_cfg.batch_size]
            chunk = [seqs[i] for i in idx]
            x = left_pad(chunk, min(max(len(s) for s in chunk), max_len))
            loss, grads = classifier_loss_and_grads(clf.params, x, labels[idx])
            _check_finite(loss, grads, f"fine-tune epoch {epoch}")
            sgd_step(clf.params, grads, train_cfg.learning_rate)
            losses.append(loss)
        val = clf.accuracy(eval_examples) if eval_examples else None
        history.append(EpochRecord(epoch, float(np.mean(losses)), float("nan"), val))
    return clf, history


def write_history(path: str | Path, history: Sequence[EpochRecord]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "loss", "collapse_metric", "validation_accuracy"])
        for r in history:
            w.writerow([r.epoch, repr(r.loss), repr(r.collapse_metric),
                        "" if r.validation_accuracy is None else repr(r.validation_accuracy)])
