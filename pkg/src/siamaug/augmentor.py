"""View-pair generation for Siamese pretraining and additive log upsampling."""

from __future__ import annotations

import json
import math
import warnings
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .event_log import PAD, Event, EventLog, Trace
from .patterns import MinedPatterns, Seq
from .transforms import (
    RANDOM,
    STATISTICAL,
    AppliedEdit,
    Kind,
    RewriteResult,
    Transformation,
    rand_insert,
)

MAX_TRIALS = 30


class AugmentationWarning(UserWarning):
    pass


class NotAugmentable(ValueError):
    """No transformation in the pool applies to the sequence."""


@dataclass(frozen=True)
class AugmentationPool:
    statistical: tuple[Transformation, ...]
    fallback: tuple[Transformation, ...]

    @classmethod
    def build(cls, vocab, patterns: MinedPatterns | None, use_statistical: bool = True):
        """Standard pool. ``use_statistical=False`` gives the random-only pool used in ablations."""
        stat = ()
        if use_statistical and patterns is not None:
            stat = tuple(Transformation(k, vocab, patterns) for k in STATISTICAL)
        return cls(stat, tuple(Transformation(k, vocab) for k in RANDOM))


@dataclass
class AugmentationStats:
    """Counters kept while generating views; used for the pipeline's self-checks."""

    applied: Counter = field(default_factory=Counter)
    pool_fallback: int = 0
    # pool fallback chosen although a statistical transform applied; must stay 0
    fallback_violations: int = 0
    exhausted: int = 0
    view_equals_input: int = 0
    identical_views: int = 0
    skipped: int = 0
    pairs: int = 0

    def as_dict(self) -> dict:
        return {
            "applied": {k.value if isinstance(k, Kind) else str(k): v for k, v in sorted(self.applied.items())},
            "pool_fallback": self.pool_fallback,
            "fallback_violations": self.fallback_violations,
            "exhausted": self.exhausted,
            "view_equals_input": self.view_equals_input,
            "identical_views": self.identical_views,
            "skipped": self.skipped,
            "pairs": self.pairs,
        }


def select_applicable(x: Seq, pool: AugmentationPool) -> list[Transformation]:
    if not x:
        raise ValueError("cannot augment an empty sequence")
    stat = [t for t in pool.statistical if t.applicable(x)]
    if stat:
        return stat
    return [t for t in pool.fallback if t.applicable(x)]


@dataclass(frozen=True)
class ViewPair:
    original: Seq
    v: Seq
    v_prime: Seq
    pad_length: int = 0
    kinds: tuple[Kind, Kind] | None = None


def _forced_distinct(x: Seq, v: Seq, vocab, rng: np.random.Generator) -> RewriteResult:
    """A single-position replacement of ``x`` that differs from ``v``.

    When no replacement of ``x`` can differ from ``v`` (tiny vocabularies) a
    random insertion into ``v`` is used instead, which always changes length.
    """
    real = vocab.real_indices
    options = [
        (pos, a) for pos in range(len(x)) for a in real
        if a != x[pos] and x[:pos] + (a,) + x[pos + 1 :] != v
    ]
    if options:
        pos, a = options[int(rng.integers(len(options)))]
        return RewriteResult(
            x[:pos] + (a,) + x[pos + 1 :], AppliedEdit(Kind.RAND_REPLACE, pos, (x[pos],), (a,))
        )
    return rand_insert(v, vocab, rng)


def generate_view_pair(
    x: Seq,
    pool: AugmentationPool,
    rng: np.random.Generator,
    max_trials: int = MAX_TRIALS,
    stats: AugmentationStats | None = None,
) -> ViewPair:
    """Two distinct augmentations of ``x``.

    The first view uses a uniformly sampled applicable transform. The second is
    resampled up to ``max_trials`` times until it differs from the first; after
    that a forced-distinct random replacement of ``x`` is used.
    """
    x = tuple(x)
    candidates = select_applicable(x, pool)
    if not candidates:
        if stats is not None:
            stats.skipped += 1
        raise NotAugmentable(f"no transformation applies to {x}")
    statistical_available = any(t.kind.statistical for t in candidates)

    t1 = candidates[int(rng.integers(len(candidates)))]
    v = t1(x, rng).sequence
    v_prime, k2 = None, None
    for _ in range(max_trials):
        t2 = candidates[int(rng.integers(len(candidates)))]
        out = t2(x, rng).sequence
        if out != v:
            v_prime, k2 = out, t2.kind
            break
    exhausted = v_prime is None
    if exhausted:
        res = _forced_distinct(x, v, t1.vocab, rng)
        v_prime, k2 = res.sequence, res.applied_rule.kind

    if stats is not None:
        stats.pairs += 1
        stats.applied[t1.kind] += 1
        stats.applied[k2] += 1
        if not statistical_available:
            stats.pool_fallback += 1
        elif not (t1.kind.statistical and (exhausted or k2.statistical)):
            stats.fallback_violations += 1
        stats.exhausted += exhausted
        stats.view_equals_input += (v == x) + (v_prime == x)
        stats.identical_views += v == v_prime
    return ViewPair(x, v, v_prime, 0, (t1.kind, k2))


@dataclass(frozen=True)
class PaddedBatch:
    v: np.ndarray
    v_prime: np.ndarray
    pad_length: int
    pairs: tuple[ViewPair, ...]


def left_pad(seqs: list[Seq], length: int) -> np.ndarray:
    """Left-pad with PAD to ``length``; longer sequences keep their last ``length`` tokens."""
    out = np.full((len(seqs), length), PAD, dtype=np.int64)
    for i, s in enumerate(seqs):
        s = s[-length:] if length else ()
        if s:
            out[i, length - len(s) :] = s
    return out


def pad_batch(pairs: list[ViewPair], max_len: int | None = None) -> PaddedBatch:
    """Pad every view to the longest view in the batch (capped at ``max_len``)."""
    if not pairs:
        raise ValueError("empty batch")
    length = max(max(len(p.v), len(p.v_prime)) for p in pairs)
    if max_len is not None:
        length = min(length, max_len)
    pairs = tuple(replace(p, pad_length=length) for p in pairs)
    return PaddedBatch(
        left_pad([p.v for p in pairs], length),
        left_pad([p.v_prime for p in pairs], length),
        length,
        pairs,
    )


# -- whole-log upsampling ---------------------------------------------------------------


def n_synthetic(n_traces: int, factor: float) -> int:
    # round first so (1.1 - 1) * 10 = 1.0000000000000009 does not ceil to 2
    return math.ceil(round((factor - 1.0) * n_traces, 9))


def _edited_events(trace: Trace, edit: AppliedEdit) -> tuple[Event, ...]:
    ev = trace.events
    new = tuple(Event(a) for a in edit.inserted)
    return ev[: edit.start] + new + ev[edit.start + len(edit.removed) :]


def augment_log(
    log: EventLog,
    pool: AugmentationPool,
    factor: float,
    rng: np.random.Generator,
    stats: AugmentationStats | None = None,
) -> EventLog:
    """Original traces plus ``ceil((factor - 1) * N)`` single-edit synthetic traces.

    Synthetic traces are drawn uniformly from the augmentable originals. Events
    untouched by the edit keep their timestamps and attributes; inserted events
    have none.
    """
    if factor < 1.0:
        raise ValueError(f"augmentation factor must be >= 1, got {factor}")
    n_new = n_synthetic(len(log), factor)
    if n_new == 0:
        return log
    candidates = [(t, select_applicable(t.activities, pool)) for t in log.traces]
    candidates = [(t, c) for t, c in candidates if c]
    if not candidates:
        warnings.warn("no trace can be augmented; returning the original log", AugmentationWarning, stacklevel=2)
        return log
    taken = {t.case_id for t in log.traces}
    synthetic = []
    for counter in range(n_new):
        trace, transforms = candidates[int(rng.integers(len(candidates)))]
        t = transforms[int(rng.integers(len(transforms)))]
        res = t(trace.activities, rng)
        if stats is not None:
            stats.applied[t.kind] += 1
        case_id = f"{trace.case_id}_aug{counter}"
        while case_id in taken:
            case_id += "_"
        taken.add(case_id)
        synthetic.append(Trace(case_id, _edited_events(trace, res.applied_rule)))
    return EventLog(log.traces + tuple(synthetic), log.vocab)


def write_sidecar(path: str | Path, factor: float, seed: int, patterns: MinedPatterns | None,
                  stats: AugmentationStats, n_original: int, n_total: int) -> None:
    doc = {
        "factor": factor,
        "seed": seed,
        "pattern_fingerprint": patterns.source_fingerprint if patterns else None,
        "n_original": n_original,
        "n_total": n_total,
        "transform_counts": stats.as_dict()["applied"],
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
