"""Accuracy and the variant / prefix entropy measures of log variability."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

from .event_log import EventLog

INF_SENTINEL = math.inf


def accuracy(predictions: Sequence[int], labels: Sequence[int]) -> float:
    if len(predictions) != len(labels):
        raise ValueError(f"length mismatch: {len(predictions)} predictions, {len(labels)} labels")
    if len(labels) == 0:
        raise ValueError("accuracy of an empty set is undefined")
    return sum(int(p == y) for p, y in zip(predictions, labels)) / len(labels)


def shannon(counts: Iterable[int], base: float = 2.0) -> float:
    counts = [c for c in counts if c > 0]
    if len(counts) <= 1:
        return 0.0
    # entropy is scale-free; dividing by the gcd makes k equal counts all 1 and the result exactly log k
    g = math.gcd(*counts)
    counts = [c // g for c in counts]
    total = sum(counts)
    log = math.log2 if base == 2.0 else (lambda v: math.log(v, base))
    # log N - (1/N) sum c log c
    h = log(total) - sum(c * log(c) for c in counts if c > 1) / total
    return max(h, 0.0)


def _sequences(log) -> list[tuple]:
    if isinstance(log, EventLog):
        return log.sequences
    return [tuple(s) for s in log]


def trace_entropy(log, base: float = 2.0) -> float:
    """Entropy of the variant distribution. Accepts an EventLog or a list of sequences."""
    seqs = _sequences(log)
    if not seqs:
        raise ValueError("empty log")
    return shannon(Counter(seqs).values(), base)


def prefix_entropy(log, base: float = 2.0) -> float:
    """Entropy over all prefix occurrences; a trace of length T contributes T of them."""
    seqs = _sequences(log)
    if not seqs:
        raise ValueError("empty log")
    counts = Counter(s[:k] for s in seqs for k in range(1, len(s) + 1))
    return shannon(counts.values(), base)


def relative_change(h_base: float, h_aug: float) -> float:
    """Percentage increase; +inf when the base is 0 and the augmented log is not."""
    if h_base == 0.0:
        return 0.0 if h_aug == 0.0 else INF_SENTINEL
    return 100.0 * (h_aug - h_base) / h_base


@dataclass(frozen=True)
class EntropyReport:
    trace_entropy: float
    prefix_entropy: float
    relative_increase_trace: float
    relative_increase_prefix: float

    def to_dict(self) -> dict:
        return asdict(self)


def relative_increase(base, augmented, log_base: float = 2.0) -> EntropyReport:
    tb, ta = trace_entropy(base, log_base), trace_entropy(augmented, log_base)
    pb, pa = prefix_entropy(base, log_base), prefix_entropy(augmented, log_base)
    return EntropyReport(ta, pa, relative_change(tb, ta), relative_change(pb, pa))
