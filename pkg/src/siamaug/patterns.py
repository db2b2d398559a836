"""Frequency-grounded pattern mining behind the statistical transformations.

Three structures are mined from a filtered training log:

* frequent direct followers ``(b, c)``,
* insertion rules ``b, pi, c`` whose endpoints form a frequent direct follower,
* XOR replacement sets: two or more alternatives ``rho`` between shared endpoints ``(d, e)``.

Threshold comparisons are exact (``fractions.Fraction``), so a support that
equals the threshold is retained.
"""

from __future__ import annotations

import json
import warnings
from collections import Counter
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from functools import cached_property
from pathlib import Path

from .event_log import EventLog

FORMAT_VERSION = 1

Seq = tuple[int, ...]


class MiningWarning(UserWarning):
    pass


@dataclass(frozen=True)
class MiningConfig:
    alpha: float = 1e-4
    beta: float = 1e-4
    gamma: float = 1e-4
    delta: float = 1e-4
    lambda_max: int = 4

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma", "delta"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if int(self.lambda_max) != self.lambda_max or self.lambda_max < 1:
            raise ValueError(f"lambda_max must be a positive integer, got {self.lambda_max}")


@dataclass(frozen=True)
class FollowerPair:
    b: int
    c: int
    count: int
    support: float


@dataclass(frozen=True)
class InsertionRule:
    b: int
    c: int
    pi: Seq
    trace_support: float


@dataclass(frozen=True)
class XorReplacementSet:
    d: int
    e: int
    alternatives: tuple[Seq, ...]
    supports: tuple[float, ...] = ()


def meets(count: int, total: int, threshold: float) -> bool:
    """``count / total >= threshold`` evaluated exactly."""
    return Fraction(count) >= Fraction(threshold) * total


# -- mining steps ----------------------------------------------------------------


def filter_log(log: EventLog, alpha: float) -> EventLog:
    """Keep traces whose every activity occurs in at least ``alpha`` of all cases."""
    if not len(log):
        raise ValueError("cannot filter an empty log")
    n = len(log)
    case_counts = Counter(a for seq in log.sequences for a in set(seq))
    frequent = {a for a, cnt in case_counts.items() if meets(cnt, n, alpha)}
    kept = tuple(t for t in log.traces if all(a in frequent for a in t.activities))
    if not kept:
        warnings.warn(
            f"alpha={alpha} removed every trace; statistical patterns will be empty",
            MiningWarning,
            stacklevel=2,
        )
    return EventLog(kept, log.vocab)


def mine_direct_followers(filtered: EventLog, beta: float) -> list[FollowerPair]:
    counts = Counter(
        (seq[i], seq[i + 1]) for seq in filtered.sequences for i in range(len(seq) - 1)
    )
    total = sum(counts.values())
    if total == 0:
        return []
    return [
        FollowerPair(b, c, cnt, cnt / total)
        for (b, c), cnt in sorted(counts.items())
        if meets(cnt, total, beta)
    ]


def _windows(seq: Seq, lambda_max: int):
    """Yield every ``(start, end, middle)`` with ``1 <= len(middle) <= lambda_max``."""
    n = len(seq)
    for i in range(n):
        for length in range(1, lambda_max + 1):
            j = i + length + 1
            if j >= n:
                break
            yield seq[i], seq[j], seq[i + 1 : j]


def _trace_counts(filtered: EventLog, lambda_max: int, pairs=None) -> Counter:
    # one vote per trace, however often the window repeats inside it
    counts: Counter = Counter()
    for seq in filtered.sequences:
        seen = {
            w for w in _windows(seq, lambda_max) if pairs is None or (w[0], w[1]) in pairs
        }
        counts.update(seen)
    return counts


def mine_intermediate_sequences(
    filtered: EventLog, followers: list[FollowerPair], gamma: float, lambda_max: int
) -> list[InsertionRule]:
    pairs = {(f.b, f.c) for f in followers}
    n = len(filtered)
    if not pairs or not n:
        return []
    counts = _trace_counts(filtered, lambda_max, pairs)
    return [
        InsertionRule(b, c, pi, cnt / n)
        for (b, c, pi), cnt in sorted(counts.items())
        if meets(cnt, n, gamma)
    ]


def mine_xor_structures(filtered: EventLog, delta: float, lambda_max: int) -> list[XorReplacementSet]:
    n = len(filtered)
    if not n:
        return []
    grouped: dict[tuple[int, int], list[tuple[Seq, float]]] = {}
    for (d, e, rho), cnt in sorted(_trace_counts(filtered, lambda_max).items()):
        if meets(cnt, n, delta):
            grouped.setdefault((d, e), []).append((rho, cnt / n))
    return [
        XorReplacementSet(d, e, tuple(r for r, _ in alts), tuple(s for _, s in alts))
        for (d, e), alts in sorted(grouped.items())
        if len(alts) >= 2
    ]


# -- aggregate ---------------------------------------------------------------------


@dataclass(frozen=True)
class MinedPatterns:
    followers: tuple[FollowerPair, ...] = ()
    insertion_rules: tuple[InsertionRule, ...] = ()
    xor_sets: tuple[XorReplacementSet, ...] = ()
    config: MiningConfig = field(default_factory=MiningConfig)
    source_fingerprint: str = ""

    def __post_init__(self):
        pairs = {(f.b, f.c) for f in self.followers}
        for r in self.insertion_rules:
            if (r.b, r.c) not in pairs:
                raise ValueError(f"insertion rule {r} has no frequent direct follower")

    @cached_property
    def insertions_by_pair(self) -> dict[tuple[int, int], tuple[Seq, ...]]:
        out: dict[tuple[int, int], list[Seq]] = {}
        for r in self.insertion_rules:
            out.setdefault((r.b, r.c), []).append(r.pi)
        return {k: tuple(v) for k, v in out.items()}

    @cached_property
    def insertion_windows(self) -> frozenset[tuple[int, int, Seq]]:
        return frozenset((r.b, r.c, r.pi) for r in self.insertion_rules)

    @cached_property
    def xor_by_pair(self) -> dict[tuple[int, int], tuple[Seq, ...]]:
        return {(s.d, s.e): s.alternatives for s in self.xor_sets if len(s.alternatives) >= 2}

    @cached_property
    def max_pattern_length(self) -> int:
        lengths = [len(r.pi) for r in self.insertion_rules]
        lengths += [len(a) for s in self.xor_sets for a in s.alternatives]
        return max(lengths, default=0)

    @property
    def is_empty(self) -> bool:
        return not self.insertion_rules and not self.xor_sets

    # serialization -- activities are stored by name so files survive re-indexing

    def to_dict(self, vocab) -> dict:
        name = vocab.name_of
        return {
            "format": "siamaug.patterns",
            "version": FORMAT_VERSION,
            "config": asdict(self.config),
            "source_fingerprint": self.source_fingerprint,
            "followers": [
                {"b": name(f.b), "c": name(f.c), "count": f.count, "support": f.support}
                for f in self.followers
            ],
            "insertion_rules": [
                {"b": name(r.b), "c": name(r.c), "pi": [name(a) for a in r.pi], "trace_support": r.trace_support}
                for r in self.insertion_rules
            ],
            "xor_sets": [
                {
                    "d": name(s.d),
                    "e": name(s.e),
                    "alternatives": [[name(a) for a in alt] for alt in s.alternatives],
                    "supports": list(s.supports),
                }
                for s in self.xor_sets
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict, vocab) -> "MinedPatterns":
        if doc.get("format") != "siamaug.patterns" or doc.get("version") != FORMAT_VERSION:
            raise ValueError("not a siamaug patterns document of a supported version")
        idx = vocab.index
        return cls(
            followers=tuple(
                FollowerPair(idx(f["b"]), idx(f["c"]), f["count"], f["support"]) for f in doc["followers"]
            ),
            insertion_rules=tuple(
                InsertionRule(idx(r["b"]), idx(r["c"]), tuple(idx(a) for a in r["pi"]), r["trace_support"])
                for r in doc["insertion_rules"]
            ),
            xor_sets=tuple(
                XorReplacementSet(
                    idx(s["d"]),
                    idx(s["e"]),
                    tuple(tuple(idx(a) for a in alt) for alt in s["alternatives"]),
                    tuple(s["supports"]),
                )
                for s in doc["xor_sets"]
            ),
            config=MiningConfig(**doc["config"]),
            source_fingerprint=doc["source_fingerprint"],
        )

    def save(self, path: str | Path, vocab) -> None:
        Path(path).write_text(json.dumps(self.to_dict(vocab), indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path, vocab) -> "MinedPatterns":
        return cls.from_dict(json.loads(Path(path).read_text()), vocab)


def mine_all(log: EventLog, config: MiningConfig | None = None) -> MinedPatterns:
    """Filter once, then mine followers, insertion rules and XOR sets on the same filtered log."""
    config = config or MiningConfig()
    filtered = filter_log(log, config.alpha)
    followers = mine_direct_followers(filtered, config.beta)
    rules = mine_intermediate_sequences(filtered, followers, config.gamma, config.lambda_max)
    xors = mine_xor_structures(filtered, config.delta, config.lambda_max)
    return MinedPatterns(tuple(followers), tuple(rules), tuple(xors), config, log.fingerprint())
