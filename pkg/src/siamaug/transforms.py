"""Trace rewriters: three statistical ones driven by mined patterns, three random fallbacks.

Every rewriter performs exactly one splice ``seq[:start] + inserted + seq[start + len(removed):]``
at a site chosen uniformly among all valid (position, rule) pairs, and reports that
splice in :class:`AppliedEdit`.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .event_log import ActivityVocab
from .patterns import MinedPatterns, Seq


class ContractViolation(RuntimeError):
    """A rewriter was called on a sequence it cannot rewrite."""


class Kind(str, enum.Enum):
    STAT_INSERT = "StatInsert"
    STAT_DELETE = "StatDelete"
    STAT_REPLACE = "StatReplace"
    RAND_INSERT = "RandInsert"
    RAND_DELETE = "RandDelete"
    RAND_REPLACE = "RandReplace"

    @property
    def statistical(self) -> bool:
        return self in STATISTICAL


STATISTICAL = (Kind.STAT_INSERT, Kind.STAT_DELETE, Kind.STAT_REPLACE)
RANDOM = (Kind.RAND_INSERT, Kind.RAND_DELETE, Kind.RAND_REPLACE)


@dataclass(frozen=True)
class AppliedEdit:
    kind: Kind
    start: int
    removed: Seq
    inserted: Seq
    # statistical rules only: the endpoints that bracket the edited window
    anchors: tuple[int, int] | None = None


@dataclass(frozen=True)
class RewriteResult:
    sequence: Seq
    applied_rule: AppliedEdit


def _splice(seq: Seq, start: int, removed: Seq, inserted: Seq) -> Seq:
    return seq[:start] + inserted + seq[start + len(removed) :]


def _pick(sites: list, rng: np.random.Generator):
    return sites[int(rng.integers(len(sites)))]


# -- site enumeration ------------------------------------------------------------


def insert_sites(seq: Seq, patterns: MinedPatterns) -> list[tuple[int, Seq]]:
    by_pair = patterns.insertions_by_pair
    return [
        (i, pi)
        for i in range(len(seq) - 1)
        for pi in by_pair.get((seq[i], seq[i + 1]), ())
    ]


def _bracketed(seq: Seq, lambda_max: int):
    n = len(seq)
    for i in range(n):
        for length in range(1, min(lambda_max, n - i - 2) + 1):
            yield i, seq[i], seq[i + length + 1], seq[i + 1 : i + 1 + length]


def delete_sites(seq: Seq, patterns: MinedPatterns) -> list[tuple[int, Seq]]:
    rules = patterns.insertion_windows
    lam = patterns.max_pattern_length
    return [(i, pi) for i, b, c, pi in _bracketed(seq, lam) if (b, c, pi) in rules]


def replace_sites(seq: Seq, patterns: MinedPatterns) -> list[tuple[int, Seq, tuple[Seq, ...]]]:
    xor = patterns.xor_by_pair
    lam = patterns.max_pattern_length
    sites = []
    for i, d, e, rho in _bracketed(seq, lam):
        alts = xor.get((d, e))
        if alts is not None and rho in alts:
            sites.append((i, rho, alts))
    return sites


# -- statistical rewriters -----------------------------------------------------------


def stat_insert(seq: Seq, patterns: MinedPatterns, rng: np.random.Generator) -> RewriteResult:
    seq = tuple(seq)
    sites = insert_sites(seq, patterns)
    if not sites:
        raise ContractViolation("StatInsert: no frequent direct follower with an insertion rule")
    i, pi = _pick(sites, rng)
    edit = AppliedEdit(Kind.STAT_INSERT, i + 1, (), pi, (seq[i], seq[i + 1]))
    return RewriteResult(_splice(seq, i + 1, (), pi), edit)


def stat_delete(seq: Seq, patterns: MinedPatterns, rng: np.random.Generator) -> RewriteResult:
    seq = tuple(seq)
    sites = delete_sites(seq, patterns)
    if not sites:
        raise ContractViolation("StatDelete: no intermediate sequence matches a rule")
    i, pi = _pick(sites, rng)
    edit = AppliedEdit(Kind.STAT_DELETE, i + 1, pi, (), (seq[i], seq[i + 1 + len(pi)]))
    return RewriteResult(_splice(seq, i + 1, pi, ()), edit)


def stat_replace(seq: Seq, patterns: MinedPatterns, rng: np.random.Generator) -> RewriteResult:
    seq = tuple(seq)
    sites = replace_sites(seq, patterns)
    if not sites:
        raise ContractViolation("StatReplace: no segment matches an XOR alternative")
    i, rho, alts = _pick(sites, rng)
    rho_new = _pick([a for a in alts if a != rho], rng)
    edit = AppliedEdit(Kind.STAT_REPLACE, i + 1, rho, rho_new, (seq[i], seq[i + 1 + len(rho)]))
    return RewriteResult(_splice(seq, i + 1, rho, rho_new), edit)


# -- random rewriters ----------------------------------------------------------------


def _real(vocab: ActivityVocab | Seq) -> Seq:
    return vocab.real_indices if isinstance(vocab, ActivityVocab) else tuple(vocab)


def rand_insert(seq: Seq, vocab: ActivityVocab | Seq, rng: np.random.Generator) -> RewriteResult:
    seq, real = tuple(seq), _real(vocab)
    if not real:
        raise ContractViolation("RandInsert: empty vocabulary")
    pos = int(rng.integers(len(seq) + 1))
    act = real[int(rng.integers(len(real)))]
    return RewriteResult(_splice(seq, pos, (), (act,)), AppliedEdit(Kind.RAND_INSERT, pos, (), (act,)))


def rand_delete(seq: Seq, rng: np.random.Generator) -> RewriteResult:
    seq = tuple(seq)
    if len(seq) < 2:
        raise ContractViolation("RandDelete: sequence too short")
    pos = int(rng.integers(len(seq)))
    return RewriteResult(_splice(seq, pos, (seq[pos],), ()), AppliedEdit(Kind.RAND_DELETE, pos, (seq[pos],), ()))


def rand_replace(seq: Seq, vocab: ActivityVocab | Seq, rng: np.random.Generator) -> RewriteResult:
    seq, real = tuple(seq), _real(vocab)
    if len(real) < 2 or not seq:
        raise ContractViolation("RandReplace: needs a non-empty sequence and two real activities")
    pos = int(rng.integers(len(seq)))
    act = _pick([a for a in real if a != seq[pos]], rng)
    edit = AppliedEdit(Kind.RAND_REPLACE, pos, (seq[pos],), (act,))
    return RewriteResult(_splice(seq, pos, (seq[pos],), (act,)), edit)


# -- the pool element --------------------------------------------------------------------


@dataclass(frozen=True)
class Transformation:
    kind: Kind
    vocab: ActivityVocab
    patterns: MinedPatterns | None = None

    def __post_init__(self):
        if self.kind.statistical and self.patterns is None:
            raise ValueError(f"{self.kind.value} needs mined patterns")

    def applicable(self, seq: Seq) -> bool:
        return applicable(self, seq)

    def __call__(self, seq: Seq, rng: np.random.Generator) -> RewriteResult:
        k = self.kind
        if k is Kind.STAT_INSERT:
            return stat_insert(seq, self.patterns, rng)
        if k is Kind.STAT_DELETE:
            return stat_delete(seq, self.patterns, rng)
        if k is Kind.STAT_REPLACE:
            return stat_replace(seq, self.patterns, rng)
        if k is Kind.RAND_INSERT:
            return rand_insert(seq, self.vocab, rng)
        if k is Kind.RAND_DELETE:
            return rand_delete(seq, rng)
        return rand_replace(seq, self.vocab, rng)


def applicable(t: Transformation, seq: Seq) -> bool:
    seq = tuple(seq)
    k = t.kind
    if k is Kind.STAT_INSERT:
        return bool(insert_sites(seq, t.patterns))
    if k is Kind.STAT_DELETE:
        return bool(delete_sites(seq, t.patterns))
    if k is Kind.STAT_REPLACE:
        return bool(replace_sites(seq, t.patterns))
    if k is Kind.RAND_INSERT:
        return len(t.vocab.real_indices) >= 1
    if k is Kind.RAND_DELETE:
        return len(seq) >= 2
    return len(t.vocab.real_indices) >= 2 and len(seq) >= 1
