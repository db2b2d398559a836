"""Event logs: parsing (CSV / XES), vocabularies, temporal splits and prefixes."""

from __future__ import annotations

import csv
import hashlib
import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

from dateutil import parser as date_parser

PAD = 0
EOS = 1
PAD_TOKEN = "<pad>"
EOS_TOKEN = "<eos>"
NUM_RESERVED = 2

NEXT_ACTIVITY = "next-activity"
OUTCOME = "outcome"

NEGATIVE, POSITIVE = 0, 1


class EventLogError(Exception):
    """Base class for ingestion errors."""


class ConfigurationError(EventLogError):
    pass


class RowError(EventLogError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class XesParseError(EventLogError):
    def __init__(self, message: str, position: tuple[int, int] | None = None):
        if position is not None:
            message = f"{message} (line {position[0]}, column {position[1]})"
        super().__init__(message)
        self.position = position


class EventError(EventLogError):
    pass


class SplitError(EventLogError):
    pass


@dataclass(frozen=True)
class ActivityVocab:
    """Dense activity index. Index 0 is PAD, 1 is EOS, real activities follow."""

    names: tuple[str, ...] = ()

    def __post_init__(self):
        if len(set(self.names)) != len(self.names):
            raise ValueError("duplicate activity names")
        if PAD_TOKEN in self.names or EOS_TOKEN in self.names:
            raise ValueError("activity name collides with a reserved token")

    @classmethod
    def from_names(cls, names: Iterable[str]) -> "ActivityVocab":
        return cls(tuple(sorted(set(names))))

    @property
    def id_of(self) -> dict[str, int]:
        return {n: i + NUM_RESERVED for i, n in enumerate(self.names)}

    def index(self, name: str) -> int:
        try:
            return self.names.index(name) + NUM_RESERVED
        except ValueError:
            raise KeyError(name) from None

    def name_of(self, idx: int) -> str:
        if idx == PAD:
            return PAD_TOKEN
        if idx == EOS:
            return EOS_TOKEN
        return self.names[idx - NUM_RESERVED]

    @property
    def size(self) -> int:
        """Total number of indices, reserved tokens included."""
        return len(self.names) + NUM_RESERVED

    @property
    def real_indices(self) -> tuple[int, ...]:
        return tuple(range(NUM_RESERVED, self.size))

    def __len__(self) -> int:
        return self.size


@dataclass(frozen=True)
class Event:
    activity: int
    timestamp: datetime | None = None
    attrs: dict[str, str] = field(default_factory=dict, hash=False)


@dataclass(frozen=True)
class Trace:
    case_id: str
    events: tuple[Event, ...]

    def __post_init__(self):
        if not self.events:
            raise ValueError(f"trace {self.case_id!r} is empty")

    @property
    def activities(self) -> tuple[int, ...]:
        return tuple(e.activity for e in self.events)

    @property
    def first_timestamp(self) -> datetime | None:
        stamps = [e.timestamp for e in self.events if e.timestamp is not None]
        return min(stamps) if stamps else None

    def __len__(self) -> int:
        return len(self.events)


@dataclass(frozen=True)
class EventLog:
    traces: tuple[Trace, ...]
    vocab: ActivityVocab

    def __post_init__(self):
        ids = [t.case_id for t in self.traces]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate case ids")
        hi = self.vocab.size
        for t in self.traces:
            for e in t.events:
                if not NUM_RESERVED <= e.activity < hi:
                    raise ValueError(f"case {t.case_id!r}: activity index {e.activity} outside vocabulary")

    def __len__(self) -> int:
        return len(self.traces)

    @property
    def sequences(self) -> list[tuple[int, ...]]:
        return [t.activities for t in self.traces]

    def subset(self, case_ids: Iterable[str]) -> "EventLog":
        """Sub-log over ``case_ids`` (original trace order), sharing this vocabulary."""
        keep = set(case_ids)
        return EventLog(tuple(t for t in self.traces if t.case_id in keep), self.vocab)

    def fingerprint(self) -> str:
        """Order-independent hash over case ids and activity names."""
        rows = sorted(
            (t.case_id, tuple(self.vocab.name_of(a) for a in t.activities)) for t in self.traces
        )
        h = hashlib.sha256()
        for case_id, names in rows:
            h.update(case_id.encode())
            h.update(b"\x1f")
            h.update("\x1e".join(names).encode())
            h.update(b"\x1d")
        return h.hexdigest()

    @classmethod
    def from_sequences(
        cls, sequences: Sequence[Sequence[str]], case_prefix: str = "c"
    ) -> "EventLog":
        """Build a timestamp-free log from activity-name sequences (handy for fixtures)."""
        vocab = ActivityVocab.from_names(a for s in sequences for a in s)
        width = len(str(max(len(sequences) - 1, 0)))
        traces = tuple(
            Trace(f"{case_prefix}{i:0{width}d}", tuple(Event(vocab.index(a)) for a in seq))
            for i, seq in enumerate(sequences)
        )
        return cls(traces, vocab)


# -- timestamps ---------------------------------------------------------------


def parse_timestamp(text: str) -> datetime | None:
    """Parse an ISO-8601-ish string into an aware UTC datetime; '' gives None."""
    text = text.strip()
    if not text:
        return None
    try:
        ts = datetime.fromisoformat(text[:-1] + "+00:00" if text.endswith("Z") else text)
    except ValueError:
        ts = date_parser.parse(text)
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def format_timestamp(ts: datetime | None) -> str:
    return "" if ts is None else ts.isoformat()


# -- CSV ------------------------------------------------------------------------


@dataclass(frozen=True)
class ColumnMapping:
    case: str = "case:concept:name"
    activity: str = "concept:name"
    timestamp: str = "time:timestamp"


def _assemble(
    rows: list[tuple[str, str, datetime | None, dict[str, str]]],
) -> EventLog:
    vocab = ActivityVocab.from_names(r[1] for r in rows)
    ids = vocab.id_of
    grouped: dict[str, list[Event]] = {}
    for case_id, activity, ts, attrs in rows:
        grouped.setdefault(case_id, []).append(Event(ids[activity], ts, attrs))
    traces = []
    for case_id, events in grouped.items():
        # stable sort keeps row order on ties; partially stamped traces keep row order
        if all(e.timestamp is not None for e in events):
            events = sorted(events, key=lambda e: e.timestamp)
        traces.append(Trace(case_id, tuple(events)))
    return EventLog(tuple(traces), vocab)


def parse_csv(
    path: str | Path, mapping: ColumnMapping | None = None, max_events: int | None = None
) -> EventLog:
    """Read a flat CSV event log.

    Events are grouped by case in first-appearance order and sorted by timestamp
    within a case. ``max_events`` keeps only the first rows of the file, in raw
    order, before grouping.
    """
    mapping = mapping or ColumnMapping()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in (mapping.case, mapping.activity, mapping.timestamp) if c not in header]
        if missing:
            raise ConfigurationError(f"{path}: missing column(s) {missing}; header is {header}")
        extra = [c for c in header if c not in (mapping.case, mapping.activity, mapping.timestamp)]
        rows = []
        for n, row in enumerate(reader):
            if max_events is not None and n >= max_events:
                break
            line = reader.line_num
            case_id, activity = row[mapping.case], row[mapping.activity]
            if not case_id or not activity:
                raise RowError(line, "empty case id or activity")
            try:
                ts = parse_timestamp(row[mapping.timestamp] or "")
            except (ValueError, OverflowError) as exc:
                raise RowError(line, f"unparsable timestamp {row[mapping.timestamp]!r}") from exc
            attrs = {c: row[c] for c in extra if row.get(c)}
            rows.append((case_id, activity, ts, attrs))
    return _assemble(rows)


def write_csv(log: EventLog, path: str | Path, mapping: ColumnMapping | None = None) -> None:
    mapping = mapping or ColumnMapping()
    extra = sorted({k for t in log.traces for e in t.events for k in e.attrs})
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([mapping.case, mapping.activity, mapping.timestamp, *extra])
        for t in log.traces:
            for e in t.events:
                w.writerow(
                    [t.case_id, log.vocab.name_of(e.activity), format_timestamp(e.timestamp)]
                    + [e.attrs.get(k, "") for k in extra]
                )


# -- XES ------------------------------------------------------------------------


def _local(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def _attributes(elem: ET.Element) -> dict[str, str]:
    return {
        child.get("key"): child.get("value", "")
        for child in elem
        if child.get("key") is not None and _local(child.tag) != "event"
    }


def parse_xes(path: str | Path, max_events: int | None = None) -> EventLog:
    """Read the trace/event/concept:name/time:timestamp subset of IEEE XES."""
    try:
        root = ET.parse(path).getroot()
    except ET.ParseError as exc:
        raise XesParseError(f"{path}: malformed XML: {exc.msg}", exc.position) from exc
    if _local(root.tag) != "log":
        raise XesParseError(f"{path}: root element is <{_local(root.tag)}>, expected <log>")
    rows = []
    n_events = 0
    for t_idx, trace in enumerate(el for el in root if _local(el.tag) == "trace"):
        case_id = _attributes(trace).get("concept:name") or f"trace_{t_idx}"
        for e_idx, event in enumerate(el for el in trace if _local(el.tag) == "event"):
            if max_events is not None and n_events >= max_events:
                return _assemble(rows)
            attrs = _attributes(event)
            activity = attrs.pop("concept:name", None)
            if not activity:
                raise EventError(f"{path}: trace {case_id!r} event {e_idx} has no concept:name")
            raw_ts = attrs.pop("time:timestamp", None)
            try:
                ts = parse_timestamp(raw_ts) if raw_ts else None
            except (ValueError, OverflowError) as exc:
                raise EventError(f"{path}: trace {case_id!r} event {e_idx}: bad timestamp {raw_ts!r}") from exc
            rows.append((case_id, activity, ts, attrs))
            n_events += 1
    return _assemble(rows)


def write_xes(log: EventLog, path: str | Path) -> None:
    root = ET.Element("log", {"xes.version": "1.0"})
    for t in log.traces:
        tr = ET.SubElement(root, "trace")
        ET.SubElement(tr, "string", key="concept:name", value=t.case_id)
        for e in t.events:
            ev = ET.SubElement(tr, "event")
            ET.SubElement(ev, "string", key="concept:name", value=log.vocab.name_of(e.activity))
            if e.timestamp is not None:
                ET.SubElement(ev, "date", key="time:timestamp", value=format_timestamp(e.timestamp))
            for k in sorted(e.attrs):
                ET.SubElement(ev, "string", key=k, value=e.attrs[k])
    ET.indent(root)
    ET.ElementTree(root).write(path, encoding="utf-8", xml_declaration=True)


def read_log(path: str | Path, fmt: str | None = None, **kwargs) -> EventLog:
    fmt = fmt or Path(path).suffix.lstrip(".").lower()
    if fmt == "csv":
        return parse_csv(path, **kwargs)
    if fmt == "xes":
        return parse_xes(path, max_events=kwargs.get("max_events"))
    raise ConfigurationError(f"unknown log format {fmt!r}")


# -- splits & prefixes ------------------------------------------------------------


@dataclass(frozen=True)
class TemporalSplit:
    train: tuple[str, ...]
    validation: tuple[str, ...]
    test: tuple[str, ...]
    fractions: tuple[float, float, float] = (0.65, 0.15, 0.20)


def temporal_split(
    log: EventLog, fractions: tuple[float, float, float] = (0.65, 0.15, 0.20)
) -> TemporalSplit:
    """Order cases by first timestamp (case id breaks ties) and cut 65/15/20 by default.

    Cases without any timestamp sort after stamped ones.
    """
    if len(fractions) != 3 or any(f <= 0 for f in fractions) or abs(sum(fractions) - 1) > 1e-9:
        raise SplitError(f"fractions must be three positive numbers summing to 1, got {fractions}")
    n = len(log)
    if n < 3:
        raise SplitError(f"need at least 3 traces to split, got {n}")
    far_future = datetime.max.replace(tzinfo=timezone.utc)

    def key(t: Trace):
        ts = t.first_timestamp
        return (ts is None, ts or far_future, t.case_id)

    ordered = [t.case_id for t in sorted(log.traces, key=key)]
    # guard against 0.65 * 100 = 65.00000000000001 style float noise
    n_train = math.floor(fractions[0] * n + 1e-9)
    n_val = math.floor(fractions[1] * n + 1e-9)
    return TemporalSplit(
        tuple(ordered[:n_train]),
        tuple(ordered[n_train : n_train + n_val]),
        tuple(ordered[n_train + n_val :]),
        tuple(fractions),
    )


@dataclass(frozen=True)
class Prefix:
    case_id: str
    activities: tuple[int, ...]

    @property
    def k(self) -> int:
        return len(self.activities)


@dataclass(frozen=True)
class LabeledExample:
    prefix: Prefix
    target: int


def generate_prefixes(
    trace: Trace, task: str = NEXT_ACTIVITY, outcome_label: int | None = None
) -> list[LabeledExample]:
    acts = trace.activities
    if task == NEXT_ACTIVITY:
        return [
            LabeledExample(Prefix(trace.case_id, acts[:k]), acts[k] if k < len(acts) else EOS)
            for k in range(1, len(acts) + 1)
        ]
    if task == OUTCOME:
        if outcome_label is None:
            raise ValueError("outcome task needs an outcome label")
        return [
            LabeledExample(Prefix(trace.case_id, acts[:k]), outcome_label)
            for k in range(1, len(acts))
        ]
    raise ValueError(f"unknown task {task!r}")


def extract_outcome_label(trace: Trace, outcome_activities: Iterable[int]) -> int:
    targets = set(outcome_activities)
    if not targets:
        raise ValueError("outcome_activities must not be empty")
    return POSITIVE if any(a in targets for a in trace.activities) else NEGATIVE


def labeled_examples(
    log: EventLog, task: str = NEXT_ACTIVITY, outcome_activities: Iterable[int] | None = None
) -> list[LabeledExample]:
    """All prefixes of all traces in ``log`` for one task."""
    out: list[LabeledExample] = []
    targets = None if outcome_activities is None else set(outcome_activities)
    for t in log.traces:
        label = extract_outcome_label(t, targets) if task == OUTCOME else None
        out.extend(generate_prefixes(t, task, label))
    return out
