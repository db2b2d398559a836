"""Synthetic event logs with XOR branches, an optional step and activity noise.

The process::

    register -> (check_simple | check_full, verify) -> decide -> [notify]
             -> (approve | reject | escalate, approve) -> close

The outcome branch is correlated with the check branch, so predicting the
activity after ``decide`` needs the earlier choice.
"""

from __future__ import annotations

from datetime import datetime, timedelta, timezone

import numpy as np

from .event_log import ActivityVocab, Event, EventLog, Trace

ACTIVITIES = (
    "register", "check_simple", "check_full", "verify", "decide",
    "notify", "approve", "reject", "escalate", "close",
)

T0 = datetime(2024, 1, 1, tzinfo=timezone.utc)


def xor_process_variant(rng: np.random.Generator, correlation: float = 0.8, p_notify: float = 0.3) -> list[str]:
    full = rng.random() < 0.5
    seq = ["register"]
    seq += ["check_full", "verify"] if full else ["check_simple"]
    seq.append("decide")
    if rng.random() < p_notify:
        seq.append("notify")
    follow = rng.random() < correlation
    if full == follow:
        seq += ["reject"] if rng.random() < 0.7 else ["escalate", "approve"]
    else:
        seq.append("approve")
    seq.append("close")
    return seq


def xor_process_log(
    n_traces: int = 500,
    seed: int = 0,
    noise: float = 0.05,
    correlation: float = 0.8,
    p_notify: float = 0.3,
) -> EventLog:
    """Timestamped log; case ``i`` starts ``i`` hours after 2024-01-01 and events are 5 minutes apart.

    ``noise`` is the per-event probability of replacing the activity with a
    uniformly drawn one.
    """
    rng = np.random.default_rng(seed)
    vocab = ActivityVocab.from_names(ACTIVITIES)
    width = len(str(n_traces - 1))
    traces = []
    for i in range(n_traces):
        names = xor_process_variant(rng, correlation, p_notify)
        names = [ACTIVITIES[rng.integers(len(ACTIVITIES))] if rng.random() < noise else a for a in names]
        start = T0 + timedelta(hours=i)
        events = tuple(
            Event(vocab.index(a), start + timedelta(minutes=5 * j)) for j, a in enumerate(names)
        )
        traces.append(Trace(f"case_{i:0{width}d}", events))
    return EventLog(tuple(traces), vocab)
