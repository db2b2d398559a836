import numpy as np
import pytest

from siamaug.event_log import EventLog
from siamaug.synthetic import xor_process_log


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def xor_log():
    return xor_process_log(600, seed=1)


def make_log(*seqs):
    """EventLog from strings of one-letter activities, e.g. make_log("AB", "AXB")."""
    return EventLog.from_sequences([list(s) for s in seqs])


def ids(log, letters):
    return tuple(log.vocab.index(a) for a in letters)


# A fast end-to-end configuration on the synthetic fixture.
TINY_RUN = {
    "data": {"synthetic": {"n_traces": 60, "seed": 2}},
    "encoder": {"embed_dim": 6, "hidden_dim": 8},
    "pretrain": {"epochs": 2},
    "finetune": {"epochs": 3},
    "factors": [1.2, 2.0],
    "repetitions": 2,
}

CLI_CHAIN = (
    ["mine"],
    ["augment"],
    ["entropy"],
    ["pretrain"],
    ["finetune"],
    ["evaluate"],
    ["ablate", "--repetitions", "1"],
)


def run_chain(directory, doc=None, chain=CLI_CHAIN):
    """Write a config into ``directory``, run every CLI command there and return {file: bytes}."""
    import json
    from pathlib import Path

    from siamaug.cli import main

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    cfg = directory / "config.json"
    cfg.write_text(json.dumps({**(doc or TINY_RUN), "output_dir": str(directory / "out")}))
    for cmd in chain:
        code = main([cmd[0], "-c", str(cfg), *cmd[1:]])
        assert code == 0, f"{cmd} exited {code}"
    return {p.name: p.read_bytes() for p in sorted((directory / "out").iterdir())}


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda l: int(l.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
