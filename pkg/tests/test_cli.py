import csv
import json

import numpy as np
import pytest

from siamaug.cli import main
from siamaug.config import OUTPUT_DIR_ENV, ConfigError, load_config
from siamaug.event_log import write_csv
from siamaug.synthetic import xor_process_log

from conftest import TINY_RUN, run_chain


@pytest.fixture(scope="module")
def chain(tmp_path_factory):
    return run_chain(tmp_path_factory.mktemp("a"))


def test_outputs_are_byte_identical(chain, tmp_path):
    again = run_chain(tmp_path)
    assert again.keys() == chain.keys()
    for name in chain:
        assert again[name] == chain[name], name


def test_mine_outputs(chain):
    patterns = json.loads(chain["patterns.json"])
    assert patterns["config"] == {"alpha": 1e-4, "beta": 1e-4, "gamma": 1e-4, "delta": 1e-4, "lambda_max": 4}
    summary = json.loads(chain["mine_summary.json"])
    assert summary["train_traces"] == 39  # floor(0.65 * 60)
    assert summary["insertion_rules"] > 0 and summary["xor_sets"] > 0


def test_augment_and_entropy_outputs(chain):
    assert {"augmented_f1.2.csv", "augmented_f2.csv", "augmented_f1.2.meta.json"} <= chain.keys()
    meta = json.loads(chain["augmented_f2.meta.json"])
    assert meta["n_original"] == 39 and meta["n_total"] == 78
    rows = list(csv.reader(chain["entropy.csv"].decode().splitlines()))
    assert rows[0] == ["dataset", "factor", "trace_pct", "prefix_pct"]
    assert [float(r[1]) for r in rows[1:]] == [1.0, 1.2, 2.0]
    assert float(rows[1][2]) == 0.0


def test_pretrain_and_finetune_outputs(chain):
    assert {"model_0.json", "model_1.json", "pretrain_0.csv", "pretrain_1.csv"} <= chain.keys()
    assert json.loads(chain["model_1.json"])["meta"]["seed"] == 1
    history = chain["pretrain_0.csv"].decode().splitlines()
    assert history[0].split(",")[2] == "collapse_metric" and len(history) == 3
    report = json.loads(chain["finetune_report.json"])
    assert set(report) == {"next-activity"} and {"mean", "std", "values"} <= set(report["next-activity"])
    assert json.loads(chain["evaluate_report.json"])["next-activity"]["values"] == report["next-activity"]["values"]
    ablation = json.loads(chain["ablation.json"])["next-activity"]
    assert set(ablation) == {"supervised-only", "random-pretrain", "statistical-pretrain"}
    rows = list(csv.reader(chain["ablation.csv"].decode().splitlines()))
    assert [r[1] for r in rows[1:]] == ["supervised-only", "random-pretrain", "statistical-pretrain"]


def test_outcome_task_reports_per_target(tmp_path):
    doc = {**TINY_RUN, "task": "outcome", "outcome_targets": ["reject", "escalate"], "repetitions": 1}
    out = run_chain(tmp_path, doc, (["finetune", "--supervised-only"],))
    assert set(json.loads(out["finetune_report.json"])) == {"reject", "escalate"}
    assert {"classifier_reject_0.json", "classifier_escalate_0.json"} <= out.keys()


def test_leakage_guard(tmp_path, chain):
    # patterns mined under one split are refused under another
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({**TINY_RUN, "output_dir": str(tmp_path)}))
    assert main(["mine", "-c", str(cfg)]) == 0
    code = main(["augment", "-c", str(cfg), "--set", "split=[0.5,0.25,0.25]"])
    assert code == 1
    assert main(["pretrain", "-c", str(cfg), "--set", "data.synthetic.seed=9"]) == 1


def test_model_fingerprint_guard(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({**TINY_RUN, "repetitions": 1, "output_dir": str(tmp_path)}))
    assert main(["mine", "-c", str(cfg)]) == 0
    assert main(["pretrain", "-c", str(cfg)]) == 0
    assert main(["finetune", "-c", str(cfg), "--set", "encoder.hidden_dim=9"]) == 1


def test_exit_codes(tmp_path, capsys):
    assert main(["mine", "--output-dir", str(tmp_path)]) == 1
    assert main(["mine", "--input", str(tmp_path / "missing.csv")]) == 1
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,2\n")
    assert main(["mine", "--input", str(bad), "--output-dir", str(tmp_path)]) == 1
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({**TINY_RUN, "output_dir": str(tmp_path), "finetune": {"learning_rate": 1e308}}))
    # a diverging run is a runtime failure
    with np.errstate(all="ignore"):
        assert main(["finetune", "-c", str(cfg), "--supervised-only"]) == 2
    assert "configuration error" in capsys.readouterr().err


def test_csv_input_and_one_variant_log(tmp_path):
    path = tmp_path / "log.csv"
    write_csv(xor_process_log(40, seed=0), path)
    assert main(["mine", "--input", str(path), "--output-dir", str(tmp_path / "o")]) == 0
    # one variant: nothing to mine, still a success
    one = tmp_path / "one.csv"
    one.write_text("case:concept:name,concept:name,time:timestamp\n"
                   + "".join(f"c{i},A,2024-01-0{i + 1}\nc{i},B,2024-01-0{i + 1}T01:00\n" for i in range(5)))
    with pytest.warns(UserWarning):
        assert main(["mine", "--input", str(one), "--output-dir", str(tmp_path / "p")]) == 0
    assert json.loads((tmp_path / "p" / "mine_summary.json").read_text())["insertion_rules"] == 0


def test_config_overrides_and_env(tmp_path, monkeypatch):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"data": {"input": "x.csv"}, "mining": {"lambda_max": 2}}))
    rc = load_config(cfg, ["mining.gamma=0.5", "seed=3"])
    assert rc.mining.lambda_max == 2 and rc.mining.gamma == 0.5 and rc.seed == 3
    monkeypatch.setenv(OUTPUT_DIR_ENV, str(tmp_path / "env"))
    assert load_config(cfg).output_dir == str(tmp_path / "env")
    with pytest.raises(ConfigError):
        load_config(cfg, ["nonsense=1"])
    with pytest.raises(ConfigError):
        load_config(cfg, ["missing-equals"])
