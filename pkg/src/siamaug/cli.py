"""Command-line driver: mine, augment, entropy, pretrain, finetune, evaluate, ablate.

Exit codes: 0 success, 1 invalid configuration or input, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import warnings
from pathlib import Path

from . import pipeline
from .augmentor import write_sidecar
from .config import ConfigError, RunConfig, load_config
from .event_log import EventLogError, parse_csv, write_csv
from .metrics import relative_increase
from .patterns import MinedPatterns
from .siamese.network import NetworkParams
from .siamese.train import Classifier, TrainingError, write_history

log = logging.getLogger("siamaug")

MODEL_SECTIONS = ("data", "split", "mining", "encoder")


def _dump(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _write_rows(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _out(cfg: RunConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_patterns(args, cfg: RunConfig, prep) -> MinedPatterns:
    path = Path(args.patterns) if args.patterns else Path(cfg.output_dir) / "patterns.json"
    if not path.exists():
        raise ConfigError(f"patterns file {path} not found; run `siamaug mine` first")
    patterns = MinedPatterns.load(path, prep.log.vocab)
    pipeline.check_patterns(patterns, prep)
    return patterns


def _factor_tag(f: float) -> str:
    return f"{f:g}"


# -- commands -------------------------------------------------------------------------------


def cmd_mine(args, cfg: RunConfig) -> int:
    prep = pipeline.prepare(cfg)
    patterns = pipeline.mine(cfg, prep)
    out = _out(cfg)
    patterns.save(out / "patterns.json", prep.log.vocab)
    write_csv(prep.train, out / "train_split.csv")
    _dump(out / "mine_summary.json", {
        "dataset": cfg.dataset_name,
        "train_traces": len(prep.train),
        "followers": len(patterns.followers),
        "insertion_rules": len(patterns.insertion_rules),
        "xor_sets": len(patterns.xor_sets),
        "config": patterns.to_dict(prep.log.vocab)["config"],
        "train_fingerprint": patterns.source_fingerprint,
    })
    log.info("mined %d followers, %d insertion rules, %d XOR sets", len(patterns.followers),
             len(patterns.insertion_rules), len(patterns.xor_sets))
    return 0


def cmd_augment(args, cfg: RunConfig) -> int:
    prep = pipeline.prepare(cfg)
    patterns = _load_patterns(args, cfg, prep)
    out = _out(cfg)
    for factor in cfg.factors:
        aug, stats = pipeline.augment(prep, patterns, factor, cfg.seed)
        stem = f"augmented_f{_factor_tag(factor)}"
        write_csv(aug, out / f"{stem}.csv")
        write_sidecar(out / f"{stem}.meta.json", factor, cfg.seed, patterns, stats, len(prep.train), len(aug))
        log.info("factor %s: %d -> %d traces", factor, len(prep.train), len(aug))
    return 0


def _sidecar_factor(path: Path) -> float:
    meta = path.with_suffix(".meta.json")
    if not meta.exists():
        raise ConfigError(f"{path} has no sidecar {meta.name}; cannot tell its augmentation factor")
    return float(json.loads(meta.read_text())["factor"])


def cmd_entropy(args, cfg: RunConfig) -> int:
    out = _out(cfg)
    base_path = Path(args.base) if args.base else out / "train_split.csv"
    if not base_path.exists():
        raise ConfigError(f"base log {base_path} not found")
    paths = [Path(p) for p in args.augmented] or sorted(out.glob("augmented_f*.csv"))
    base = parse_csv(base_path)
    rows, doc = [[cfg.dataset_name, 1.0, 0.0, 0.0]], []
    entries = sorted(((_sidecar_factor(p), p) for p in paths), key=lambda fp: fp[0])
    for factor, path in entries:
        rep = relative_increase(base, parse_csv(path))
        rows.append([cfg.dataset_name, factor, rep.relative_increase_trace, rep.relative_increase_prefix])
        doc.append({"dataset": cfg.dataset_name, "factor": factor, "log": path.name, **rep.to_dict()})
    _write_rows(out / "entropy.csv", ["dataset", "factor", "trace_pct", "prefix_pct"], rows)
    _dump(out / "entropy.json", doc)
    for r in rows:
        log.info("factor %-4s trace %+7.2f%%  prefix %+7.2f%%", r[1], r[2], r[3])
    return 0


def cmd_pretrain(args, cfg: RunConfig) -> int:
    prep = pipeline.prepare(cfg)
    patterns = _load_patterns(args, cfg, prep)
    out = _out(cfg)
    for i in range(cfg.repetitions):
        seed = cfg.seed + i
        res = pipeline.run_pretrain(cfg, prep, patterns, seed, args.strategy)
        _dump(out / f"model_{i}.json", {
            "meta": {
                "config_fingerprint": cfg.fingerprint(*MODEL_SECTIONS),
                "patterns_fingerprint": patterns.source_fingerprint,
                "seed": seed,
                "strategy": args.strategy,
                "augmentation": res.stats.as_dict(),
            },
            "params": res.online.to_dict(),
        })
        write_history(out / f"pretrain_{i}.csv", res.history)
        log.info("repetition %d: loss %.4f -> %.4f", i, res.history[0].loss, res.history[-1].loss)
    return 0


def _load_model(path: Path, cfg: RunConfig) -> tuple[dict, NetworkParams]:
    doc = json.loads(path.read_text())
    if doc["meta"].get("config_fingerprint") != cfg.fingerprint(*MODEL_SECTIONS):
        raise ConfigError(f"{path} was produced under a different data/split/mining/encoder configuration")
    return doc["meta"], NetworkParams.from_dict(doc["params"])


def _report(out: Path, stem: str, per_target: dict[str, list[float]], baselines: dict[str, float]) -> None:
    doc = {t: {**pipeline.summarize(v), "majority_baseline": baselines[t]} for t, v in per_target.items()}
    _dump(out / f"{stem}.json", doc)
    _write_rows(out / f"{stem}.csv", ["target", "mean", "std", "majority_baseline"],
                [[t, d["mean"], d["std"], d["majority_baseline"]] for t, d in doc.items()])
    for t, d in doc.items():
        log.info("%s: %.2f%% +- %.2f (majority %.2f%%)", t, 100 * d["mean"], 100 * d["std"], 100 * d["majority_baseline"])


def _safe(name: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_" else "_" for ch in name)


def cmd_finetune(args, cfg: RunConfig) -> int:
    prep = pipeline.prepare(cfg)
    out = _out(cfg)
    if args.supervised_only:
        models = [(cfg.seed + i, None) for i in range(cfg.repetitions)]
    else:
        paths = [Path(p) for p in args.model] or sorted(out.glob("model_*.json"))
        if not paths:
            raise ConfigError("no model files given or found; run `siamaug pretrain` or pass --supervised-only")
        models = [(meta["seed"], params) for meta, params in (_load_model(p, cfg) for p in paths)]
    targets = pipeline.task_targets(cfg, prep)
    accs: dict[str, list[float]] = {}
    for i, (seed, params) in enumerate(models):
        for name, outcome in targets.items():
            clf, history, acc = pipeline.run_finetune(cfg, prep, params, outcome, seed)
            accs.setdefault(name, []).append(acc)
            tag = f"{_safe(name)}_{i}"
            _dump(out / f"classifier_{tag}.json", {
                "meta": {"target": name, "seed": seed, "num_classes": clf.num_classes,
                         "config_fingerprint": cfg.fingerprint(*MODEL_SECTIONS)},
                "params": clf.params.to_dict(),
            })
            write_history(out / f"finetune_{tag}.csv", history)
    baselines = {name: pipeline.majority_baseline(cfg, prep, o) for name, o in targets.items()}
    _report(out, "finetune_report", accs, baselines)
    return 0


def cmd_evaluate(args, cfg: RunConfig) -> int:
    prep = pipeline.prepare(cfg)
    out = _out(cfg)
    paths = [Path(p) for p in args.classifier] or sorted(out.glob("classifier_*.json"))
    if not paths:
        raise ConfigError("no classifier files given or found; run `siamaug finetune` first")
    targets = pipeline.task_targets(cfg, prep)
    accs: dict[str, list[float]] = {}
    for path in paths:
        meta, params = _load_model(path, cfg)
        if meta["target"] not in targets:
            raise ConfigError(f"{path} predicts {meta['target']!r}, which this configuration does not define")
        test_ex, _ = pipeline.examples_for(cfg, prep.test, targets[meta["target"]])
        accs.setdefault(meta["target"], []).append(Classifier(params, meta["num_classes"]).accuracy(test_ex))
    baselines = {name: pipeline.majority_baseline(cfg, prep, targets[name]) for name in accs}
    _report(out, "evaluate_report", accs, baselines)
    return 0


def cmd_ablate(args, cfg: RunConfig) -> int:
    prep = pipeline.prepare(cfg)
    patterns = _load_patterns(args, cfg, prep) if args.patterns else pipeline.mine(cfg, prep)
    res = pipeline.ablate(cfg, prep, patterns)
    out = _out(cfg)
    _dump(out / "ablation.json", res)
    rows = [[t, s, d["mean"], d["std"]] for t, per in res.items() for s, d in per.items()]
    _write_rows(out / "ablation.csv", ["target", "strategy", "mean", "std"], rows)
    for r in rows:
        log.info("%s %-22s %.2f%% +- %.2f", r[0], r[1], 100 * r[2], 100 * r[3])
    return 0


COMMANDS = {
    "mine": cmd_mine,
    "augment": cmd_augment,
    "entropy": cmd_entropy,
    "pretrain": cmd_pretrain,
    "finetune": cmd_finetune,
    "evaluate": cmd_evaluate,
    "ablate": cmd_ablate,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", help="JSON run configuration")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config entry, e.g. --set mining.lambda_max=3")
    common.add_argument("--input", help="event log (CSV or XES)")
    common.add_argument("--output-dir")
    common.add_argument("--seed", type=int)
    common.add_argument("--repetitions", type=int)
    common.add_argument("--factors", type=float, nargs="+")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="siamaug", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("mine", parents=[common], help="mine patterns from the training split")
    p = sub.add_parser("augment", parents=[common], help="write augmented training logs")
    p.add_argument("--patterns")
    p = sub.add_parser("entropy", parents=[common], help="entropy increase of augmented logs")
    p.add_argument("--base")
    p.add_argument("--augmented", nargs="*", default=[])
    p = sub.add_parser("pretrain", parents=[common], help="Siamese pretraining, one model per repetition")
    p.add_argument("--patterns")
    p.add_argument("--strategy", choices=["statistical", "random"], default="statistical")
    p = sub.add_parser("finetune", parents=[common], help="fine-tune pretrained models and report test accuracy")
    p.add_argument("--model", nargs="*", default=[])
    p.add_argument("--supervised-only", action="store_true")
    p = sub.add_parser("evaluate", parents=[common], help="evaluate saved classifiers on the test split")
    p.add_argument("--classifier", nargs="*", default=[])
    p = sub.add_parser("ablate", parents=[common], help="supervised-only vs random vs statistical pretraining")
    p.add_argument("--patterns")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    overrides = list(args.set)
    for flag, key in (("input", "data.input"), ("output_dir", "output_dir"), ("seed", "seed"),
                      ("repetitions", "repetitions"), ("factors", "factors")):
        value = getattr(args, flag)
        if value is not None:
            overrides.append(f"{key}={json.dumps(value)}")
    try:
        cfg = load_config(args.config, overrides)
        cfg.validate()
    except ConfigError as exc:
        print(f"siamaug: configuration error: {exc}", file=sys.stderr)
        return 1
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return COMMANDS[args.command](args, cfg)
    except (ConfigError, EventLogError, KeyError) as exc:
        print(f"siamaug: invalid input: {exc}", file=sys.stderr)
        return 1
    except (TrainingError, ArithmeticError, RuntimeError, ValueError) as exc:
        print(f"siamaug: {args.command} failed: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
