"""Compare supervised-only, random-pretrain and statistical-pretrain fine-tuning.

    python scripts/run_ablation.py --repetitions 5
    python scripts/run_ablation.py -c my_log.json --out ablation.json
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
import time

from siamaug import pipeline
from siamaug.config import load_config

DEFAULT_CONFIG = Path(__file__).resolve().parents[1] / "configs" / "synthetic.json"


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("-c", "--config", default=str(DEFAULT_CONFIG), help="JSON run config")
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    ap.add_argument("--repetitions", type=int)
    ap.add_argument("--out", help="write the per-strategy summary as JSON here")
    args = ap.parse_args(argv)

    overrides = list(args.set)
    if args.repetitions is not None:
        overrides.append(f"repetitions={args.repetitions}")
    cfg = load_config(args.config, overrides)

    t0 = time.perf_counter()
    prep = pipeline.prepare(cfg)
    patterns = pipeline.mine(cfg, prep)
    results = pipeline.ablate(cfg, prep, patterns)

    for target, per in results.items():
        print(f"[{target}] {cfg.repetitions} repetition(s), {time.perf_counter() - t0:.1f}s")
        for strategy in pipeline.STRATEGIES:
            s = per[strategy]
            print(f"  {strategy:<22} {100 * s['mean']:6.2f} +/- {100 * s['std']:.2f}")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(results, fh, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
