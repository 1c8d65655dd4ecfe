#!/usr/bin/env python3
"""Run the headline double-pendulum experiment and write CSV + SVG outputs.

Equivalent to `ahmpc run` with the default configuration; kept as a script so
the experiment is reproducible with a single file and no installed entry
point.  Output directory resolution: --out, then $AHMPC_OUT, then ./results.
"""

import argparse
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from ahmpc.cli import ExperimentConfig, run_experiment


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--steps", type=int, default=200)
    ap.add_argument("--out", default=None, help="output directory")
    ap.add_argument("--timing", action="store_true", help="record per-solve wall time")
    args = ap.parse_args()

    out = args.out or os.environ.get("AHMPC_OUT") or "results"
    cfg = ExperimentConfig(steps=args.steps)
    return run_experiment(cfg, out_dir=out, timing=args.timing)


if __name__ == "__main__":
    sys.exit(main())
