#!/usr/bin/env python3
"""Run the full reference experiment with the shipped defaults.

Equivalent to:

    editlock pretrain && editlock finetune --method secure && ... \
        && editlock evaluate && editlock project && editlock report

but in one process, reusing stage outputs in memory. Pass --set k=v to change
config keys; artifacts land in runs/<config-hash>/.
"""

import argparse
import sys
import time

from editlock.config import ExperimentConfig, apply_overrides, config_hash
from editlock.runner import run_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--set", dest="overrides", action="append", default=[],
                    metavar="KEY=VALUE")
    ap.add_argument("--quiet", action="store_true")
    args = ap.parse_args()
    cfg = apply_overrides(ExperimentConfig(), args.overrides)
    log = None if args.quiet else (lambda m: print(m, file=sys.stderr))
    print(f"run {config_hash(cfg)} ({cfg.name})", file=sys.stderr)
    tic = time.time()
    bundle = run_experiment(cfg, log)
    print(f"done in {time.time() - tic:.1f}s", file=sys.stderr)
    print(bundle.run_dir)
    with open(bundle.table_txt) as fh:
        print(fh.read())


if __name__ == "__main__":
    main()
