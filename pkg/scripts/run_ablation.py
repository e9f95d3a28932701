#!/usr/bin/env python3
"""Run the vagueness-transform ablation on one prompt.

Reuses the pretrain/retrain/embedder checkpoints of the same config hash if
they exist (run scripts/run_reference.py first to share them), fine-tunes one
secured model per variant, and prints the comparison table.
"""

import argparse
import sys
import time

from editlock.config import (ExperimentConfig, apply_overrides, config_hash,
                             parse_vagueness)
from editlock.runner import ablate_vagueness, render_tables


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--set", dest="overrides", action="append", default=[],
                    metavar="KEY=VALUE")
    ap.add_argument("--variants", default=None,
                    help="'|'-separated tokens, e.g. resize:8|gaussian:2 "
                         "(default: the six shipped variants)")
    ap.add_argument("--quiet", action="store_true")
    args = ap.parse_args()
    cfg = apply_overrides(ExperimentConfig(), args.overrides)
    variants = None
    if args.variants:
        variants = [parse_vagueness(t) for t in args.variants.split("|") if t.strip()]
    log = None if args.quiet else (lambda m: print(m, file=sys.stderr))
    print(f"run {config_hash(cfg)} ({cfg.name})", file=sys.stderr)
    tic = time.time()
    path, table = ablate_vagueness(cfg, variants, log)
    print(f"done in {time.time() - tic:.1f}s", file=sys.stderr)
    print(path)
    print(render_tables(table, title=f"{cfg.name} vagueness ablation"))


if __name__ == "__main__":
    main()
