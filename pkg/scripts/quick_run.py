#!/usr/bin/env python3
"""Smoke-test the whole pipeline on a shrunken configuration (~10 s).

Useful when hacking on the runner: 16 images at 16x16, 2 prompts, 2 epochs.
Artifacts land in runs/<hash>/ like the real thing.
"""

import sys
import time

from editlock.config import METHODS, ExperimentConfig, apply_overrides
from editlock.runner import run_experiment

TINY = [
    "name=smoke",
    "synth.count=16", "synth.side=16",
    "partition.unseen_fraction=0.25",
    "prompt_count=2", "ablation_prompt=0",
    "model.t_steps=8", "model.ddim_steps=4",
    "model.channels=6,12,24", "model.emb_dim=16",
    "pretrain.steps=40", "pretrain.batch_size=8",
    "embedder.steps=40",
    "eval.gallery_n=2",
] + [f"finetune.{m}.epochs=2" for m in METHODS]


def main():
    cfg = apply_overrides(ExperimentConfig(), TINY + sys.argv[1:])
    tic = time.time()
    bundle = run_experiment(cfg, log=lambda m: print(m, file=sys.stderr))
    print(f"done in {time.time() - tic:.1f}s", file=sys.stderr)
    print(bundle.run_dir)


if __name__ == "__main__":
    main()
