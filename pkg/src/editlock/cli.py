"""Command-line front end.

    editlock pretrain   [--config F] [--set k=v ...]
    editlock finetune   --method {secure,max,noisy,retain,retrain} [...]
    editlock evaluate   [...]
    editlock ablate-vagueness [--variants tok|tok...] [...]
    editlock project    [...]
    editlock report     [...]

Config file keys can be overridden with repeated --set key=value flags.
Exit codes: 0 success, 2 config error, 3 stage failure.
"""

import argparse
import sys

from .config import (ExperimentConfig, apply_overrides, config_hash,
                     parse_vagueness, read_config)
from .errors import ConfigError, StageError
from . import runner

METHOD_ALIASES = {
    "secure": "secure",
    "max": "max_loss",
    "noisy": "noisy_label",
    "retain": "retain_label",
    "retrain": "retrain",
}


def _build_parser():
    ap = argparse.ArgumentParser(prog="editlock",
                                 description="permit/forbid edit locking for a "
                                             "toy diffusion manipulator")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="key=value config file")
    common.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="override a config key")
    common.add_argument("--quiet", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("pretrain", parents=[common],
                   help="generate the corpus and pretrain the manipulator")
    ft = sub.add_parser("finetune", parents=[common],
                        help="fine-tune one method on every prompt")
    ft.add_argument("--method", required=True, choices=sorted(METHOD_ALIASES))
    sub.add_parser("evaluate", parents=[common],
                   help="score all methods and write results CSVs")
    ab = sub.add_parser("ablate-vagueness", parents=[common],
                        help="compare vagueness transforms on one prompt")
    ab.add_argument("--variants", default=None,
                    help="'|'-separated tokens, e.g. resize:8|gaussian:2")
    sub.add_parser("project", parents=[common],
                   help="2-D feature projection of edited images")
    sub.add_parser("report", parents=[common],
                   help="render tables, galleries and plots")
    return ap


def _load_config(args):
    if args.config:
        return read_config(args.config, args.overrides)
    return apply_overrides(ExperimentConfig(), args.overrides)


def _log(args):
    if args.quiet:
        return None
    return lambda msg: print(msg, file=sys.stderr)


def _cmd_pretrain(cfg, args):
    rp = runner.RunPaths(cfg)
    ds = runner.stage_data(cfg, rp, _log(args))
    runner.stage_pretrain(cfg, rp, ds, _log(args))
    print(rp.model_path("pretrain"))


def _cmd_finetune(cfg, args):
    rp = runner.RunPaths(cfg)
    log = _log(args)
    ds = runner.stage_data(cfg, rp, log, persist=False)
    model_pre = runner.stage_pretrain(cfg, rp, ds, log)
    method = METHOD_ALIASES[args.method]
    if method == "retrain":
        runner.stage_retrain(cfg, rp, ds, log)
        print(rp.model_path("retrain"))
    else:
        runner.stage_finetune(cfg, rp, ds, model_pre, methods=[method], log=log)
        print(rp.model_path(method, cfg.ablation_prompt))


def _cmd_evaluate(cfg, args):
    rp = runner.RunPaths(cfg)
    log = _log(args)
    ds = runner.stage_data(cfg, rp, log, persist=False)
    model_pre = runner.stage_pretrain(cfg, rp, ds, log)
    emb = runner.stage_embedder(cfg, rp, ds, log)
    runner.stage_evaluate(cfg, rp, ds, model_pre, emb, log)
    print(rp.root + "/results.csv")


def _cmd_ablate(cfg, args):
    variants = None
    if args.variants:
        variants = [parse_vagueness(t) for t in args.variants.split("|") if t.strip()]
    path, _ = runner.ablate_vagueness(cfg, variants, _log(args))
    print(path)


def _cmd_project(cfg, args):
    rp = runner.RunPaths(cfg)
    log = _log(args)
    ds = runner.stage_data(cfg, rp, log, persist=False)
    model_pre = runner.stage_pretrain(cfg, rp, ds, log)
    emb = runner.stage_embedder(cfg, rp, ds, log)
    print(runner.stage_project(cfg, rp, ds, model_pre, emb, log))


def _cmd_report(cfg, args):
    rp = runner.RunPaths(cfg)
    log = _log(args)
    ds = runner.stage_data(cfg, rp, log, persist=False)
    model_pre = runner.stage_pretrain(cfg, rp, ds, log)
    emb = runner.stage_embedder(cfg, rp, ds, log)
    _, table, _ = runner.stage_evaluate(cfg, rp, ds, model_pre, emb, log)
    print(runner.stage_report(cfg, rp, ds, model_pre, table, log))


COMMANDS = {
    "pretrain": _cmd_pretrain,
    "finetune": _cmd_finetune,
    "evaluate": _cmd_evaluate,
    "ablate-vagueness": _cmd_ablate,
    "project": _cmd_project,
    "report": _cmd_report,
}


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        cfg = _load_config(args)
        if not args.quiet:
            print(f"run {config_hash(cfg)} ({cfg.name})", file=sys.stderr)
        COMMANDS[args.command](cfg, args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except StageError as err:
        print(f"stage failure: {err}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
