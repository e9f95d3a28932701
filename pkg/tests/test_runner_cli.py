"""End-to-end experiment on a shrunken configuration: artifact layout,
CSV schemas, bit-level reproducibility, resumability, the ablation driver,
and CLI exit codes."""

import csv
import hashlib
import os

import numpy as np
import pytest

from editlock import metrics as M
from editlock import runner
from editlock.cli import main
from editlock.config import (METHODS, ExperimentConfig, apply_overrides,
                             config_hash, to_text)
from editlock.errors import StageError
from editlock.runner import (EVAL_METHODS, RunPaths, ablate_vagueness,
                             render_tables, run_experiment)

TINY = [
    "name=tinycase",
    "synth.count=16", "synth.side=16", "synth.seed=3",
    "partition.unseen_fraction=0.25",
    "prompt_count=2", "ablation_prompt=0",
    "model.t_steps=8", "model.ddim_steps=4",
    "model.channels=6,12,24", "model.emb_dim=16",
    "pretrain.steps=40", "pretrain.batch_size=8",
    "embedder.steps=40",
    "eval.gallery_n=2",
] + [f"finetune.{m}.epochs=2" for m in METHODS]


def _tiny_cfg():
    return apply_overrides(ExperimentConfig(), TINY)


def _in_dir(path, fn):
    old = os.getcwd()
    os.chdir(path)
    try:
        return fn()
    finally:
        os.chdir(old)


@pytest.fixture(scope="module")
def tiny_run(tmp_path_factory):
    wd = tmp_path_factory.mktemp("wd_a")
    cfg = _tiny_cfg()
    bundle = _in_dir(wd, lambda: run_experiment(cfg))
    return cfg, wd, bundle


def _read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


# --------------------------------------------------------------- layout

def test_run_paths_layout(tmp_path):
    cfg = apply_overrides(_tiny_cfg(), [f"out_dir={tmp_path}"])
    rp = RunPaths(cfg)
    assert rp.hash == config_hash(cfg)
    assert rp.root == os.path.join(str(tmp_path), rp.hash)
    assert rp.model_path("pretrain").endswith(
        os.path.join(rp.hash, "pretrain", "model.pt"))
    assert rp.model_path("secure", 1).endswith(
        os.path.join("secure", "p1", "model.pt"))


def test_guard_wraps_and_passes_through():
    with pytest.raises(StageError, match=r"\[demo\] ValueError: boom"):
        with runner._guard("demo"):
            raise ValueError("boom")
    with pytest.raises(StageError) as ei:
        with runner._guard("outer"):
            raise StageError("inner", "already tagged")
    assert ei.value.stage == "inner"


def test_artifacts_exist(tiny_run):
    cfg, wd, bundle = tiny_run
    root = wd / bundle.run_dir
    for rel in ("config.txt", "data", "pretrain/model.pt",
                "pretrain/pretrain_loss.csv", "retrain/model.pt",
                "embedder.pt", "results.csv", "results_prompts.csv",
                "directional.csv", "embedding.csv", "table.txt",
                "plots/loss_curves.png", "plots/aggregates.png",
                "plots/projection.png"):
        assert (root / rel).exists(), rel
    for m in METHODS:
        for pid in (0, 1):
            assert (root / m / f"p{pid}" / "model.pt").exists()
            trace = (root / m / f"p{pid}" / "trace.csv").read_text().splitlines()
            assert len(trace) == 3  # header + one row per epoch
    for m in EVAL_METHODS:
        assert (root / "galleries" / f"{m}.png").exists()
    assert (root / "config.txt").read_text() == to_text(cfg)


def test_results_csv_schema(tiny_run):
    cfg, wd, bundle = tiny_run
    rows = _read_csv(wd / bundle.results_csv)
    assert list(rows[0]) == ["dataset", "config_hash", "embedder_hash", "method",
                             "set", "split", "reference_kind", "fid", "is", "clip",
                             "fid_norm", "is_norm", "clip_norm", "wan", "wan_star",
                             "excluded"]
    assert len(rows) == len(EVAL_METHODS) * 4
    seen = set()
    for r in rows:
        assert r["dataset"] == "tinycase"
        assert r["config_hash"] == config_hash(cfg)
        assert r["method"] in EVAL_METHODS
        assert r["set"] in ("permit", "forbid")
        assert r["split"] in ("train", "unseen")
        seen.add((r["method"], r["set"], r["split"]))
        if r["set"] == "permit":
            assert r["reference_kind"] == "pretrained_outputs"
            assert r["wan"] != "" and r["wan_star"] == ""
        else:
            assert r["reference_kind"] == "vague_targets"
            assert r["wan_star"] != "" and r["wan"] == ""
        assert float(r["fid"]) >= 0
        assert float(r["is"]) >= 1.0 - 1e-9
        assert -1 <= float(r["clip"]) <= 1
        if r["is_norm"] == "":
            assert "is" in r["excluded"].split("|")
    assert len(seen) == len(rows)


def test_prompt_level_csv(tiny_run):
    cfg, wd, bundle = tiny_run
    rows = _read_csv(wd / bundle.prompt_csv)
    assert len(rows) == 2 * len(EVAL_METHODS) * 4
    assert {r["prompt_id"] for r in rows} == {"0", "1"}
    # the averaged table must equal the mean over prompts, column by column
    table = _read_csv(wd / bundle.results_csv)
    for t in table:
        cell = [r for r in rows if (r["method"], r["set"], r["split"])
                == (t["method"], t["set"], t["split"])]
        assert len(cell) == 2
        for col in ("fid", "is", "clip"):
            want = np.mean([float(r[col]) for r in cell])
            assert float(t[col]) == pytest.approx(want, rel=1e-12)


def test_directional_csv(tiny_run):
    cfg, wd, bundle = tiny_run
    rows = _read_csv(wd / bundle.directional_csv)
    assert len(rows) == 2 * 4
    for r in rows:
        assert r["set"] in ("permit", "forbid")
        if r["set"] == "permit":
            assert float(r["pre_loss"]) == 0.0
        else:
            assert float(r["pre_loss"]) > 0
        assert float(r["secure_loss"]) >= 0


def test_embedding_csv_groups(tiny_run):
    cfg, wd, bundle = tiny_run
    rows = _read_csv(wd / bundle.embedding_csv)
    groups = {r["group"] for r in rows}
    assert groups == {"permit_edits", "permit_refs", "forbid_edits",
                      "vague_targets"}
    counts = {g: sum(r["group"] == g for r in rows) for g in groups}
    assert set(counts.values()) == {8}


def test_rerun_resumes_without_retraining(tiny_run):
    cfg, wd, bundle = tiny_run
    root = wd / bundle.run_dir
    pre = root / "pretrain" / "model.pt"
    stamp = pre.stat().st_mtime_ns
    before = (root / "results.csv").read_bytes()
    _in_dir(wd, lambda: run_experiment(cfg))
    assert pre.stat().st_mtime_ns == stamp
    assert (root / "results.csv").read_bytes() == before


def test_fresh_directory_reproduces_bitwise(tiny_run, tmp_path):
    cfg, wd, bundle = tiny_run
    bundle2 = _in_dir(tmp_path, lambda: run_experiment(cfg))
    assert bundle2.run_dir == bundle.run_dir  # same hash, relative layout
    for rel in ("results.csv", "results_prompts.csv", "directional.csv",
                "embedding.csv", "table.txt", "config.txt"):
        a = (wd / bundle.run_dir / rel).read_bytes()
        b = (tmp_path / bundle.run_dir / rel).read_bytes()
        assert a == b, rel
    for rel in ("pretrain/model.pt", "secure/p0/model.pt", "retrain/model.pt",
                "embedder.pt"):
        ha = hashlib.sha256((wd / bundle.run_dir / rel).read_bytes()).hexdigest()
        hb = hashlib.sha256((tmp_path / bundle.run_dir / rel).read_bytes()).hexdigest()
        assert ha == hb, rel


# --------------------------------------------------------------- ablation

def test_ablation_via_cli(tiny_run, capsys):
    cfg, wd, bundle = tiny_run
    flags = [f for kv in TINY for f in ("--set", kv)]
    code = _in_dir(wd, lambda: main(
        ["ablate-vagueness", "--variants", "resize:4|box:3", "--quiet"] + flags))
    assert code == 0
    apath = capsys.readouterr().out.strip().splitlines()[-1]
    rows = _read_csv(wd / apath)
    assert len(rows) == 3 * 2  # retrain + two variants, permit and forbid each
    assert {r["method"] for r in rows} == {"retrain", "4x4", "box(3)"}
    assert {r["pretrain_hash"] for r in rows} == {config_hash(cfg)}
    assert (wd / os.path.dirname(apath) / "table.txt").exists()
    for slug in ("4x4", "box_3_"):
        assert (wd / os.path.dirname(apath) / slug / "model.pt").exists()


def test_ablation_rejects_empty_variant_list(tiny_run):
    cfg, wd, _ = tiny_run
    with pytest.raises(ValueError):
        _in_dir(wd, lambda: ablate_vagueness(cfg, variants=[]))


# ------------------------------------------------------------------- CLI

def test_cli_exit_codes_config_errors(tmp_path):
    assert _in_dir(tmp_path, lambda: main(
        ["pretrain", "--quiet", "--set", "bogus.key=1"])) == 2
    assert _in_dir(tmp_path, lambda: main(
        ["evaluate", "--quiet", "--config", "missing.cfg"])) == 2
    assert _in_dir(tmp_path, lambda: main(
        ["finetune", "--method", "secure", "--quiet",
         "--set", "finetune.secure.epochs=0"])) == 2


def test_cli_rejects_unknown_method():
    with pytest.raises(SystemExit) as ei:
        main(["finetune", "--method", "bogus"])
    assert ei.value.code == 2


def test_cli_stage_failure_on_missing_checkpoints(tmp_path):
    flags = [f for kv in TINY for f in ("--set", kv)]
    code = _in_dir(tmp_path, lambda: main(["project", "--quiet"] + flags))
    assert code == 3


def test_cli_success_paths_on_cached_run(tiny_run, capsys):
    cfg, wd, bundle = tiny_run
    flags = [f for kv in TINY for f in ("--set", kv)]

    def run(verb, *extra):
        code = _in_dir(wd, lambda: main([verb, *extra, "--quiet"] + flags))
        out = capsys.readouterr().out.strip().splitlines()[-1]
        return code, out

    code, out = run("pretrain")
    assert code == 0 and out.endswith(os.path.join("pretrain", "model.pt"))
    code, out = run("finetune", "--method", "max")
    assert code == 0 and out.endswith(os.path.join("max_loss", "p0", "model.pt"))
    code, out = run("finetune", "--method", "retrain")
    assert code == 0 and out.endswith(os.path.join("retrain", "model.pt"))
    code, out = run("evaluate")
    assert code == 0 and out.endswith("results.csv")
    code, out = run("project")
    assert code == 0 and out.endswith("embedding.csv")
    code, out = run("report")
    assert code == 0 and out.endswith("table.txt")


def test_cli_hash_banner(tiny_run, capsys):
    cfg, wd, _ = tiny_run
    flags = [f for kv in TINY for f in ("--set", kv)]
    code = _in_dir(wd, lambda: main(["pretrain"] + flags))
    assert code == 0
    err = capsys.readouterr().err
    assert config_hash(cfg) in err


# ------------------------------------------------------------- rendering

def _row(method, grp, **kw):
    base = dict(method=method, set=grp, split="train",
                fid=1.0, is_score=1.0, clip_sim=0.5)
    base.update(kw)
    return M.MetricReport(**base)


def test_render_tables_formatting():
    rows = [
        _row("alpha", "permit", fid=210.7012, is_score=1.481, clip_sim=0.529),
        _row("beta", "permit", fid=198.401, is_score=1.201, clip_sim=0.612),
        _row("alpha", "forbid", fid=90.0, is_score=1.1, clip_sim=0.40),
        _row("beta", "forbid", fid=95.0, is_score=1.3, clip_sim=0.35),
    ]
    rows[0].wan = M.wan(0.0, 1.0, 1.0)
    rows[1].wan = M.wan(1.0, 0.0, 0.0)
    rows[2].wan_star = -0.1
    rows[3].wan_star = 0.2
    text = render_tables(rows, title="demo")
    assert "== demo [train] ==" in text
    assert "210.70" in text and "198.40*" in text
    assert "1.48*" in text
    assert "0.61*" in text
    assert "0.67*" in text  # wan(0, 1, 1) = 2/3 rendered at two decimals
    assert "0.35*" in text  # forbid similarity: lower is better
    assert "0.20*" in text
    lines = [ln for ln in text.splitlines() if ln.startswith(("alpha", "beta"))]
    assert len(lines) == 2


def test_render_tables_rejects_empty():
    with pytest.raises(ValueError):
        render_tables([])
