"""End-to-end experiment orchestration.

Stages: data -> pretrain -> finetune (4 methods x prompts) -> retrain ->
embedder -> evaluate -> project -> report. Every stage is resumable from the
run directory (synthetic data is regenerated, checkpoints are reloaded), so
the CLI can run stages one at a time. A stage failure raises StageError with
the stage name; artifacts produced so far stay on disk.

Run directory layout, rooted at <out_dir>/<config-hash>:
    config.txt                  canonical config snapshot
    data/                       corpus PNGs, labels.csv, manifest.csv
    pretrain/model.pt           plus pretrain_loss.csv
    <method>/p<k>/model.pt      finetuned checkpoint and trace.csv per prompt
    retrain/model.pt            permit-only model (joint over prompts)
    embedder.pt
    results_prompts.csv         raw metrics per (prompt, method, set, split)
    results.csv                 prompt-averaged, normalized, aggregated
    directional.csv             forbid/permit loss deltas vs the pretrained model
    embedding.csv               2-D projection coordinates
    table.txt                   rendered comparison tables
    galleries/, plots/
"""

import csv
import os
from dataclasses import dataclass, replace

import numpy as np

from . import metrics as M
from .config import METHODS, config_hash, format_vagueness, to_text
from .data import default_prompts, load_manifest, partition, save_dataset, synth_generate
from .diffusion import ManipulatorModel, pretrain
from .embedder import FeatureEmbedder, train_embedder, _Net as _EmbNet
from .errors import StageError
from .imaging import apply_vagueness, save_png
from .objectives import forbid_loss, permit_loss
from .projection import embed_projection
from .tuning import retrain, run_baseline, secure_finetune

import torch

EVAL_METHODS = ("retrain",) + METHODS  # row order in tables


@dataclass
class ReportBundle:
    run_dir: str
    results_csv: str
    prompt_csv: str
    directional_csv: str
    embedding_csv: str
    table_txt: str
    config_snapshot: str


class RunPaths:
    def __init__(self, cfg):
        self.cfg = cfg
        self.hash = config_hash(cfg)
        self.root = os.path.join(cfg.out_dir, self.hash)

    def ensure(self, *parts):
        p = os.path.join(self.root, *parts)
        os.makedirs(os.path.dirname(p) if "." in os.path.basename(p) else p,
                    exist_ok=True)
        return p

    def model_path(self, method, prompt_id=None):
        if method in ("pretrain", "retrain") and prompt_id is None:
            return os.path.join(self.root, method, "model.pt")
        return os.path.join(self.root, method, f"p{prompt_id}", "model.pt")


def _guard(stage):
    class _Ctx:
        def __enter__(self):
            return self

        def __exit__(self, etype, err, tb):
            if err is None or isinstance(err, StageError):
                return False
            raise StageError(stage, f"{type(err).__name__}: {err}") from err
    return _Ctx()


def build_dataset(cfg):
    prompts = default_prompts(cfg.prompt_count)
    if cfg.manifest:
        return load_manifest(cfg.manifest, prompts)
    rows = synth_generate(cfg.synth.count, cfg.synth.side, cfg.synth.seed)
    return partition(rows, cfg.partition.forbid_ratio, cfg.partition.unseen_fraction,
                     cfg.partition.seed, prompts=prompts)


def model_spec(cfg):
    return replace(cfg.model, n_prompts=cfg.prompt_count)


def stage_data(cfg, rp, log=None, persist=True):
    with _guard("data"):
        ds = build_dataset(cfg)
        if persist:
            rp.ensure("data")
            save_dataset(ds, os.path.join(rp.root, "data"))
            with open(os.path.join(rp.root, "config.txt"), "w") as fh:
                fh.write(to_text(cfg))
        if log:
            log(f"data: {sum(len(v) for v in ds.subsets().values())} images, "
                f"{len(ds.prompts)} prompts")
        return ds


def stage_pretrain(cfg, rp, ds, log=None):
    path = rp.model_path("pretrain")
    if os.path.exists(path):
        return ManipulatorModel.load(path)
    with _guard("pretrain"):
        model, losses = pretrain(ds, list(ds.prompts), cfg.pretrain,
                                 spec=model_spec(cfg), log=log)
        model.meta["config_hash"] = rp.hash
        rp.ensure("pretrain")
        model.save(path)
        _write_rows(os.path.join(rp.root, "pretrain", "pretrain_loss.csv"),
                    ["step", "loss"], list(enumerate(losses)))
        return model


def stage_finetune(cfg, rp, ds, model_pre, methods=METHODS, prompt_ids=None, log=None):
    prompt_ids = prompt_ids if prompt_ids is not None else \
        [p.prompt_id for p in ds.prompts]
    for method in methods:
        base = cfg.finetune[method]
        for pid in prompt_ids:
            path = rp.model_path(method, pid)
            if os.path.exists(path):
                continue
            with _guard(f"finetune:{method}:p{pid}"):
                fcfg = replace(base, seed=base.seed + 1000 * pid)
                runner = secure_finetune if method == "secure" else run_baseline
                model, trace = runner(model_pre, ds, pid, fcfg)
                model.meta.update(config_hash=rp.hash, method=method, prompt_id=pid)
                rp.ensure(method, f"p{pid}")
                model.save(path)
                trace.checkpoint = path
                trace.write_csv(os.path.join(rp.root, method, f"p{pid}", "trace.csv"))
                if log:
                    log(f"finetune {method} p{pid}: forbid {trace.forbid_loss[0]:.4f}"
                        f"->{trace.forbid_loss[-1]:.4f} in {trace.wall_time:.1f}s")


def stage_retrain(cfg, rp, ds, log=None):
    path = rp.model_path("retrain")
    if os.path.exists(path):
        return ManipulatorModel.load(path)
    with _guard("retrain"):
        model = retrain(ds, None if cfg.retrain_joint else cfg.ablation_prompt,
                        cfg.finetune["secure"], spec=model_spec(cfg),
                        pre_cfg=replace(cfg.pretrain, seed=cfg.pretrain.seed + 17),
                        log=log)
        model.meta["config_hash"] = rp.hash
        rp.ensure("retrain")
        model.save(path)
        return model


def stage_embedder(cfg, rp, ds, log=None):
    path = os.path.join(rp.root, "embedder.pt")
    if os.path.exists(path):
        net = _EmbNet()
        net.load_state_dict(torch.load(path, weights_only=True))
        return FeatureEmbedder(net, cfg.embedder)
    with _guard("embedder"):
        rows = list(ds.permit_train) + list(ds.forbid_train)
        emb = train_embedder(rows, ds.labels, cfg.embedder)
        rp.ensure(os.path.basename(path))
        torch.save(emb.net.state_dict(), path)
        if log:
            log(f"embedder trained, hash {emb.checkpoint_hash()}")
        return emb


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(header)
        wr.writerows(rows)


def _splits(ds):
    return {
        ("permit", "train"): ds.permit_train,
        ("permit", "unseen"): ds.permit_unseen,
        ("forbid", "train"): ds.forbid_train,
        ("forbid", "unseen"): ds.forbid_unseen,
    }


def _load_eval_models(cfg, rp, prompt_ids):
    models = {}
    for method in METHODS:
        for pid in prompt_ids:
            path = rp.model_path(method, pid)
            if not os.path.exists(path):
                raise StageError("evaluate", f"missing checkpoint {path}")
            models[method, pid] = ManipulatorModel.load(path)
    rpath = rp.model_path("retrain")
    if not os.path.exists(rpath):
        raise StageError("evaluate", f"missing checkpoint {rpath}")
    shared = ManipulatorModel.load(rpath)
    for pid in prompt_ids:
        models["retrain", pid] = shared
    return models


def stage_evaluate(cfg, rp, ds, model_pre, emb, log=None):
    """Raw metrics per (prompt, method, set, split), their prompt averages
    with normalization and aggregates, and the loss deltas vs the pretrained
    model that the directional claims are checked against."""
    prompt_ids = [p.prompt_id for p in ds.prompts]
    vague = cfg.finetune["secure"].vagueness
    with _guard("evaluate"):
        models = _load_eval_models(cfg, rp, prompt_ids)
        subsets = _splits(ds)
        raw = []  # dict rows, one per (prompt, method, set, split)
        directional = []
        for pid in prompt_ids:
            refs = {}  # (set, split) -> reference images for FID/CLIP
            pre_out = {}
            for (grp, split), rows in subsets.items():
                imgs = [img for _, img in rows]
                pre_out[grp, split] = model_pre.manipulate_many(imgs, pid)
                if grp == "permit" or cfg.eval.forbid_reference == "pretrained_outputs":
                    refs[grp, split] = pre_out[grp, split]
                else:
                    refs[grp, split] = [apply_vagueness(vague, im) for im in imgs]
            for method in EVAL_METHODS:
                model = models[method, pid]
                for (grp, split), rows in subsets.items():
                    imgs = [img for _, img in rows]
                    outs = model.manipulate_many(imgs, pid)
                    ref = refs[grp, split]
                    n = len(outs)
                    raw.append(dict(
                        prompt_id=pid, method=method, set=grp, split=split,
                        reference_kind="pretrained_outputs" if grp == "permit"
                        else cfg.eval.forbid_reference,
                        fid=M.fid(emb.embed(outs), emb.embed(ref)),
                        is_score=M.inception_score(emb.probs(outs),
                                                   min(cfg.eval.splits_cap, n)),
                        clip_sim=M.semantic_similarity(outs, ref, emb),
                    ))
                    if method == "secure":
                        if grp == "forbid":
                            v = [apply_vagueness(vague, im) for im in imgs]
                            pre_l = np.mean([forbid_loss(o, t).value
                                             for o, t in zip(pre_out[grp, split], v)])
                            sec_l = np.mean([forbid_loss(o, t).value
                                             for o, t in zip(outs, v)])
                        else:
                            pre_l = 0.0  # references are the pretrained outputs
                            sec_l = np.mean([permit_loss(o, t).value
                                             for o, t in zip(outs, pre_out[grp, split])])
                        directional.append(dict(prompt_id=pid, set=grp, split=split,
                                                pre_loss=float(pre_l),
                                                secure_loss=float(sec_l)))
            if log:
                log(f"evaluate: prompt {pid} done")

        avg = _average_rows(raw)
        table = [M.MetricReport(method=r["method"], set=r["set"], split=r["split"],
                                reference_kind=r["reference_kind"], fid=r["fid"],
                                is_score=r["is_score"], clip_sim=r["clip_sim"])
                 for r in avg]
        M.normalize_metrics(table, pool=cfg.eval.normalization_pool)
        M.attach_aggregates(table)
        _write_eval_csvs(cfg, rp, emb, raw, table, directional)
        return raw, table, directional


def _average_rows(raw):
    keys = []
    groups = {}
    for r in raw:
        k = (r["method"], r["set"], r["split"])
        if k not in groups:
            groups[k] = []
            keys.append(k)
        groups[k].append(r)
    out = []
    for k in keys:
        rows = groups[k]
        out.append(dict(
            method=k[0], set=k[1], split=k[2],
            reference_kind=rows[0]["reference_kind"],
            fid=float(np.mean([r["fid"] for r in rows])),
            is_score=float(np.mean([r["is_score"] for r in rows])),
            clip_sim=float(np.mean([r["clip_sim"] for r in rows])),
        ))
    return out


def _fmt(v):
    if v is None:
        return ""
    return repr(float(v))


def _write_eval_csvs(cfg, rp, emb, raw, table, directional):
    stamp = [cfg.name, rp.hash, emb.checkpoint_hash()]
    _write_rows(os.path.join(rp.root, "results_prompts.csv"),
                ["dataset", "config_hash", "embedder_hash", "prompt_id", "method",
                 "set", "split", "reference_kind", "fid", "is", "clip"],
                [stamp + [r["prompt_id"], r["method"], r["set"], r["split"],
                          r["reference_kind"], _fmt(r["fid"]), _fmt(r["is_score"]),
                          _fmt(r["clip_sim"])] for r in raw])
    _write_rows(os.path.join(rp.root, "results.csv"),
                ["dataset", "config_hash", "embedder_hash", "method", "set", "split",
                 "reference_kind", "fid", "is", "clip", "fid_norm", "is_norm",
                 "clip_norm", "wan", "wan_star", "excluded"],
                [stamp + [r.method, r.set, r.split, r.reference_kind,
                          _fmt(r.fid), _fmt(r.is_score), _fmt(r.clip_sim),
                          _fmt(r.fid_norm), _fmt(r.is_norm), _fmt(r.clip_norm),
                          _fmt(r.wan), _fmt(r.wan_star), "|".join(r.excluded)]
                 for r in table])
    _write_rows(os.path.join(rp.root, "directional.csv"),
                ["prompt_id", "set", "split", "pre_loss", "secure_loss"],
                [[d["prompt_id"], d["set"], d["split"],
                  repr(d["pre_loss"]), repr(d["secure_loss"])] for d in directional])


def stage_project(cfg, rp, ds, model_pre, emb, log=None):
    with _guard("project"):
        pid = cfg.ablation_prompt
        spath = rp.model_path("secure", pid)
        if not os.path.exists(spath):
            raise StageError("project", f"missing checkpoint {spath}")
        secure = ManipulatorModel.load(spath)
        vague = cfg.finetune["secure"].vagueness
        groups = {}
        for grp in ("permit", "forbid"):
            rows = list(getattr(ds, f"{grp}_train")) + list(getattr(ds, f"{grp}_unseen"))
            ids = [i for i, _ in rows]
            imgs = [img for _, img in rows]
            groups[f"{grp}_edits"] = list(zip(ids, secure.manipulate_many(imgs, pid)))
            if grp == "permit":
                groups["permit_refs"] = list(zip(ids, model_pre.manipulate_many(imgs, pid)))
            else:
                groups["vague_targets"] = [(i, apply_vagueness(vague, img))
                                           for i, img in rows]
        n = min(len(v) for v in groups.values())
        path = os.path.join(rp.root, "embedding.csv")
        embed_projection(groups, emb, n_per_group=min(50, n), path=path)
        return path


def render_tables(reports, title="results"):
    """Text tables with paired P/F metric columns, one block per split.
    Best value per column marked with '*'. Returns the text."""
    if not reports:
        raise ValueError("no reports to render")
    lines = []
    for split in ("train", "unseen"):
        rows = [r for r in reports if r.split == split]
        if not rows:
            continue
        methods = []
        for r in rows:
            if r.method not in methods:
                methods.append(r.method)
        lines.append(f"== {title} [{split}] ==")
        hdr = (f"{'method':<13}| {'P.FIDv':>8} {'P.IS^':>6} {'P.CLIP^':>8} {'P.WAN^':>7} "
               f"| {'F.FIDv':>8} {'F.IS^':>6} {'F.CLIPv':>8} {'F.WAN*^':>7}")
        lines.append(hdr)
        lines.append("-" * len(hdr))
        cells = {}
        for m in methods:
            p = next((r for r in rows if r.method == m and r.set == "permit"), None)
            f = next((r for r in rows if r.method == m and r.set == "forbid"), None)
            cells[m] = (p, f)

        def col(get, best_low):
            vals = {m: get(cells[m]) for m in methods}
            ok = {m: v for m, v in vals.items() if v is not None and np.isfinite(v)}
            if not ok:
                return {m: "" for m in methods}
            best = min(ok.values()) if best_low else max(ok.values())
            return {m: f"{v:.2f}{'*' if v == best else ''}"
                    if (v := vals[m]) is not None and np.isfinite(v) else ""
                    for m in methods}

        cols = [
            col(lambda c: c[0].fid if c[0] else None, True),
            col(lambda c: c[0].is_score if c[0] else None, False),
            col(lambda c: c[0].clip_sim if c[0] else None, False),
            col(lambda c: c[0].wan if c[0] else None, False),
            col(lambda c: c[1].fid if c[1] else None, True),
            col(lambda c: c[1].is_score if c[1] else None, False),
            col(lambda c: c[1].clip_sim if c[1] else None, True),
            col(lambda c: c[1].wan_star if c[1] else None, False),
        ]
        for m in methods:
            lines.append(f"{m:<13}| {cols[0][m]:>8} {cols[1][m]:>6} {cols[2][m]:>8} "
                         f"{cols[3][m]:>7} | {cols[4][m]:>8} {cols[5][m]:>6} "
                         f"{cols[6][m]:>8} {cols[7][m]:>7}")
        lines.append("")
    return "\n".join(lines)


def _gallery(path, rows):
    """rows: list of lists of images; render a padded grid PNG."""
    h, w, c = np.asarray(rows[0][0]).shape
    pad = 2
    grid = np.ones(((h + pad) * len(rows) + pad,
                    (w + pad) * max(len(r) for r in rows) + pad, c))
    for i, row in enumerate(rows):
        for j, im in enumerate(row):
            y, x = pad + i * (h + pad), pad + j * (w + pad)
            grid[y:y + h, x:x + w] = np.asarray(im)
    save_png(path, grid)


def stage_report(cfg, rp, ds, model_pre, table, log=None):
    with _guard("report"):
        text = render_tables(table, title=cfg.name)
        tpath = os.path.join(rp.root, "table.txt")
        with open(tpath, "w") as fh:
            fh.write(text)
        gal_dir = rp.ensure("galleries")
        pid = cfg.ablation_prompt
        vague = cfg.finetune["secure"].vagueness
        n = cfg.eval.gallery_n
        for method in EVAL_METHODS:
            model = ManipulatorModel.load(rp.model_path(
                "retrain" if method == "retrain" else method,
                None if method == "retrain" else pid))
            rows = []
            for grp in ("permit", "forbid"):
                subset = getattr(ds, f"{grp}_train")[:n]
                imgs = [img for _, img in subset]
                outs = model.manipulate_many(imgs, pid)
                ref = model_pre.manipulate_many(imgs, pid) if grp == "permit" \
                    else [apply_vagueness(vague, im) for im in imgs]
                rows += [imgs, outs, ref]
            _gallery(os.path.join(gal_dir, f"{method}.png"), rows)
        _plots(cfg, rp, table)
        if log:
            log(f"report written to {tpath}")
        return tpath


def _plots(cfg, rp, table):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plot_dir = rp.ensure("plots")
    # loss curves from the stored traces
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.5))
    for method in METHODS:
        tr = os.path.join(rp.root, method, f"p{cfg.ablation_prompt}", "trace.csv")
        if not os.path.exists(tr):
            continue
        with open(tr) as fh:
            rows = list(csv.DictReader(fh))
        axes[0].plot([float(r["forbid_loss"]) for r in rows], label=method)
        axes[1].plot([float(r["permit_loss"]) for r in rows], label=method)
    axes[0].set_title("forbid-phase loss")
    axes[1].set_title("permit-phase loss")
    for ax in axes:
        ax.set_xlabel("epoch")
        ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(os.path.join(plot_dir, "loss_curves.png"), dpi=120)
    plt.close(fig)

    # aggregate bars on the train split
    fig, ax = plt.subplots(figsize=(6, 3.5))
    rows = [r for r in table if r.split == "train"]
    ms = [r.method for r in rows if r.set == "permit"]
    wan_p = [r.wan if r.wan is not None else 0.0 for r in rows if r.set == "permit"]
    wan_f = [r.wan_star if r.wan_star is not None else 0.0
             for r in rows if r.set == "forbid"]
    xs = np.arange(len(ms))
    ax.bar(xs - 0.2, wan_p, width=0.4, label="permit WAN")
    ax.bar(xs + 0.2, wan_f, width=0.4, label="forbid WAN*")
    ax.set_xticks(xs, ms, rotation=20, fontsize=8)
    ax.axhline(0, color="k", lw=0.5)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(os.path.join(plot_dir, "aggregates.png"), dpi=120)
    plt.close(fig)

    # projection scatter
    epath = os.path.join(rp.root, "embedding.csv")
    if os.path.exists(epath):
        with open(epath) as fh:
            rows = list(csv.DictReader(fh))
        fig, ax = plt.subplots(figsize=(5, 5))
        for grp in sorted({r["group"] for r in rows}):
            pts = [(float(r["x"]), float(r["y"])) for r in rows if r["group"] == grp]
            ax.scatter(*zip(*pts), s=12, label=grp, alpha=0.7)
        ax.legend(fontsize=8)
        ax.set_title("feature-space projection")
        fig.tight_layout()
        fig.savefig(os.path.join(plot_dir, "projection.png"), dpi=120)
        plt.close(fig)


def run_experiment(cfg, log=None):
    """The full protocol; returns a ReportBundle of artifact paths."""
    rp = RunPaths(cfg)
    ds = stage_data(cfg, rp, log)
    model_pre = stage_pretrain(cfg, rp, ds, log)
    stage_finetune(cfg, rp, ds, model_pre, log=log)
    stage_retrain(cfg, rp, ds, log)
    emb = stage_embedder(cfg, rp, ds, log)
    raw, table, directional = stage_evaluate(cfg, rp, ds, model_pre, emb, log)
    stage_project(cfg, rp, ds, model_pre, emb, log)
    stage_report(cfg, rp, ds, model_pre, table, log)
    return ReportBundle(
        run_dir=rp.root,
        results_csv=os.path.join(rp.root, "results.csv"),
        prompt_csv=os.path.join(rp.root, "results_prompts.csv"),
        directional_csv=os.path.join(rp.root, "directional.csv"),
        embedding_csv=os.path.join(rp.root, "embedding.csv"),
        table_txt=os.path.join(rp.root, "table.txt"),
        config_snapshot=os.path.join(rp.root, "config.txt"),
    )


def ablate_vagueness(cfg, variants=None, log=None):
    """Fine-tune one secured model per vagueness variant from the shared
    pretrained checkpoint and emit a retrain + variants comparison table.
    Runs on a single prompt (cfg.ablation_prompt) to stay inside the CPU
    budget; rows carry the pretrain hash they all share."""
    variants = list(variants) if variants is not None else list(cfg.ablation)
    if not variants:
        raise ValueError("no vagueness variants given")
    rp = RunPaths(cfg)
    ds = stage_data(cfg, rp, log, persist=False)
    model_pre = stage_pretrain(cfg, rp, ds, log)
    retrain_m = stage_retrain(cfg, rp, ds, log)
    emb = stage_embedder(cfg, rp, ds, log)
    pid = cfg.ablation_prompt
    pre_hash = str(model_pre.meta.get("config_hash", rp.hash))

    with _guard("ablate"):
        subsets = {grp: [img for _, img in getattr(ds, f"{grp}_train")]
                   for grp in ("permit", "forbid")}
        pre_perm = model_pre.manipulate_many(subsets["permit"], pid)

        def eval_rows(name, model, vague):
            out = []
            for grp in ("permit", "forbid"):
                imgs = subsets[grp]
                outs = model.manipulate_many(imgs, pid)
                ref = pre_perm if grp == "permit" else \
                    [apply_vagueness(vague, im) for im in imgs]
                out.append(M.MetricReport(
                    method=name, set=grp, split="train",
                    reference_kind="pretrained_outputs" if grp == "permit"
                    else "vague_targets",
                    fid=M.fid(emb.embed(outs), emb.embed(ref)),
                    is_score=M.inception_score(emb.probs(outs),
                                               min(cfg.eval.splits_cap, len(outs))),
                    clip_sim=M.semantic_similarity(outs, ref, emb)))
            return out

        table = eval_rows("retrain", retrain_m, cfg.finetune["secure"].vagueness)
        for v in variants:
            label = v.label()
            slug = "".join(ch if ch.isalnum() or ch in "._-" else "_" for ch in label)
            path = os.path.join(rp.root, "ablation", slug, "model.pt")
            if os.path.exists(path):
                model = ManipulatorModel.load(path)
            else:
                fcfg = replace(cfg.finetune["secure"], vagueness=v,
                               seed=cfg.finetune["secure"].seed + 1000 * pid)
                model, trace = secure_finetune(model_pre, ds, pid, fcfg)
                os.makedirs(os.path.dirname(path), exist_ok=True)
                model.save(path)
                trace.write_csv(os.path.join(os.path.dirname(path), "trace.csv"))
            table += eval_rows(label, model, v)
            if log:
                log(f"ablation {label} done")

        M.normalize_metrics(table, pool=cfg.eval.normalization_pool)
        M.attach_aggregates(table)
        apath = os.path.join(rp.root, "ablation", "ablation.csv")
        os.makedirs(os.path.dirname(apath), exist_ok=True)
        _write_rows(apath,
                    ["dataset", "config_hash", "pretrain_hash", "method", "set",
                     "fid", "is", "clip", "fid_norm", "is_norm", "clip_norm",
                     "wan", "wan_star", "excluded"],
                    [[cfg.name, rp.hash, pre_hash, r.method, r.set,
                      _fmt(r.fid), _fmt(r.is_score), _fmt(r.clip_sim),
                      _fmt(r.fid_norm), _fmt(r.is_norm), _fmt(r.clip_norm),
                      _fmt(r.wan), _fmt(r.wan_star), "|".join(r.excluded)]
                     for r in table])
        with open(os.path.join(rp.root, "ablation", "table.txt"), "w") as fh:
            fh.write(render_tables(table, title=f"{cfg.name} vagueness ablation"))
        return apath, table
