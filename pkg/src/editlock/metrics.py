"""Distribution and similarity metrics plus the normalized aggregates.

fid compares Gaussian fits of feature sets through the symmetric
eigendecomposition route for the matrix square root. inception_score is the
usual exponentiated KL between per-image class posteriors and the split
marginal. semantic_similarity is mean cosine similarity of paired features.

normalize_metrics min-max scales each raw metric across the method cells of
a table so the signed averages are comparable; the pool of cells that share
one min-max is configurable ("per_set" normalizes permit and forbid cells
separately, "joint" pools them). A column that is constant within its pool
carries no ranking signal and is excluded from the aggregates, which is
exactly what happens to the distribution score on tiny holdout splits where
every method degenerates to one split of one image row.

wan = (-fid_n + is_n + clip_n) / 3 scores edit quality; wan_star flips the
similarity sign, scoring proximity to the vague target instead. With
exclusions both become the signed mean over the remaining terms.
"""

from dataclasses import dataclass

import numpy as np


def _gauss_fit(feats, shrink):
    mu = feats.mean(axis=0)
    cov = np.cov(feats, rowvar=False)
    if cov.ndim == 0:
        cov = cov.reshape(1, 1)
    if shrink:
        cov = cov + 1e-6 * np.eye(cov.shape[0])
    return mu, cov


def _psd_sqrt(mat):
    vals, vecs = np.linalg.eigh(mat)
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def fid(features_a, features_b):
    """Frechet distance between Gaussian fits of two feature matrices.

    Small sets (fewer rows than d+1) get a 1e-6 ridge on both covariances.
    The cross term uses eigenvalues of A^{1/2} B A^{1/2}, which is symmetric
    PSD by construction, with negative eigenvalues clamped at zero.
    """
    fa = np.asarray(features_a, dtype=np.float64)
    fb = np.asarray(features_b, dtype=np.float64)
    if fa.ndim != 2 or fb.ndim != 2 or fa.shape[1] != fb.shape[1]:
        raise ValueError("feature matrices must be 2-D with equal width")
    if len(fa) < 2 or len(fb) < 2:
        raise ValueError("need at least 2 rows per side")
    if not (np.all(np.isfinite(fa)) and np.all(np.isfinite(fb))):
        raise ValueError("non-finite features")
    d = fa.shape[1]
    shrink = min(len(fa), len(fb)) < d + 1
    mu_a, cov_a = _gauss_fit(fa, shrink)
    mu_b, cov_b = _gauss_fit(fb, shrink)
    a_half = _psd_sqrt(cov_a)
    cross = np.clip(np.linalg.eigvalsh(a_half @ cov_b @ a_half), 0.0, None)
    val = float(np.sum((mu_a - mu_b) ** 2)
                + np.trace(cov_a) + np.trace(cov_b) - 2 * np.sqrt(cross).sum())
    if val < -1e-8:
        raise ArithmeticError(f"negative Frechet distance {val}: numerical failure")
    return max(val, 0.0)


def inception_score(class_probs, splits):
    """exp(mean KL(p(y|x) || split marginal)), averaged over row splits."""
    p = np.asarray(class_probs, dtype=np.float64)
    if p.ndim != 2:
        raise ValueError("class_probs must be (N, C)")
    if np.any(p < 0) or np.any(np.abs(p.sum(axis=1) - 1) > 1e-6):
        raise ValueError("rows must be probability vectors")
    n = len(p)
    if not 1 <= splits <= n:
        raise ValueError(f"splits={splits} incompatible with N={n}")
    scores = []
    for chunk in np.array_split(p, splits):
        q = np.clip(chunk, 1e-12, None)
        marginal = np.clip(chunk.mean(axis=0), 1e-12, None)
        kl = (q * (np.log(q) - np.log(marginal))).sum(axis=1)
        scores.append(np.exp(kl.mean()))
    return float(np.mean(scores))


def semantic_similarity(images_a, images_b, embedder):
    """Mean cosine similarity over index-paired images."""
    if len(images_a) != len(images_b):
        raise ValueError("paired lists must have equal length")
    fa = embedder.embed(images_a)
    fb = embedder.embed(images_b)
    na = np.linalg.norm(fa, axis=1)
    nb = np.linalg.norm(fb, axis=1)
    if np.any(na == 0) or np.any(nb == 0):
        raise ValueError("zero-norm feature")
    return float(np.mean((fa * fb).sum(axis=1) / (na * nb)))


@dataclass
class MetricReport:
    """One (method, set) row of raw and normalized scores."""

    method: str
    set: str  # permit | forbid
    split: str = "train"  # train | unseen
    reference_kind: str = "pretrained_outputs"  # or vague_targets
    fid: float = float("nan")
    is_score: float = float("nan")
    clip_sim: float = float("nan")
    fid_norm: float = None
    is_norm: float = None
    clip_norm: float = None
    wan: float = None
    wan_star: float = None
    excluded: tuple = ()
    prompt_id: int = -1  # -1 marks the across-prompt average


def _norm_column(rows, metric, getter, setter):
    vals = [getter(r) for r in rows]
    vmin, vmax = min(vals), max(vals)
    if vmax - vmin < 1e-15:
        for r in rows:
            setter(r, None)
            r.excluded = tuple(sorted(set(r.excluded) | {metric}))
        return
    for r, v in zip(rows, vals):
        setter(r, (v - vmin) / (vmax - vmin))


def normalize_metrics(table, pool="per_set"):
    """Fill the *_norm fields of a report table in place and return it.

    pool picks which cells share one min-max range per metric: "per_set"
    groups by (set, split), "joint" uses every cell of the table. Constant
    columns within a pool are marked excluded on every affected row.
    """
    if len(table) < 2:
        raise ValueError("need at least 2 rows to normalize")
    if pool not in ("per_set", "joint"):
        raise ValueError(f"unknown pool {pool!r}")
    groups = {}
    for r in table:
        key = (r.set, r.split) if pool == "per_set" else ()
        groups.setdefault(key, []).append(r)
    for rows in groups.values():
        _norm_column(rows, "fid", lambda r: r.fid, lambda r, v: setattr(r, "fid_norm", v))
        _norm_column(rows, "is", lambda r: r.is_score, lambda r, v: setattr(r, "is_norm", v))
        _norm_column(rows, "clip", lambda r: r.clip_sim, lambda r, v: setattr(r, "clip_norm", v))
    return table


def _signed_mean(terms, excluded):
    kept = [(s, v) for name, s, v in terms if name not in excluded]
    if not kept:
        raise ValueError("all metrics excluded")
    return sum(s * v for s, v in kept) / len(kept)


def wan(fid_norm, is_norm, clip_norm, excluded=frozenset()):
    return _signed_mean(
        [("fid", -1, fid_norm), ("is", +1, is_norm), ("clip", +1, clip_norm)], excluded)


def wan_star(fid_norm, is_norm, clip_norm, excluded=frozenset()):
    return _signed_mean(
        [("fid", -1, fid_norm), ("is", +1, is_norm), ("clip", -1, clip_norm)], excluded)


def attach_aggregates(table):
    """Populate wan on permit rows and wan_star on forbid rows."""
    for r in table:
        ex = set(r.excluded)
        args = (r.fid_norm or 0.0, r.is_norm or 0.0, r.clip_norm or 0.0)
        if r.set == "permit":
            r.wan = wan(*args, excluded=ex)
        else:
            r.wan_star = wan_star(*args, excluded=ex)
    return table
