"""Synthetic attribute-editing corpus, ground-truth edits, and the
permit/forbid partition with held-out unseen subsets.

Each scene is a single hard-edged colored shape on a uniform gray background.
All rendered values sit on the k/255 grid, so PNG round-trips are exact.
Edits are defined as label rewrites followed by a deterministic re-render,
which makes every edit idempotent and keeps pixel diffs analytic.
"""

import csv
import os
from dataclasses import dataclass, replace

import numpy as np

from .errors import SizeError
from .imaging import load_png, save_png

SHAPES = ("square", "circle", "triangle")

# class colors as 8-bit RGB; index order defines the color label
COLOR_NAMES = ("red", "green", "blue", "yellow", "magenta")
COLORS = (
    (220, 30, 30),
    (30, 200, 30),
    (30, 60, 220),
    (230, 210, 30),
    (200, 40, 200),
)

ATTRIBUTES = ("recolor_red", "enlarge", "add_border", "invert_background", "darken")

BORDER_W = 2
ENLARGE_FACTOR = 1.4
DARKEN_FACTOR = 0.6


@dataclass(frozen=True)
class PromptSpec:
    prompt_id: int
    text: str
    attribute: str

    def __post_init__(self):
        if self.attribute not in ATTRIBUTES:
            raise ValueError(f"unknown attribute {self.attribute!r}")


def default_prompts(count=5):
    texts = {
        "recolor_red": "recolor the shape to red",
        "enlarge": "enlarge the shape",
        "add_border": "add a white border",
        "invert_background": "invert the background",
        "darken": "darken the scene",
    }
    if not 1 <= count <= len(ATTRIBUTES):
        raise ValueError(f"prompt count must be in [1, {len(ATTRIBUTES)}]")
    return [PromptSpec(i, texts[a], a) for i, a in enumerate(ATTRIBUTES[:count])]


@dataclass(frozen=True)
class SceneLabels:
    """Everything needed to re-render a scene deterministically."""

    shape: str
    color: tuple  # 8-bit RGB
    color_idx: int
    cx: int
    cy: int
    size: int
    bg: int  # 8-bit gray
    border: bool = False
    darken: bool = False
    invert_bg: bool = False


def shape_mask(labels, side):
    """Boolean membership mask of the shape on a side x side canvas."""
    ys, xs = np.mgrid[0:side, 0:side]
    cx, cy, s = labels.cx, labels.cy, labels.size
    if labels.shape == "square":
        return (np.abs(xs - cx) <= s) & (np.abs(ys - cy) <= s)
    if labels.shape == "circle":
        return (xs - cx) ** 2 + (ys - cy) ** 2 <= s * s
    # upward triangle: apex at cy-s, base at cy+s, half-width dy/2 at depth dy
    dy = ys - (cy - s)
    return (dy >= 0) & (dy <= 2 * s) & (np.abs(xs - cx) <= dy / 2)


def render(labels, side):
    bg = 255 - labels.bg if labels.invert_bg else labels.bg
    color = labels.color
    if labels.darken:
        bg = int(round(DARKEN_FACTOR * bg))
        color = tuple(int(round(DARKEN_FACTOR * c)) for c in color)
    img8 = np.full((side, side, 3), bg, dtype=np.int64)
    img8[shape_mask(labels, side)] = color
    if labels.border:
        w = BORDER_W
        img8[:w, :, :] = 255
        img8[-w:, :, :] = 255
        img8[:, :w, :] = 255
        img8[:, -w:, :] = 255
    return img8.astype(np.float64) / 255.0


def synth_generate(count, image_side, seed):
    """Deterministic corpus of labeled shape scenes.

    Returns a list of (image_id, image, SceneLabels). Shape and color are
    drawn uniformly; size and position keep the shape fully on canvas with a
    small margin so the border edit never collides with it.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if image_side not in (16, 32, 64):
        raise ValueError(f"image_side must be one of 16/32/64, got {image_side}")
    rng = np.random.default_rng(seed)
    lo = max(2, round(image_side * 5 / 32))
    # cap the size so center placement below always has room, border margin included
    hi = min(round(image_side * 10 / 32), (image_side - 2 * BORDER_W - 3) // 2)
    rows = []
    for i in range(count):
        s = int(rng.integers(lo, hi + 1))
        m = s + BORDER_W + 1
        labels = SceneLabels(
            shape=SHAPES[rng.integers(len(SHAPES))],
            color=COLORS[(ci := int(rng.integers(len(COLORS))))],
            color_idx=ci,
            cx=int(rng.integers(m, image_side - m)),
            cy=int(rng.integers(m, image_side - m)),
            size=s,
            bg=int(rng.integers(13, 116)),  # 0.05 .. 0.45 in pixel units
        )
        rows.append((i, render(labels, image_side), labels))
    return rows


def edit_labels(labels, attribute):
    if attribute == "recolor_red":
        return replace(labels, color=COLORS[0], color_idx=0)
    if attribute == "enlarge":
        return replace(labels, size=int(round(ENLARGE_FACTOR * labels.size)))
    if attribute == "add_border":
        return replace(labels, border=True)
    if attribute == "invert_background":
        return replace(labels, invert_bg=True)
    if attribute == "darken":
        return replace(labels, darken=True)
    raise ValueError(f"attribute {attribute!r} not applicable")


def ground_truth_edit(image, labels, prompt):
    """Analytic edit target: rewrite the labels per the prompt attribute and
    re-render. The input image only pins the canvas size, which is why the
    edit is exactly idempotent."""
    side = np.asarray(image).shape[0]
    return render(edit_labels(labels, prompt.attribute), side)


@dataclass(frozen=True)
class PartitionedDataset:
    """Immutable permit/forbid splits with per-set unseen holdouts."""

    permit_train: tuple  # of (image_id, image)
    permit_unseen: tuple
    forbid_train: tuple
    forbid_unseen: tuple
    prompts: tuple
    seed: int
    labels: dict  # image_id -> SceneLabels (empty for manifest datasets)

    def subsets(self):
        return {
            "permit_train": self.permit_train,
            "permit_unseen": self.permit_unseen,
            "forbid_train": self.forbid_train,
            "forbid_unseen": self.forbid_unseen,
        }

    def all_ids(self):
        out = []
        for rows in self.subsets().values():
            out.extend(i for i, _ in rows)
        return out


def _round_half_up(x):
    return int(np.floor(x + 0.5))


def partition(images, forbid_ratio, unseen_fraction, seed, prompts=None, labels=None):
    """Split (image_id, image) rows into permit/forbid with unseen holdouts.

    Sizes use round-half-up so e.g. 100 images at ratio 0.5 and holdout 0.1
    give exactly 45/5/45/5. Any empty subset whose fraction is positive is
    rejected.
    """
    if not 0 < forbid_ratio < 1:
        raise ValueError("forbid_ratio must be in (0, 1)")
    if not 0 <= unseen_fraction < 1:
        raise ValueError("unseen_fraction must be in [0, 1)")
    rows = [(i, img) for i, img, *_ in images]
    n = len(rows)
    n_forbid = _round_half_up(forbid_ratio * n)
    n_permit = n - n_forbid
    if 0 in (n_forbid, n_permit):
        raise SizeError(f"degenerate split: permit={n_permit} forbid={n_forbid}")
    order = np.random.default_rng(seed).permutation(n)
    forbid = [rows[i] for i in order[:n_forbid]]
    permit = [rows[i] for i in order[n_forbid:]]

    def holdout(rows_):
        k = _round_half_up(unseen_fraction * len(rows_))
        if unseen_fraction > 0 and (k == 0 or k == len(rows_)):
            raise SizeError(f"unseen holdout of {k} from {len(rows_)} is degenerate")
        return rows_[k:], rows_[:k]

    permit_train, permit_unseen = holdout(permit)
    forbid_train, forbid_unseen = holdout(forbid)
    if labels is None:
        labels = {row[0]: row[2] for row in images if len(row) == 3}
    return PartitionedDataset(
        permit_train=tuple(permit_train),
        permit_unseen=tuple(permit_unseen),
        forbid_train=tuple(forbid_train),
        forbid_unseen=tuple(forbid_unseen),
        prompts=tuple(prompts or default_prompts()),
        seed=seed,
        labels=labels,
    )


def save_dataset(ds, out_dir):
    """Persist as PNGs plus a labels CSV and the split manifest."""
    img_dir = os.path.join(out_dir, "images")
    os.makedirs(img_dir, exist_ok=True)
    with open(os.path.join(out_dir, "labels.csv"), "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["image_id", "shape", "color", "cx", "cy", "size", "bg"])
        for name, rows in ds.subsets().items():
            for i, img in rows:
                save_png(os.path.join(img_dir, f"{i:05d}.png"), img)
                lab = ds.labels.get(i)
                if lab is not None:
                    wr.writerow([i, lab.shape, COLOR_NAMES[lab.color_idx],
                                 lab.cx, lab.cy, lab.size, lab.bg])
    write_manifest(ds, os.path.join(out_dir, "manifest.csv"), "images")


def write_manifest(ds, path, img_dir="images"):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["image_path", "set", "unseen", "prompt_id"])
        pid = ",".join(str(p.prompt_id) for p in ds.prompts)
        for name, rows in ds.subsets().items():
            grp, _, split = name.partition("_")
            for i, _ in rows:
                wr.writerow([os.path.join(img_dir, f"{i:05d}.png"), grp,
                             int(split == "unseen"), pid])


def load_manifest(path, prompts=None):
    """Rebuild a PartitionedDataset from a manifest CSV of real images.
    Such datasets carry no scene labels, so analytic edits are unavailable."""
    base = os.path.dirname(os.path.abspath(path))
    buckets = {k: [] for k in
               ("permit_train", "permit_unseen", "forbid_train", "forbid_unseen")}
    with open(path, newline="") as fh:
        for idx, row in enumerate(csv.DictReader(fh)):
            img = load_png(os.path.join(base, row["image_path"]))
            key = f"{row['set']}_{'unseen' if int(row['unseen']) else 'train'}"
            buckets[key].append((idx, img))
    return PartitionedDataset(
        permit_train=tuple(buckets["permit_train"]),
        permit_unseen=tuple(buckets["permit_unseen"]),
        forbid_train=tuple(buckets["forbid_train"]),
        forbid_unseen=tuple(buckets["forbid_unseen"]),
        prompts=tuple(prompts or default_prompts()),
        seed=-1,
        labels={},
    )
