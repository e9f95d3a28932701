"""2-D embedding projection of image groups for the separation analysis.

The default projector is plain PCA with a fixed sign convention (the largest
absolute loading of each component is made positive), so identical inputs map
to byte-identical coordinates. t-SNE makes prettier clusters but is
stochastic; it stays out of the deterministic path and can be produced
separately from the saved features if wanted.
"""

import csv

import numpy as np


def pca_project(features, n_components=2):
    """Center and project onto the top principal axes; deterministic."""
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or len(x) < 2:
        raise ValueError("need a (N>=2, d) feature matrix")
    xc = x - x.mean(axis=0)
    _, _, vt = np.linalg.svd(xc, full_matrices=False)
    comps = vt[:n_components]
    # sign convention: flip each axis so its largest-magnitude loading is positive
    for row in comps:
        j = np.argmax(np.abs(row))
        if row[j] < 0:
            row *= -1
    return xc @ comps.T


def embed_projection(images_by_group, embedder, n_per_group=50, path=None):
    """Sample the first n_per_group images of each group (by stored order),
    embed, PCA-project all groups jointly, and return (group, image_id, x, y)
    rows; optionally also write them as CSV."""
    picked = []
    for group in sorted(images_by_group):
        rows = images_by_group[group]
        if len(rows) < n_per_group:
            raise ValueError(f"group {group!r} has {len(rows)} < {n_per_group} images")
        picked.extend((group, i, img) for i, img in rows[:n_per_group])
    feats = embedder.embed([img for _, _, img in picked])
    coords = pca_project(feats, 2)
    out = [(g, i, float(x), float(y))
           for (g, i, _), (x, y) in zip(picked, coords)]
    if path:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["group", "image_id", "x", "y"])
            wr.writerows(out)
    return out
