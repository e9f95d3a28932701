"""PCA projection determinism and the grouped-embedding export."""

import csv

import numpy as np
import pytest
from scipy import stats

from editlock.projection import embed_projection, pca_project


class _FlatEmbedder:
    def embed(self, images):
        return np.stack([np.ravel(np.asarray(im)) for im in images])


def _clusters(rng, n_per=12, dim=16, k=3, spread=0.15):
    feats, tags = [], []
    for c in range(k):
        center = rng.uniform(-1, 1, dim)
        feats.extend(center + rng.normal(0, spread, (n_per, dim)))
        tags.extend([c] * n_per)
    return np.array(feats), np.array(tags)


def test_pca_is_deterministic_and_centered(rng):
    x, _ = _clusters(rng)
    a = pca_project(x)
    b = pca_project(x.copy())
    assert np.array_equal(a, b)
    assert a.shape == (len(x), 2)
    assert np.allclose(a.mean(axis=0), 0, atol=1e-9)


def test_pca_component_variance_order(rng):
    x, _ = _clusters(rng)
    coords = pca_project(x, 2)
    assert coords[:, 0].var() >= coords[:, 1].var()


def test_pca_matches_covariance_eigenvalues(rng):
    x, _ = _clusters(rng, n_per=30)
    coords = pca_project(x, 2)
    evals = np.sort(np.linalg.eigvalsh(np.cov(x, rowvar=False)))[::-1]
    assert coords[:, 0].var(ddof=1) == pytest.approx(evals[0], rel=1e-9)
    assert coords[:, 1].var(ddof=1) == pytest.approx(evals[1], rel=1e-9)


def test_pca_input_validation():
    with pytest.raises(ValueError):
        pca_project(np.zeros(5))
    with pytest.raises(ValueError):
        pca_project(np.zeros((1, 5)))


def test_pca_preserves_structure_better_than_random_axes():
    """Silhouette-style sanity check: 2-D PCA coordinates keep cluster
    neighborhoods better than a fixed random 2-D projection. Spearman rank
    agreement between full-dim and projected pairwise distances is higher."""
    rng = np.random.default_rng(9)
    x, _ = _clusters(rng, n_per=16, dim=16, k=3)
    iu = np.triu_indices(len(x), 1)

    def pair_d(z):
        return np.linalg.norm(z[:, None] - z[None], axis=-1)[iu]

    full = pair_d(x)
    rho_pca = stats.spearmanr(full, pair_d(pca_project(x))).statistic
    rand = x @ rng.normal(0, 1, (16, 2))
    rho_rand = stats.spearmanr(full, pair_d(rand - rand.mean(0))).statistic
    assert rho_pca > rho_rand
    assert rho_pca > 0.9


def test_embed_projection_rows_and_csv(tmp_path, rng):
    groups = {
        "alpha": [(i, rng.uniform(0, 1, (4, 4, 3))) for i in range(5)],
        "beta": [(10 + i, rng.uniform(0, 1, (4, 4, 3))) for i in range(6)],
    }
    path = tmp_path / "embedding.csv"
    out = embed_projection(groups, _FlatEmbedder(), n_per_group=4, path=path)
    assert len(out) == 8
    assert [g for g, *_ in out] == ["alpha"] * 4 + ["beta"] * 4
    assert [i for _, i, *_ in out] == [0, 1, 2, 3, 10, 11, 12, 13]
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["group", "image_id", "x", "y"]
    assert len(rows) == 9
    for row, (g, i, x, y) in zip(rows[1:], out):
        assert row[0] == g and int(row[1]) == i
        assert float(row[2]) == pytest.approx(x)
        assert float(row[3]) == pytest.approx(y)


def test_embed_projection_rejects_small_groups(rng):
    groups = {"only": [(0, rng.uniform(0, 1, (4, 4, 3)))]}
    with pytest.raises(ValueError, match="only"):
        embed_projection(groups, _FlatEmbedder(), n_per_group=3)
