import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as npst

from editlock import objectives as O
from editlock.imaging import VaguenessSpec, apply_vagueness


def _brute_mae(a, b):
    # deliberate python loop over every entry
    total = 0.0
    k = 0
    for x, y in zip(np.ravel(a), np.ravel(b)):
        total += abs(float(x) - float(y))
        k += 1
    return total / k, k


def test_losses_match_brute_force():
    rng = np.random.default_rng(0)
    for _ in range(20):
        a = rng.uniform(0, 1, (5, 4, 3))
        b = rng.uniform(0, 1, (5, 4, 3))
        want, k = _brute_mae(a, b)
        for fn in (O.forbid_loss, O.permit_loss):
            got = fn(a, b)
            assert abs(got.value - want) <= 1e-12
            assert got.k == k == 60


def test_loss_zero_iff_identical():
    a = np.random.default_rng(1).uniform(0, 1, (4, 4, 3))
    assert O.forbid_loss(a, a.copy()).value == 0.0
    b = a.copy()
    b[0, 0, 0] += 1e-9
    assert O.forbid_loss(a, b).value > 0.0


def test_loss_shape_mismatch():
    with pytest.raises(ValueError):
        O.forbid_loss(np.zeros((4, 4, 3)), np.zeros((4, 4, 1)))


def test_uniform_deviation_example():
    assert O.forbid_loss(np.zeros((8, 8, 3)), np.full((8, 8, 3), 0.5)).value == 0.5


arrays = npst.arrays(np.float64, (3, 3, 3),
                     elements=st.floats(0, 1, allow_nan=False))


@settings(max_examples=50, deadline=None)
@given(arrays, arrays)
def test_loss_symmetry_and_nonnegativity(a, b):
    ab, ba = O.forbid_loss(a, b), O.forbid_loss(b, a)
    assert ab.value == ba.value
    assert ab.value >= 0.0


@settings(max_examples=50, deadline=None)
@given(arrays, arrays, arrays)
def test_loss_triangle_inequality(a, b, c):
    assert O.forbid_loss(a, c).value <= \
        O.forbid_loss(a, b).value + O.forbid_loss(b, c).value + 1e-12


@settings(max_examples=50, deadline=None)
@given(arrays, arrays, st.floats(-0.5, 0.5, allow_nan=False))
def test_loss_translation_invariance(a, b, shift):
    base = O.forbid_loss(a, b).value
    assert abs(O.forbid_loss(a + shift, b + shift).value - base) <= 1e-12


def test_loss_subgradient_bounded_by_one_over_k():
    # d/dx mean|x - t| has entries in {-1/k, 0, +1/k}
    x = torch.rand(4, 4, 3, dtype=torch.float64, requires_grad=True)
    t = torch.rand(4, 4, 3, dtype=torch.float64)
    (x - t).abs().mean().backward()
    k = x.numel()
    assert x.grad.abs().max().item() <= 1 / k + 1e-15


def test_total_loss_weighted_sums():
    f = [O.LossValue(0.2, 10), O.LossValue(0.4, 10)]
    p = [O.LossValue(0.1, 10)]
    assert O.total_loss(f, p, 0.5, 0.5) == pytest.approx(0.5 * 0.6 + 0.5 * 0.1)
    assert O.total_loss([], [], 1.0, 1.0) == 0.0
    assert O.total_loss(f, p, 0.0, 1.0) == pytest.approx(0.1)
    with pytest.raises(ValueError):
        O.total_loss(f, p, -0.1, 0.5)


def test_baseline_target_max_loss():
    img = np.random.default_rng(2).uniform(0, 1, (8, 8, 3))
    gt = np.random.default_rng(3).uniform(0, 1, (8, 8, 3))
    tgt, sign = O.baseline_target("max_loss", img, gt, [], VaguenessSpec(), seed=0)
    assert sign == -1
    assert np.array_equal(tgt, gt)


def test_baseline_target_noisy_label():
    img = np.zeros((64, 64, 3))
    tgt, sign = O.baseline_target("noisy_label", img, None, [], VaguenessSpec(), seed=5)
    tgt2, _ = O.baseline_target("noisy_label", img, None, [], VaguenessSpec(), seed=5)
    assert sign == +1
    assert np.array_equal(tgt, tgt2)
    assert tgt.min() >= 0 and tgt.max() <= 1
    assert abs(tgt.mean() - 0.5) < 0.02
    # clipping at [0,1] shaves the tails, so the sample std sits below 0.25
    assert 0.18 < tgt.std() < 0.26


def test_baseline_target_retain_label():
    img = np.zeros((4, 4, 3))
    pool = [np.full((4, 4, 3), v) for v in (0.1, 0.5, 0.9)]
    tgt, sign = O.baseline_target("retain_label", img, None, pool, VaguenessSpec(), seed=7)
    assert sign == +1
    assert any(np.array_equal(tgt, p) for p in pool)
    with pytest.raises(ValueError):
        O.baseline_target("retain_label", img, None, [], VaguenessSpec(), seed=7)


def test_baseline_target_secure_is_vague_transform():
    img = np.random.default_rng(4).uniform(0, 1, (16, 16, 3))
    spec = VaguenessSpec("resize", size_n=4)
    tgt, sign = O.baseline_target("secure", img, None, [], spec, seed=0)
    assert sign == +1
    assert np.array_equal(tgt, apply_vagueness(spec, img))


def test_baseline_target_unknown_kind():
    with pytest.raises(ValueError):
        O.baseline_target("relabel", np.zeros((4, 4, 3)), None, [], VaguenessSpec(), 0)


def test_baseline_kinds_enumeration():
    assert set(O.BASELINE_KINDS) == \
        {"max_loss", "noisy_label", "retain_label", "retrain", "secure"}
