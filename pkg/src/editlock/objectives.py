"""Mean-absolute pixel losses and forbid-target construction for the
unlearning baselines.

Both losses are (1/k) * sum |a_i - b_i| over all k pixel-channel entries, so
they are identical functions kept under two names: forbid_loss measures the
distance to a vague target, permit_loss the distance to the pretrained
model's own output. The composite objective is a lambda-weighted sum of the
per-image losses over both sets.
"""

from dataclasses import dataclass

import numpy as np

from .imaging import apply_vagueness

BASELINE_KINDS = ("max_loss", "noisy_label", "retain_label", "retrain", "secure")


@dataclass(frozen=True)
class LossValue:
    value: float
    k: int


def _mae(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    return LossValue(float(np.abs(a - b).mean()), a.size)


def forbid_loss(output, vague_target):
    return _mae(output, vague_target)


def permit_loss(output, reference):
    return _mae(output, reference)


def total_loss(forbid_terms, permit_terms, lambda_forbid, lambda_permit):
    """Weighted sum of per-image losses: lam_f * sum(F) + lam_p * sum(P)."""
    if lambda_forbid < 0 or lambda_permit < 0:
        raise ValueError("lambda weights must be >= 0")
    sf = sum(t.value for t in forbid_terms)
    sp = sum(t.value for t in permit_terms)
    return lambda_forbid * sf + lambda_permit * sp


# forbid-phase target rules; each gives (target image, gradient sign) where
# sign +1 descends toward the target and -1 ascends away from it
def baseline_target(kind, forbid_image, ground_truth, permit_pool, vagueness, seed):
    if kind == "max_loss":
        return np.array(ground_truth, dtype=np.float64), -1
    if kind == "noisy_label":
        rng = np.random.default_rng(seed)
        shape = np.asarray(forbid_image).shape
        noise = rng.normal(0.5, 0.25, shape).clip(0.0, 1.0)
        return noise, +1
    if kind == "retain_label":
        if not permit_pool:
            raise ValueError("retain_label needs a nonempty permit pool")
        rng = np.random.default_rng(seed)
        pick = int(rng.integers(len(permit_pool)))
        return np.array(permit_pool[pick], dtype=np.float64), +1
    if kind == "secure":
        return apply_vagueness(vagueness, forbid_image), +1
    raise ValueError(f"no forbid-target rule for kind {kind!r}")
