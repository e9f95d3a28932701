"""Vagueness transforms and frequency-domain diagnostics.

Images are numpy arrays of shape (H, W, C) with C in {1, 3} and float values
in [0, 1]. Every transform preserves the shape. All blurs use normalized
kernels with edge-replicate padding, so constants pass through unchanged and
each output pixel is a convex combination of input pixels. Outputs are
clipped to [0, 1] as a final step; pass clip=False to get the raw linear
result (linearity and Lipschitz statements hold pre-clip only).
"""

import math
from dataclasses import dataclass

import numpy as np
from PIL import Image
from scipy import ndimage

from .errors import DimensionError

KINDS = ("resize", "gaussian", "box", "motion", "fft_lowpass")


@dataclass(frozen=True)
class VaguenessSpec:
    """Declarative description of a degradation. Only the parameters of the
    selected kind are consumed; the rest keep their defaults and are ignored.
    """

    kind: str = "resize"
    size_n: int = 16
    sigma: float = 2.0
    kernel_k: int = 5
    length: int = 7
    angle: float = 0.0
    cutoff: float = 0.25

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown vagueness kind {self.kind!r}")

    def label(self):
        if self.kind == "resize":
            return f"{self.size_n}x{self.size_n}"
        if self.kind == "gaussian":
            return f"gaussian({self.sigma:g})"
        if self.kind == "box":
            return f"box({self.kernel_k})"
        if self.kind == "motion":
            return f"motion({self.length},{self.angle:g})"
        return f"fft({self.cutoff:g})"


def check_image(img):
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 3 or img.shape[2] not in (1, 3):
        raise DimensionError(f"expected (H, W, C) with C in (1, 3), got {img.shape}")
    if not np.all(np.isfinite(img)):
        raise ValueError("image contains non-finite values")
    return img


def _finish(img, clip):
    return np.clip(img, 0.0, 1.0) if clip else img


def resize_vague(image, n, clip=True):
    """Block-average down to n x n per channel, then replicate blocks back up.

    n must divide both spatial dims; the averaging grid then aligns exactly
    with pixel blocks, which makes the operator an orthogonal-projection
    style map (idempotent and non-expansive).
    """
    img = check_image(image)
    h, w, c = img.shape
    if n < 1 or h % n or w % n:
        raise DimensionError(f"n={n} must divide image dims {h}x{w}")
    bh, bw = h // n, w // n
    small = img.reshape(n, bh, n, bw, c).mean(axis=(1, 3))
    out = np.repeat(np.repeat(small, bh, axis=0), bw, axis=1)
    return _finish(out, clip)


def _conv2(img, ker):
    # per-channel 2-D correlation with replicate padding; kernels here are
    # symmetric under 180-degree rotation except motion, where the rasterized
    # line itself defines the operator, so correlate vs convolve is a pure
    # convention and we pin correlate.
    out = np.empty_like(img)
    for ch in range(img.shape[2]):
        out[:, :, ch] = ndimage.correlate(img[:, :, ch], ker, mode="nearest")
    return out


def gaussian_kernel(sigma):
    r = math.ceil(3 * sigma)
    xs = np.arange(-r, r + 1, dtype=np.float64)
    g = np.exp(-0.5 * (xs / sigma) ** 2)
    ker = np.outer(g, g)
    return ker / ker.sum()


def gaussian_blur(image, sigma, clip=True):
    """Gaussian blur, kernel truncated at radius ceil(3*sigma), normalized."""
    img = check_image(image)
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if sigma == 0:
        return _finish(img, clip)
    return _finish(_conv2(img, gaussian_kernel(sigma)), clip)


def box_blur(image, k, clip=True):
    img = check_image(image)
    if k < 1 or k % 2 == 0:
        raise ValueError(f"box size must be odd and positive, got {k}")
    if k == 1:
        return _finish(img, clip)
    ker = np.full((k, k), 1.0 / (k * k))
    return _finish(_conv2(img, ker), clip)


def motion_kernel(length, angle):
    """1-pixel-wide line of `length` taps rasterized at `angle` degrees,
    normalized to sum 1. angle=0 is a horizontal streak."""
    r = math.ceil((length - 1) / 2)
    s = 2 * r + 1
    ker = np.zeros((s, s))
    th = math.radians(angle)
    for i in range(length):
        off = i - (length - 1) / 2
        col = r + int(round(off * math.cos(th)))
        row = r - int(round(off * math.sin(th)))
        ker[row, col] += 1.0
    return ker / ker.sum()


def motion_blur(image, length, angle=0.0, clip=True):
    img = check_image(image)
    if length < 1:
        raise ValueError("length must be >= 1")
    if length == 1:
        return _finish(img, clip)
    return _finish(_conv2(img, motion_kernel(length, angle)), clip)


def _radius_grid(h, w):
    # frequency radius normalized so the Nyquist frequency of each axis is 1
    fy = np.fft.fftfreq(h)[:, None] / 0.5
    fx = np.fft.fftfreq(w)[None, :] / 0.5
    return np.hypot(fy, fx)


def fft_lowpass(image, cutoff, clip=True):
    """Ideal low-pass: zero out all frequencies with normalized radius above
    cutoff (cutoff=1 is the per-axis Nyquist). DC is always kept, so constant
    images pass through exactly before clipping."""
    img = check_image(image)
    if not 0 < cutoff <= 1:
        raise ValueError(f"cutoff must be in (0, 1], got {cutoff}")
    h, w, _ = img.shape
    mask = _radius_grid(h, w) <= cutoff
    out = np.empty_like(img)
    for ch in range(img.shape[2]):
        spec = np.fft.fft2(img[:, :, ch])
        out[:, :, ch] = np.fft.ifft2(spec * mask).real
    return _finish(out, clip)


def spectral_energy_ratio(image, cutoff):
    """Fraction of non-DC spectral energy above the cutoff radius, in [0, 1].
    Returns 0 for constant images (no non-DC energy at all)."""
    img = check_image(image)
    if not 0 < cutoff <= 1:
        raise ValueError(f"cutoff must be in (0, 1], got {cutoff}")
    h, w, _ = img.shape
    r = _radius_grid(h, w)
    high = r > cutoff
    nondc = r > 0
    e_high = 0.0
    e_all = 0.0
    for ch in range(img.shape[2]):
        power = np.abs(np.fft.fft2(img[:, :, ch])) ** 2
        e_high += power[high].sum()
        e_all += power[nondc].sum()
    if e_all == 0.0:
        return 0.0
    return float(e_high / e_all)


def apply_vagueness(spec, image, clip=True):
    """Dispatch a VaguenessSpec onto an image. This is Trans(.) used to build
    the vague training targets."""
    if spec.kind == "resize":
        return resize_vague(image, spec.size_n, clip)
    if spec.kind == "gaussian":
        return gaussian_blur(image, spec.sigma, clip)
    if spec.kind == "box":
        return box_blur(image, spec.kernel_k, clip)
    if spec.kind == "motion":
        return motion_blur(image, spec.length, spec.angle, clip)
    return fft_lowpass(image, spec.cutoff, clip)


def lipschitz_estimate(spec, samples, seed, side=32, channels=1):
    """Empirical Lipschitz constant of the pre-clip transform: max over
    sampled pairs of ||T(x1) - T(x2)||_2 / ||x1 - x2||_2.

    Pairs cycle through three families so the estimate actually probes the
    top of the spectrum instead of only heavily-damped noise directions:
    uniform random pairs, constant-offset pairs (blurs pass constants
    through, so these sit at ratio 1), and smooth low-frequency offsets.
    Identical pairs are skipped.
    """
    if samples < 1:
        raise ValueError("need at least one sample pair")
    rng = np.random.default_rng(seed)
    yy = np.arange(side, dtype=np.float64)[:, None, None]
    best = 0.0
    for i in range(samples):
        fam = i % 3
        if fam == 0:
            x1 = rng.uniform(0, 1, (side, side, channels))
            x2 = rng.uniform(0, 1, (side, side, channels))
        elif fam == 1:
            x1 = rng.uniform(0, 0.75, (side, side, channels))
            x2 = x1 + rng.uniform(0.05, 0.25)
        else:
            x1 = rng.uniform(0.3, 0.7, (side, side, channels))
            x2 = x1 + 0.2 * np.cos(2 * np.pi * yy / side)
        d = np.linalg.norm(x1 - x2)
        if d == 0.0:
            continue
        t1 = apply_vagueness(spec, x1, clip=False)
        t2 = apply_vagueness(spec, x2, clip=False)
        best = max(best, float(np.linalg.norm(t1 - t2) / d))
    return best


def save_png(path, image):
    img = check_image(image)
    arr = np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)
    if arr.shape[2] == 1:
        arr = arr[:, :, 0]
    Image.fromarray(arr).save(path)


def load_png(path):
    arr = np.asarray(Image.open(path))
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return arr.astype(np.float64) / 255.0
