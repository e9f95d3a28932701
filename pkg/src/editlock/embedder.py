"""Small in-repo feature extractor standing in for the big pretrained
backbones used by the full-scale evaluation stack.

A three-conv classifier is trained on the synthetic corpus to predict the
joint (shape, color) class of a scene. It exposes three read-only views used
by the metrics: the softmax head for distribution scores, the penultimate
feature vector for Frechet distances, and the L2-normalized feature for
cosine similarity. Training adds light noise/blur augmentation so the
features stay informative on degraded (blurred) model outputs.
"""

import hashlib
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .data import SHAPES, COLORS
from .diffusion import _to_bchw
from .imaging import box_blur

N_CLASSES = len(SHAPES) * len(COLORS)
FEATURE_DIM = 16


@dataclass
class EmbedderSpec:
    steps: int = 400
    batch_size: int = 32
    lr: float = 3e-3
    seed: int = 5
    noise_std: float = 0.03


class _Net(nn.Module):
    def __init__(self):
        super().__init__()
        self.c1 = nn.Conv2d(3, 16, 3, stride=2, padding=1)
        self.c2 = nn.Conv2d(16, 32, 3, stride=2, padding=1)
        self.c3 = nn.Conv2d(32, 32, 3, stride=2, padding=1)
        self.fc = nn.Linear(32, FEATURE_DIM)
        self.head = nn.Linear(FEATURE_DIM, N_CLASSES)

    def features(self, x):
        h = F.silu(self.c1(x))
        h = F.silu(self.c2(h))
        h = F.silu(self.c3(h))
        h = h.mean(dim=(2, 3))
        return torch.tanh(self.fc(h))

    def forward(self, x):
        return self.head(self.features(x))


def class_of(labels):
    return SHAPES.index(labels.shape) * len(COLORS) + labels.color_idx


class FeatureEmbedder:
    """Trained classifier wrapper; all query methods are pure and batched."""

    def __init__(self, net, spec):
        self.net = net
        self.spec = spec
        self.net.eval()

    @property
    def dim(self):
        return FEATURE_DIM

    @property
    def n_classes(self):
        return N_CLASSES

    def checkpoint_hash(self):
        h = hashlib.sha256()
        for name, q in sorted(self.net.state_dict().items()):
            h.update(name.encode())
            h.update(q.numpy().tobytes())
        return h.hexdigest()[:12]

    def _batched(self, images, fn, width):
        out = np.empty((len(images), width))
        for k in range(0, len(images), 64):
            x = _to_bchw(np.stack([np.asarray(im) for im in images[k:k + 64]]))
            with torch.no_grad():
                out[k:k + 64] = fn(x).numpy().astype(np.float64)
        return out

    def embed(self, images):
        """(N, d) penultimate features."""
        return self._batched(images, self.net.features, FEATURE_DIM)

    def probs(self, images):
        """(N, C) class posteriors."""
        return self._batched(images, lambda x: torch.softmax(self.net(x), 1), N_CLASSES)


def train_embedder(rows, labels, spec=None):
    """Fit the classifier on (image_id, image) rows with scene labels.

    Augmentation: per-sample gaussian pixel noise and an occasional box blur,
    so blurred/degraded outputs still land near their class clusters.
    """
    spec = spec or EmbedderSpec()
    torch.manual_seed(spec.seed)
    net = _Net()
    rng = np.random.default_rng(spec.seed)
    imgs = [np.asarray(img) for _, img in rows]
    ys = [class_of(labels[i]) for i, _ in rows]
    opt = torch.optim.Adam(net.parameters(), lr=spec.lr)
    for step in range(spec.steps):
        idx = rng.integers(0, len(imgs), spec.batch_size)
        batch = []
        for i in idx:
            im = imgs[i]
            if rng.random() < 0.25:
                im = box_blur(im, 3)
            im = np.clip(im + rng.normal(0, spec.noise_std, im.shape), 0, 1)
            batch.append(im)
        x = _to_bchw(np.stack(batch))
        y = torch.tensor([ys[i] for i in idx], dtype=torch.long)
        loss = F.cross_entropy(net(x), y)
        opt.zero_grad()
        loss.backward()
        opt.step()
    return FeatureEmbedder(net, spec)
