"""Toy prompt-conditioned diffusion manipulator.

A small convolutional encoder-decoder denoiser (sinusoidal timestep embedding
plus a learned prompt-id embedding, injected into every block) under a short
linear beta schedule. Editing runs the usual inversion-style pipeline: noise
the input forward to a fraction t0 of the schedule, then walk back down a
deterministic non-Markovian reverse grid conditioned on the prompt. All
sampling noise comes from one seeded generator, so the whole pipeline is a
pure function of (parameters, image, prompt).

Pretraining teaches the reverse chain to pull partially-noised source images
toward their analytic edit targets: half the batches are plain
noise-prediction pairs on the targets, the other half interpolate source and
target with a mixing weight tied to the timestep and regress the pseudo-noise
that points at the target. This is what makes a 70k-parameter net behave like
an "edit model" rather than an autoencoder.
"""

import copy
import math
import time
from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .data import ground_truth_edit
from .errors import StageError

FORMAT_VERSION = 1


@dataclass(frozen=True)
class ModelSpec:
    t_steps: int = 50
    beta_start: float = 1e-3
    beta_end: float = 0.05
    ddim_steps: int = 10
    t0: float = 0.4
    noise_seed: int = 1234
    channels: tuple = (12, 24, 48)
    emb_dim: int = 32
    n_prompts: int = 5

    def __post_init__(self):
        if not 0 <= self.t0 <= 1:
            raise ValueError("t0 must be in [0, 1]")
        if self.ddim_steps < 2:
            raise ValueError("need at least 2 reverse-grid points")


@dataclass
class PretrainSpec:
    steps: int = 2200
    batch_size: int = 16
    lr: float = 1.5e-3
    lr_min: float = 1e-4
    seed: int = 11
    cross_fraction: float = 0.5


class Block(nn.Module):
    def __init__(self, cin, cout, ed):
        super().__init__()
        self.c1 = nn.Conv2d(cin, cout, 3, padding=1)
        self.c2 = nn.Conv2d(cout, cout, 3, padding=1)
        self.e = nn.Linear(ed, cout)

    def forward(self, x, emb):
        h = F.silu(self.c1(x) + self.e(emb)[:, :, None, None])
        return F.silu(self.c2(h))


class Denoiser(nn.Module):
    def __init__(self, channels=(12, 24, 48), emb_dim=32, n_prompts=5):
        super().__init__()
        c1, c2, c3 = channels
        self.emb_dim = emb_dim
        self.pe = nn.Embedding(n_prompts, emb_dim)
        self.d1 = Block(3, c1, emb_dim)
        self.d2 = Block(c1, c2, emb_dim)
        self.mid = Block(c2, c3, emb_dim)
        self.u2 = Block(c3 + c2, c2, emb_dim)
        self.u1 = Block(c2 + c1, c1, emb_dim)
        self.out = nn.Conv2d(c1, 3, 3, padding=1)

    def temb(self, t):
        half = self.emb_dim // 2
        freqs = torch.exp(-math.log(1000) * torch.arange(half, dtype=torch.float32) / (half - 1))
        ang = t[:, None].float() * freqs[None]
        return torch.cat([torch.sin(ang), torch.cos(ang)], 1)

    def forward(self, z, t, p):
        emb = self.temb(t) + self.pe(p)
        h1 = self.d1(z, emb)
        h2 = self.d2(F.avg_pool2d(h1, 2), emb)
        m = self.mid(F.avg_pool2d(h2, 2), emb)
        u2 = self.u2(torch.cat([F.interpolate(m, scale_factor=2), h2], 1), emb)
        u1 = self.u1(torch.cat([F.interpolate(u2, scale_factor=2), h1], 1), emb)
        return self.out(u1)


def _to_bchw(img):
    arr = np.asarray(img, dtype=np.float32)
    if arr.ndim == 3:
        arr = arr[None]
    return torch.from_numpy(np.ascontiguousarray(arr.transpose(0, 3, 1, 2)))


def _to_hwc(x):
    return x.permute(0, 2, 3, 1).numpy().astype(np.float64)


class ManipulatorModel:
    """Denoiser parameters plus schedule and sampling config; houses f(x, p)."""

    def __init__(self, net, spec, meta=None):
        self.net = net
        self.spec = spec
        betas = torch.linspace(spec.beta_start, spec.beta_end, spec.t_steps,
                               dtype=torch.float64).float()
        self.betas = betas
        self.abar = torch.cumprod(1 - betas, 0)
        self.meta = dict(meta or {})

    @classmethod
    def create(cls, spec, seed=3, meta=None):
        torch.manual_seed(seed)
        net = Denoiser(spec.channels, spec.emb_dim, spec.n_prompts)
        return cls(net, spec, meta)

    def clone(self):
        m = ManipulatorModel(copy.deepcopy(self.net), self.spec, dict(self.meta))
        return m

    # reverse-time visiting order for the edit pipeline: the coarse uniform
    # grid restricted below the entry point, plus the entry point itself
    def edit_grid(self):
        t_start = round(self.spec.t0 * (self.spec.t_steps - 1))
        full = sorted(set(int(round(v)) for v in
                          np.linspace(0, self.spec.t_steps - 1, self.spec.ddim_steps)))
        return sorted(set([g for g in full if g < t_start] + [t_start]))

    def t_start(self):
        return round(self.spec.t0 * (self.spec.t_steps - 1))

    def _check_prompt(self, prompt_id):
        if not 0 <= prompt_id < self.spec.n_prompts:
            raise ValueError(f"prompt_id {prompt_id} out of range")

    def noise_predict(self, noisy_image, t, prompt_id):
        """Single-image denoiser query on numpy (H, W, C) data."""
        if not 0 <= t < self.spec.t_steps:
            raise ValueError(f"t={t} outside schedule of {self.spec.t_steps}")
        self._check_prompt(prompt_id)
        z = _to_bchw(noisy_image)
        tt = torch.full((1,), t, dtype=torch.long)
        pp = torch.full((1,), prompt_id, dtype=torch.long)
        with torch.no_grad():
            e = self.net(z, tt, pp)
        return _to_hwc(e)[0]

    def initial_noise(self, shape_bchw):
        g = torch.Generator().manual_seed(self.spec.noise_seed)
        return torch.randn(1, *shape_bchw[1:], generator=g)

    def manipulate_tensor(self, x, prompt_ids):
        """Differentiable edit pipeline on a (B, C, H, W) tensor. Returns the
        pre-clip estimate of the edited image."""
        if self.spec.t0 == 0:
            return x
        grid = self.edit_grid()
        eps0 = self.initial_noise(x.shape)
        a_in = self.abar[grid[-1]]
        z = a_in.sqrt() * x + (1 - a_in).sqrt() * eps0
        for i in range(len(grid) - 1, 0, -1):
            t, s = grid[i], grid[i - 1]
            tt = torch.full((x.shape[0],), t, dtype=torch.long)
            e = self.net(z, tt, prompt_ids)
            at, as_ = self.abar[t], self.abar[s]
            x0 = (z - (1 - at).sqrt() * e) / at.sqrt()
            z = as_.sqrt() * x0 + (1 - as_).sqrt() * e
        tt = torch.full((x.shape[0],), grid[0], dtype=torch.long)
        e = self.net(z, tt, prompt_ids)
        a0 = self.abar[grid[0]]
        return (z - (1 - a0).sqrt() * e) / a0.sqrt()

    def manipulate(self, image, prompt_id):
        """Edit one numpy image; deterministic, output clipped to [0, 1]."""
        self._check_prompt(prompt_id)
        if self.spec.t0 == 0:
            return np.array(image, dtype=np.float64)
        x = _to_bchw(image)
        pp = torch.full((1,), prompt_id, dtype=torch.long)
        with torch.no_grad():
            out = self.manipulate_tensor(x, pp).clamp(0, 1)
        return _to_hwc(out)[0]

    def manipulate_many(self, images, prompt_id, batch=32):
        self._check_prompt(prompt_id)
        if self.spec.t0 == 0:
            return [np.array(im, dtype=np.float64) for im in images]
        outs = []
        for k in range(0, len(images), batch):
            x = _to_bchw(np.stack([np.asarray(im) for im in images[k:k + batch]]))
            pp = torch.full((x.shape[0],), prompt_id, dtype=torch.long)
            with torch.no_grad():
                out = self.manipulate_tensor(x, pp).clamp(0, 1)
            outs.extend(_to_hwc(out))
        return outs

    def save(self, path):
        torch.save({
            "format": FORMAT_VERSION,
            "state": self.net.state_dict(),
            "spec": self.spec.__dict__,
            "meta": self.meta,
        }, path)

    @classmethod
    def load(cls, path):
        blob = torch.load(path, weights_only=False)
        if blob.get("format") != FORMAT_VERSION:
            raise ValueError(f"checkpoint format {blob.get('format')} != {FORMAT_VERSION}")
        spec = ModelSpec(**blob["spec"])
        model = cls(Denoiser(spec.channels, spec.emb_dim, spec.n_prompts), spec, blob["meta"])
        model.net.load_state_dict(blob["state"])
        return model


def training_rows(dataset, permit_only=False):
    rows = list(dataset.permit_train)
    if not permit_only:
        rows += list(dataset.forbid_train)
    return rows


def pretrain(dataset, prompts, cfg, spec=None, rows=None, init_seed=3, log=None):
    """Train a fresh manipulator on (image, prompt, analytic edit) triples.

    rows defaults to the union of both train splits; the retrain baseline
    passes the permit split only. Returns (model, per-step loss list).
    """
    if rows is None:
        rows = training_rows(dataset)
    if not rows:
        raise ValueError("no training images")
    spec = spec or ModelSpec(n_prompts=len(prompts))
    model = ManipulatorModel.create(spec, seed=init_seed)
    model.meta["trained_on"] = sorted(i for i, _ in rows)
    if cfg.steps == 0:
        return model, []

    imgs = _to_bchw(np.stack([img for _, img in rows]))
    tgts = torch.stack([
        _to_bchw(np.stack([ground_truth_edit(img, dataset.labels[i], p)
                           for i, img in rows]))
        for p in prompts
    ])
    pids = torch.tensor([p.prompt_id for p in prompts], dtype=torch.long)
    n = len(rows)
    t_start = max(model.t_start(), 1)
    abar = model.abar
    g = torch.Generator().manual_seed(cfg.seed)
    opt = torch.optim.Adam(model.net.parameters(), lr=cfg.lr)
    sched = torch.optim.lr_scheduler.CosineAnnealingLR(opt, T_max=cfg.steps, eta_min=cfg.lr_min)
    losses = []
    tic = time.time()
    for step in range(cfg.steps):
        idx = torch.randint(0, n, (cfg.batch_size,), generator=g)
        p_pos = torch.randint(0, len(prompts), (cfg.batch_size,), generator=g)
        x, y = imgs[idx], tgts[p_pos, idx]
        p = pids[p_pos]
        pure = torch.rand(cfg.batch_size, generator=g) >= cfg.cross_fraction
        t_pure = torch.randint(0, spec.t_steps, (cfg.batch_size,), generator=g)
        t_cross = torch.randint(0, t_start + 1, (cfg.batch_size,), generator=g)
        t = torch.where(pure, t_pure, t_cross)
        # cross pairs: mix source into the target, more source at shallower t,
        # and regress the pseudo-noise that points the chain at the target
        v = torch.rand(cfg.batch_size, generator=g)
        u_lo = (1 - t.float() / t_start).clamp(0, 1)
        u = torch.where(pure, torch.ones(cfg.batch_size), u_lo + v * (1 - u_lo))
        u = u[:, None, None, None]
        m = u * y + (1 - u) * x
        eps = torch.randn(x.shape, generator=g)
        a = abar[t][:, None, None, None]
        z = a.sqrt() * m + (1 - a).sqrt() * eps
        target = (z - a.sqrt() * y) / (1 - a).sqrt()
        loss = F.mse_loss(model.net(z, t, p), target)
        if not torch.isfinite(loss):
            raise StageError("pretrain", f"non-finite loss at step {step}")
        opt.zero_grad()
        loss.backward()
        opt.step()
        sched.step()
        losses.append(float(loss.detach()))
        if log and step % 500 == 0:
            log(f"pretrain step {step} loss {losses[-1]:.4f}")
    if log:
        log(f"pretrain done in {time.time() - tic:.1f}s, final loss {losses[-1]:.4f}")
    return model, losses
