"""Adam with global gradient clipping and max-norm projection, plus a Riemannian SGD."""

from __future__ import annotations

import numpy as np

from .. import kernels
from .. import manifold as mf


class NumericalAbort(RuntimeError):
    """Non-finite gradient or loss. ``state`` holds the last good parameters, if known."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


def clip_global_norm(grads, max_norm):
    """Scale ``grads`` in place so their joint L2 norm is at most ``max_norm``; returns the pre-clip norm."""
    total = float(np.sqrt(sum(float(np.sum(np.square(g, dtype=np.float64))) for g in grads)))
    if max_norm is not None and total > max_norm:
        factor = max_norm / total
        for g in grads:
            g *= factor
    return total


def check_finite(named_grads):
    for name, g in named_grads:
        if not np.all(np.isfinite(g)):
            bad = int(np.sum(~np.isfinite(g)))
            raise NumericalAbort(f"non-finite gradient in parameter {name!r} ({bad} entries)")


class _Base:
    def __init__(self, named_params, lr, grad_clip=None, max_norm=None, projected=()):
        self.named = [(n, p) for n, p in named_params if p.requires_grad]
        if lr <= 0:
            raise ValueError("learning rate must be positive")
        self.lr = float(lr)
        self.grad_clip = grad_clip
        self.max_norm = max_norm
        self.projected = {id(p) for p in projected}
        self.step_count = 0
        self.last_grad_norm = 0.0

    def _gather(self):
        grads = []
        for _, p in self.named:
            g = p.grad
            grads.append(np.zeros_like(p.data) if g is None else np.array(g, dtype=p.dtype))
        check_finite(zip((n for n, _ in self.named), grads))
        self.last_grad_norm = clip_global_norm(grads, self.grad_clip)
        return grads

    def project(self):
        """Max-norm projection of the spatial rows of every projected parameter."""
        if self.max_norm is None:
            return
        for _, p in self.named:
            if id(p) in self.projected:
                rows = p.data.reshape(-1, p.shape[-1])
                kernels.clip_row_norms(rows, self.max_norm)

    def zero_grad(self):
        for _, p in self.named:
            p.grad = None


class Adam(_Base):
    """Bias-corrected Adam over every trainable parameter.

    Embedding tables listed in ``projected`` are spatial coordinates; after
    each update rows longer than ``max_norm`` are scaled back to it (the time
    coordinate is recomputed from them on the next forward pass).
    """

    def __init__(self, named_params, lr=1e-3, betas=(0.9, 0.999), eps=1e-8, grad_clip=None,
                 max_norm=None, projected=(), weight_decay=0.0):
        super().__init__(named_params, lr, grad_clip, max_norm, projected)
        self.betas = tuple(float(b) for b in betas)
        self.eps = float(eps)
        self.weight_decay = float(weight_decay)
        self.m = [np.zeros_like(p.data) for _, p in self.named]
        self.v = [np.zeros_like(p.data) for _, p in self.named]

    def step(self, lr=None):
        lr = self.lr if lr is None else lr
        grads = self._gather()
        self.step_count += 1
        b1, b2 = self.betas
        c1 = 1.0 - b1 ** self.step_count
        c2 = 1.0 - b2 ** self.step_count
        for (_, p), g, m, v in zip(self.named, grads, self.m, self.v):
            if self.weight_decay:
                g = g + self.weight_decay * p.data
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            update = lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
            p.data -= update.astype(p.dtype, copy=False)
        self.project()

    def state_dict(self):
        return {"step": self.step_count, "m": [a.copy() for a in self.m], "v": [a.copy() for a in self.v]}


class RiemannianSGD(_Base):
    """Exponential-map SGD for the projected embedding tables, plain SGD elsewhere.

    A projected row ``s`` is the point x = (sqrt(|s|^2 - 1/K), s). Since the
    loss depends on ``s`` alone its ambient gradient is h = (0, g_s), and the
    Riemannian gradient is the tangent projection h - K <x, h>_L x.
    """

    def __init__(self, named_params, lr=1e-2, K=mf.DEFAULT_K, grad_clip=None, max_norm=None,
                 projected=()):
        super().__init__(named_params, lr, grad_clip, max_norm, projected)
        self.K = mf.check_curvature(K)

    def step(self, lr=None):
        lr = self.lr if lr is None else lr
        grads = self._gather()
        self.step_count += 1
        for (_, p), g in zip(self.named, grads):
            if id(p) not in self.projected:
                p.data -= (lr * g).astype(p.dtype, copy=False)
                continue
            s = p.data.reshape(-1, p.shape[-1]).astype(np.float64)
            x = mf.project_to_hyperboloid(s, self.K)
            h = np.concatenate([np.zeros((len(s), 1)), g.reshape(len(s), -1)], axis=1)
            rgrad = mf.project_to_tangent(x, h, self.K)
            y = mf.exp_map(x, -lr * rgrad, self.K, tol=np.inf)
            p.data[...] = y[:, 1:].reshape(p.shape).astype(p.dtype)
        self.project()


def make_optimizer(name, named_params, lr, **kw):
    if name == "adam":
        kw.pop("K", None)
        return Adam(named_params, lr=lr, **kw)
    if name == "rsgd":
        for key in ("betas", "eps", "weight_decay"):
            kw.pop(key, None)
        return RiemannianSGD(named_params, lr=lr, **kw)
    raise ValueError(f"unknown optimizer {name!r} (adam or rsgd)")
