"""Residual connection and position encoding.

There is no vector addition on the hyperboloid, so the skip input enters as
the bias of the block's last linear layer: the spatial direction is
``W h(o) + x_s`` and its length is ``lam * sigmoid(v.o + b')``.
Position encoding is the same operation with the word point as ``o`` and the
position point in the bias slot, sharing one matrix across positions.
"""

from __future__ import annotations

import logging

import numpy as np

from .. import autodiff as ad
from .. import manifold as mf
from .base import Module, Parameter, uniform
from .functional import _t, expand_as, lift
from .linear import ACTIVATIONS, DEGENERATE_NORM, INIT_BOUND

logger = logging.getLogger(__name__)


class LorentzResidual(Module):
    """``o`` has width ``in_features``; ``x`` and the output are points of width ``out_features``."""

    def __init__(self, in_features, out_features, K=mf.DEFAULT_K, scale=2.5,
                 learn_scale=True, activation="identity", time_bias=True, rng=None,
                 init_bound=INIT_BOUND):
        self.K = mf.check_curvature(K)
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        rng = np.random.default_rng() if rng is None else rng
        self.in_features = in_features
        self.out_features = out_features
        self.activation = activation
        self.weight = Parameter(uniform(rng, (out_features - 1, in_features), init_bound))
        self.v = Parameter(uniform(rng, (in_features, 1), init_bound))
        self.time_bias = Parameter(np.zeros(())) if time_bias else None
        self.log_scale = Parameter(np.log(scale), requires_grad=learn_scale)

    def forward(self, o, x):
        o = _t(o, like=self.weight)
        x = _t(x, like=self.weight)
        if o.shape[-1] != self.in_features or x.shape[-1] != self.out_features:
            raise ValueError(
                f"LorentzResidual: expected widths ({self.in_features}, {self.out_features}), "
                f"got ({o.shape[-1]}, {x.shape[-1]})")
        if o.shape[:-1] != x.shape[:-1]:
            raise ValueError(f"LorentzResidual: batch shapes differ {o.shape} vs {x.shape}")
        if o.ndim == 1:
            out = self.forward(o.reshape(1, -1), x.reshape(1, -1))
            return out.reshape(out.shape[-1:])
        z = o @ self.v
        if self.time_bias is not None:
            z = z + self.time_bias
        length = ad.exp(self.log_scale) * ad.sigmoid(z)
        u = ACTIVATIONS[self.activation](o) @ ad.transpose(self.weight) + x[..., 1:]
        norm = ad.norm2(u, keepdims=True)
        spatial = u * expand_as(length / ad.clamp_min(norm, DEGENERATE_NORM), u)
        time = ad.sqrt(ad.square(length) - 1.0 / self.K)
        out = ad.concat([time, spatial])
        degenerate = norm.data[..., 0] < DEGENERATE_NORM
        if np.any(degenerate):
            logger.debug("LorentzResidual: %d degenerate rows pass x through", int(degenerate.sum()))
            out = ad.where(np.broadcast_to(degenerate[..., None], out.shape), x, out)
        return out


def lorentz_residual(layer, o, x):
    return layer.forward(o, x)


class LorentzPositionEncoding(Module):
    """Learnable position points injected through one shared residual-style layer."""

    def __init__(self, max_len, width, K=mf.DEFAULT_K, scale=2.5, rng=None,
                 init_std=0.1, init_bound=INIT_BOUND):
        rng = np.random.default_rng() if rng is None else rng
        self.K = mf.check_curvature(K)
        self.max_len = max_len
        # positions are stored by their spatial coordinates
        self.positions = Parameter(init_std * rng.standard_normal((max_len, width - 1)))
        self.mix = LorentzResidual(width, width, K=K, scale=scale, rng=rng, init_bound=init_bound)

    def position_points(self, length):
        return lift(self.positions[:length], self.K)

    def forward(self, x):
        """``x`` is (..., L, width): one word point per position."""
        x = _t(x, like=self.positions)
        L = x.shape[-2]
        if L > self.max_len:
            raise ValueError(f"sequence length {L} exceeds max_len {self.max_len}")
        p = self.position_points(L)
        if x.ndim > 2:
            p = ad.expand(p, x.shape)
        return self.mix(x, p)


def position_encode(layer, x, p):
    """Encode word point(s) ``x`` with explicit position point(s) ``p`` via ``layer``."""
    return layer.forward(x, p)
