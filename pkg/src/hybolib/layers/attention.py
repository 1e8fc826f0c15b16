"""Multi-head Lorentz attention."""

from __future__ import annotations

import numpy as np

from .. import autodiff as ad
from .. import manifold as mf
from .base import Module
from .functional import lorentz_attention
from .linear import INIT_BOUND, LorentzLinear


class MultiHeadAttention(Module):
    """H heads, each with its own Q/K/V Lorentz linear maps into points of width ``head_width``.

    Head outputs are concatenated with their time coordinates kept
    (width ``heads * head_width``) and mapped back to a point by ``out``.
    Callers that close the block with a residual layer use :meth:`concat_heads`
    and skip ``out``.
    """

    def __init__(self, width, heads, head_width=None, K=mf.DEFAULT_K, scale=2.5,
                 dropout=0.0, rng=None, init_bound=INIT_BOUND, with_output=True):
        if heads < 1:
            raise ValueError("heads must be >= 1")
        rng = np.random.default_rng() if rng is None else rng
        self.K = mf.check_curvature(K)
        self.width = width
        self.heads = heads
        self.head_width = width if head_width is None else head_width
        kw = dict(K=K, scale=scale, dropout=dropout, rng=rng, init_bound=init_bound)
        self.q_proj = [LorentzLinear(width, self.head_width, **kw) for _ in range(heads)]
        self.k_proj = [LorentzLinear(width, self.head_width, **kw) for _ in range(heads)]
        self.v_proj = [LorentzLinear(width, self.head_width, **kw) for _ in range(heads)]
        self.out = (LorentzLinear(heads * self.head_width, width, K=K, scale=scale, rng=rng,
                                  init_bound=init_bound) if with_output else None)

    @property
    def concat_width(self):
        return self.heads * self.head_width

    def concat_heads(self, Q, Kset, V, mask=None, return_weights=False):
        outs, weights = [], []
        for i in range(self.heads):
            mu, w = lorentz_attention(self.q_proj[i](Q), self.k_proj[i](Kset), self.v_proj[i](V),
                                      self.K, mask=mask, return_weights=True)
            outs.append(mu)
            weights.append(w)
        cat = ad.concat(outs)
        return (cat, weights) if return_weights else cat

    def forward(self, Q, Kset, V, mask=None):
        if self.out is None:
            raise RuntimeError("built without an output layer; use concat_heads")
        return self.out(self.concat_heads(Q, Kset, V, mask))


def multi_head_attention(layer, Q, Kset, V, mask=None):
    return layer.forward(Q, Kset, V, mask)
