"""A small Lorentz transformer encoder with a distance-based token head."""

from __future__ import annotations

import numpy as np

from .. import autodiff as ad
from .. import manifold as mf
from ..layers.attention import MultiHeadAttention
from ..layers.base import Module, Parameter
from ..layers.functional import lift, pairwise_squared_distance
from ..layers.linear import INIT_BOUND, LorentzLinear
from ..layers.residual import LorentzPositionEncoding, LorentzResidual


class EncoderBlock(Module):
    """Attention closed by a residual layer, then feed-forward closed by a residual layer."""

    def __init__(self, width, heads, ffn_width, K=mf.DEFAULT_K, scale=2.5, dropout=0.0,
                 rng=None, init_bound=INIT_BOUND):
        kw = dict(K=K, scale=scale, rng=rng, init_bound=init_bound)
        self.attn = MultiHeadAttention(width, heads, dropout=dropout, with_output=False, **kw)
        self.attn_res = LorentzResidual(self.attn.concat_width, width, **kw)
        self.ffn = LorentzLinear(width, ffn_width, dropout=dropout, **kw)
        self.ffn_res = LorentzResidual(ffn_width, width, activation="relu", **kw)

    def forward(self, x, mask=None, collect=None):
        a = self.attn.concat_heads(x, x, x, mask)
        x = self.attn_res(a, x)
        f = self.ffn(x)
        out = self.ffn_res(f, x)
        if collect is not None:
            collect.extend([x, f, out])
        return out


class ToyTransformerEncoder(Module):
    """Token points plus learned positions through ``n_layers`` encoder blocks.

    Points have ``dim`` spatial coordinates. The head scores every vocabulary
    item by minus its squared distance to an output embedding.
    """

    def __init__(self, vocab_size, dim=16, n_layers=2, heads=2, ffn_dim=None, max_len=32,
                 K=mf.DEFAULT_K, scale=2.5, dropout=0.0, init_std=0.1, rng=None,
                 init_bound=INIT_BOUND):
        if vocab_size < 2:
            raise ValueError("vocabulary needs at least two tokens")
        rng = np.random.default_rng() if rng is None else rng
        self.K = mf.check_curvature(K)
        self.vocab_size = vocab_size
        self.dim = dim
        self.max_len = max_len
        width = dim + 1
        ffn_width = (ffn_dim or 2 * dim) + 1
        self.tokens = Parameter(init_std * rng.standard_normal((vocab_size, dim)))
        self.position = LorentzPositionEncoding(max_len, width, K=K, scale=scale, rng=rng,
                                                init_bound=init_bound)
        self.blocks = [EncoderBlock(width, heads, ffn_width, K=K, scale=scale, dropout=dropout,
                                    rng=rng, init_bound=init_bound) for _ in range(n_layers)]
        self.output = Parameter(init_std * rng.standard_normal((vocab_size, dim)))

    @property
    def projected(self):
        return []

    def embed(self, ids):
        ids = np.asarray(ids, dtype=np.int64)
        if ids.size and (ids.min() < 0 or ids.max() >= self.vocab_size):
            bad = ids[(ids < 0) | (ids >= self.vocab_size)].ravel()[0]
            raise IndexError(f"token id {bad} outside vocabulary of {self.vocab_size}")
        if ids.shape[-1] > self.max_len:
            raise ValueError(f"sequence length {ids.shape[-1]} exceeds max_len {self.max_len}")
        return lift(self.tokens[ids], self.K)

    def forward(self, ids, mask=None, collect=None):
        """Per-position points and (…, L, vocab) logits for ids (L,) or (B, L)."""
        x = self.embed(ids)
        if collect is not None:
            collect.append(x)
        x = self.position(x)
        if collect is not None:
            collect.append(x)
        for block in self.blocks:
            x = block(x, mask=mask, collect=collect)
        return x, self.logits(x)

    def logits(self, points):
        return -pairwise_squared_distance(points, lift(self.output, self.K), self.K)


def toy_transformer_forward(model, ids, collect=None):
    return model.forward(ids, collect=collect)


def token_cross_entropy(logits, targets, where=None):
    """Mean cross-entropy at positions where ``where`` (bool, same shape as targets) is set."""
    targets = np.asarray(targets, dtype=np.int64)
    logp = ad.log_softmax(logits)
    flat = logp.reshape(-1, logp.shape[-1])
    tflat = targets.reshape(-1)
    sel = np.arange(len(tflat)) if where is None else np.flatnonzero(np.asarray(where).reshape(-1))
    if len(sel) == 0:
        raise ValueError("no positions selected for the loss")
    return -ad.mean(flat[sel, tflat[sel]])


__all__ = ["EncoderBlock", "ToyTransformerEncoder", "toy_transformer_forward", "token_cross_entropy"]
