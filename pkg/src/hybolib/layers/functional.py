"""Differentiable Lorentz geometry on Tensors.

Points live in the last axis (time coordinate first). These mirror the numpy
routines in :mod:`hybolib.manifold` but record onto the autodiff graph.
"""

from __future__ import annotations

import numpy as np

from .. import autodiff as ad
from ..autodiff import Tensor, as_tensor
from ..manifold import check_curvature

# Softmax logits for disallowed keys.
MASKED_LOGIT = -1e30
CENTROID_FLOOR = 1e-15


def _t(x, like=None):
    if isinstance(x, Tensor):
        return x
    if like is not None:
        return Tensor(np.asarray(x), dtype=like.dtype)
    return as_tensor(x)


def flip_time(x):
    """Multiply by diag(-1, 1, ..., 1)."""
    return ad.concat([-x[..., :1], x[..., 1:]])


def inner(x, y, keepdims=False):
    """Lorentzian inner product along the last axis (equal shapes)."""
    x = _t(x)
    y = _t(y, like=x)
    prod = x * y
    out = ad.sum(prod[..., 1:], axis=-1, keepdims=True) - prod[..., :1]
    return out if keepdims else out.reshape(out.shape[:-1])


def pairwise_inner(X, Y):
    """(..., P, d) x (..., Q, d) -> (..., P, Q) Lorentzian inner products."""
    X = _t(X)
    Y = _t(Y, like=X)
    return X @ ad.transpose(flip_time(Y))


def squared_distance(x, y, K=-1.0, keepdims=False):
    return 2.0 / K - 2.0 * inner(x, y, keepdims=keepdims)


def pairwise_squared_distance(X, Y, K=-1.0):
    return 2.0 / K - 2.0 * pairwise_inner(X, Y)


def lift(spatial, K=-1.0):
    """Spatial coordinates -> hyperboloid point, time = sqrt(|s|^2 - 1/K)."""
    spatial = _t(spatial)
    time = ad.sqrt(ad.sum(ad.square(spatial), axis=-1, keepdims=True) - 1.0 / K)
    return ad.concat([time, spatial])


def expand_as(scale, x):
    """Broadcast a (..., 1) factor across the last axis of ``x``."""
    return ad.expand(scale, x.shape)


def centroid(weights, points, K=-1.0):
    """Weighted Lorentzian centroid.

    ``weights`` (P,) with ``points`` (P, d) gives one point; ``weights``
    (..., Q, P) with ``points`` (P, d) or (..., P, d) gives (..., Q, d).
    Weights need not be normalized: the result is invariant to their scale.
    """
    K = check_curvature(K)
    points = _t(points)
    weights = _t(weights, like=points)
    if weights.ndim == 1:
        s = (weights.reshape(1, -1) @ points).reshape(points.shape[-1:])
    else:
        s = weights @ points
    neg_sq = ad.clamp_min(-inner(s, s, keepdims=True), CENTROID_FLOOR)
    denom = ad.sqrt(neg_sq) * float(np.sqrt(-K))
    return s / expand_as(denom, s)


def attention_weights(Q, Kset, K=-1.0, mask=None):
    """softmax_j(-d^2(q_i, k_j) / sqrt(n)), n = spatial dimension of the points."""
    Q = _t(Q)
    Kset = _t(Kset, like=Q)
    n = Q.shape[-1] - 1
    logits = -pairwise_squared_distance(Q, Kset, K) / float(np.sqrt(n))
    if mask is not None:
        logits = ad.where(mask, logits, MASKED_LOGIT)
    return ad.softmax(logits)


def lorentz_attention(Q, Kset, V, K=-1.0, mask=None, return_weights=False):
    """Distance-based attention; every output is the centroid of ``V`` under its weights.

    ``mask`` (boolean, broadcastable to (..., Lq, Lk) exactly) marks allowed keys.
    """
    if Kset.shape[-2] == 0:
        raise ValueError("lorentz_attention: empty key set")
    if Kset.shape[-2] != V.shape[-2]:
        raise ValueError(f"lorentz_attention: {Kset.shape[-2]} keys but {V.shape[-2]} values")
    w = attention_weights(Q, Kset, K, mask)
    out = centroid(w, V, K)
    return (out, w) if return_weights else out
