"""Lorentz linear layers.

``fx_transform`` is the reparametrized matrix-vector product whose output
time coordinate is recomputed from the spatial part, so any matrix maps the
hyperboloid into a hyperboloid. ``LorentzLinear`` is the general layer used
in deep models: the output time coordinate is ``lam * sigmoid(v.x + b') + eps``
and the spatial part is ``W h(dropout(x))`` rescaled to fit.

The pseudo-rotation helpers reproduce the tangent-space linear layer
(log at the origin, linear map, exp at the origin) in closed form; they are
used to compare the two layer families.
"""

from __future__ import annotations

import logging

import numpy as np

from .. import autodiff as ad
from .. import manifold as mf
from ..autodiff import Tensor
from .base import Module, Parameter, uniform
from .functional import _t, expand_as

logger = logging.getLogger(__name__)

DEGENERATE_NORM = 1e-12
INIT_BOUND = 0.02

ACTIVATIONS = {
    "identity": lambda x: x,
    "relu": ad.relu,
}


class DegenerateInputError(ValueError):
    pass


# ---------------------------------------------------------------------------
# fx-transform


def fx_matrix(M, x, K=mf.DEFAULT_K):
    """The matrix f_x(M): the first row v is rescaled so that row . x equals the output time.

    ``M`` is (m+1, n+1) with rows [v; W]; ``x`` is a single point.
    """
    K = mf.check_curvature(K)
    M = np.asarray(M, dtype=float)
    x = np.asarray(x, dtype=float)
    v, W = M[0], M[1:]
    vx = v @ x
    if abs(vx) < DEGENERATE_NORM:
        raise DegenerateInputError("fx_matrix: v.x is zero, scale undefined")
    Wx = W @ x
    out = M.copy()
    out[0] = np.sqrt(Wx @ Wx - 1.0 / K) / vx * v
    return out


def fx_transform(M, x, K=mf.DEFAULT_K, strict=True):
    """f_x(M) x for one or many points ``x`` (..., n+1); differentiable in ``M`` and ``x``.

    The product reduces to [sqrt(|Wx|^2 - 1/K); Wx], which is what gets
    computed. With ``strict`` the v.x != 0 requirement is still enforced.
    """
    K = mf.check_curvature(K)
    M = _t(M)
    x = _t(x, like=M)
    v = M[0]
    W = M[1:]
    if strict:
        vx = x.data @ v.data
        if np.any(np.abs(vx) < DEGENERATE_NORM):
            raise DegenerateInputError("fx_transform: v.x is zero, scale undefined")
    batched = x.ndim > 1
    xs = x if batched else x.reshape(1, -1)
    Wx = xs @ ad.transpose(W)
    time = ad.sqrt(ad.sum(ad.square(Wx), axis=-1, keepdims=True) - 1.0 / K)
    out = ad.concat([time, Wx])
    return out if batched else out.reshape(out.shape[-1:])


# ---------------------------------------------------------------------------
# pseudo-rotation (tangent-space linear layer)


def pseudo_rotation_matrix(W, x, K=mf.DEFAULT_K):
    """The block matrix diag(cosh(b)/(sqrt(-K) x_t), sinh(b) W / (sqrt(-K)|W x_s|)).

    Returns None at the origin or when W x_s = 0 (the layer output is then the origin).
    """
    K = mf.check_curvature(K)
    W = np.asarray(W, dtype=float)
    x = np.asarray(x, dtype=float)
    xt, xs = x[0], x[1:]
    rk = np.sqrt(-K)
    Wxs = W @ xs
    nW = np.linalg.norm(Wxs)
    arg = -K * xt * xt - 1.0
    if arg <= 0 or nW < DEGENERATE_NORM:
        return None
    beta = rk * np.arccosh(max(rk * xt, 1.0)) / np.sqrt(arg) * nW
    n = W.shape[0]
    H = np.zeros((n + 1, W.shape[1] + 1))
    H[0, 0] = np.cosh(beta) / (rk * xt)
    H[1:, 1:] = np.sinh(beta) / (rk * nW) * W
    return H


def pseudo_rotation_tangent(W, x, K=mf.DEFAULT_K):
    """Closed form of exp_0(diag(*, W) log_0(x)) for a single point ``x``."""
    H = pseudo_rotation_matrix(W, x, K)
    if H is None:
        return mf.origin(np.shape(W)[0], K)
    return H @ np.asarray(x, dtype=float)


def pseudo_rotation_composite(W, x, K=mf.DEFAULT_K):
    """exp_0(diag(*, W) log_0(x)) evaluated literally through the tangent space."""
    W = np.asarray(W, dtype=float)
    z = mf.log_map0(x, K)
    zt = np.concatenate([[0.0], W @ z[1:]])
    return mf.exp_map0(zt, K)


def is_boost(A, tol=1e-9):
    """True when A equals the boost built from its own first column."""
    A = np.asarray(A, dtype=float)
    if A.shape[0] != A.shape[1] or A[0, 0] < 1.0 - tol:
        return False
    v = -A[1:, 0] / A[0, 0]
    if v @ v >= 1.0:
        return False
    return bool(np.max(np.abs(A - mf.boost_matrix(v))) < tol)


# ---------------------------------------------------------------------------
# general layer


class LorentzLinear(Module):
    """Maps points of width ``in_features`` to points of width ``out_features``.

    ``in_features`` counts every input coordinate (it need not be a point: the
    multi-head concatenation is fed through one of these). Output points have
    ``out_features - 1`` spatial coordinates.
    """

    def __init__(self, in_features, out_features, K=mf.DEFAULT_K, scale=2.5,
                 learn_scale=True, eps=None, activation="identity", dropout=0.0,
                 bias=False, time_bias=True, rng=None, init_bound=INIT_BOUND):
        self.K = mf.check_curvature(K)
        if out_features < 2:
            raise ValueError("out_features must be at least 2 (time + one spatial axis)")
        if scale <= 0:
            raise ValueError("scale (lambda) must be positive")
        self.eps = 1.1 * np.sqrt(-1.0 / self.K) if eps is None else float(eps)
        if self.eps <= np.sqrt(-1.0 / self.K):
            raise ValueError(f"eps must exceed sqrt(-1/K) = {np.sqrt(-1.0 / self.K):.6g}")
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        if not 0.0 <= dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")
        rng = np.random.default_rng() if rng is None else rng
        self.in_features = in_features
        self.out_features = out_features
        self.activation = activation
        self.dropout = dropout
        self.weight = Parameter(uniform(rng, (out_features - 1, in_features), init_bound))
        self.v = Parameter(uniform(rng, (in_features, 1), init_bound))
        self.bias = Parameter(np.zeros(out_features - 1)) if bias else None
        self.time_bias = Parameter(np.zeros(())) if time_bias else None
        self.log_scale = Parameter(np.log(scale), requires_grad=learn_scale)

    @property
    def scale(self):
        return float(np.exp(self.log_scale.data))

    def time_coordinate(self, x):
        """lam * sigmoid(v.x + b') + eps, shape (..., 1)."""
        z = x @ self.v
        if self.time_bias is not None:
            z = z + self.time_bias
        return ad.exp(self.log_scale) * ad.sigmoid(z) + self.eps

    def forward(self, x, rng=None, dropout_mask=None):
        x = _t(x, like=self.weight)
        if x.shape[-1] != self.in_features:
            raise ValueError(f"LorentzLinear: expected width {self.in_features}, got {x.shape[-1]}")
        if x.ndim == 1:
            mask = None if dropout_mask is None else np.reshape(dropout_mask, (1, -1))
            out = self.forward(x.reshape(1, -1), rng=rng, dropout_mask=mask)
            return out.reshape(out.shape[-1:])
        y0 = self.time_coordinate(x)
        xd = ad.dropout(x, self.dropout, rng=rng, training=self.training, mask=dropout_mask)
        u = ACTIVATIONS[self.activation](xd) @ ad.transpose(self.weight)
        if self.bias is not None:
            u = u + ad.expand(self.bias, u.shape)
        return _rescale(u, y0, self.K)


def _rescale(u, y0, K):
    """Concatenate time ``y0`` with ``u`` rescaled to norm sqrt(y0^2 + 1/K).

    Rows where |u| vanishes have no direction; they become the origin.
    """
    norm = ad.norm2(u, keepdims=True)
    target = ad.sqrt(ad.square(y0) + 1.0 / K)
    spatial = u * expand_as(target / ad.clamp_min(norm, DEGENERATE_NORM), u)
    out = ad.concat([y0, spatial])
    degenerate = norm.data[..., 0] < DEGENERATE_NORM
    if np.any(degenerate):
        logger.debug("LorentzLinear: %d degenerate rows mapped to the origin", int(degenerate.sum()))
        o = np.broadcast_to(mf.origin(out.shape[-1] - 1, K, dtype=out.dtype), out.shape)
        mask = np.broadcast_to(degenerate[..., None], out.shape)
        out = ad.where(mask, Tensor(np.array(o), dtype=out.dtype), out)
    return out


def lorentz_linear(layer, x, **kwargs):
    return layer.forward(x, **kwargs)
