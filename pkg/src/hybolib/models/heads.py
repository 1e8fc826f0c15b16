"""Probability heads over squared Lorentzian distances."""

from __future__ import annotations

import numpy as np

from .. import autodiff as ad
from .. import manifold as mf
from ..autodiff import Tensor
from ..layers.functional import _t, squared_distance


def fermi_dirac_logit(d2, r=2.0, t=1.0):
    """(r - d2) / t, so that sigmoid of it is the Fermi-Dirac edge probability."""
    if t <= 0:
        raise ValueError(f"Fermi-Dirac temperature must be positive, got {t}")
    return (r - d2) / t


def fermi_dirac(d2, r=2.0, t=1.0):
    """1 / (exp((d2 - r) / t) + 1); Tensor in, Tensor out, otherwise numpy."""
    logit = fermi_dirac_logit(d2, r, t)
    if isinstance(logit, Tensor):
        return ad.sigmoid(logit)
    return _np_sigmoid(np.asarray(logit, dtype=float))


def _np_sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out if out.ndim else out[()]


def type_probability(rep, type_emb, alpha, beta, K=mf.DEFAULT_K):
    """sigmoid(-d^2(rep, type_emb) / alpha + beta) for one type or a batch of them."""
    alpha_val = alpha.data if isinstance(alpha, Tensor) else np.asarray(alpha)
    if np.any(alpha_val == 0):
        raise ValueError("type_probability: alpha must be non-zero")
    rep = _t(rep)
    d2 = squared_distance(rep, _t(type_emb, like=rep), K)
    return ad.sigmoid(-d2 / alpha + beta)
