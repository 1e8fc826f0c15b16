"""Lorentz-model geometry on plain numpy arrays.

A point of the n-dimensional model is an array of n+1 coordinates with the
time coordinate first. Every function broadcasts over leading axes.
``K`` is the (negative) curvature; it defaults to -1.
"""

from __future__ import annotations

import numpy as np

DEFAULT_K = -1.0
ON_MANIFOLD_TOL = 1e-9
ARCOSH_FLOOR = 1.0 + 1e-12
SMALL_TANGENT = 1e-8


class ManifoldError(ValueError):
    pass


def check_curvature(K):
    K = float(K)
    if not K < 0:
        raise ManifoldError(f"curvature must be negative, got {K}")
    return K


def lorentz_inner(x, y, keepdims=False):
    """-x_t y_t + <x_s, y_s>."""
    x = np.asarray(x)
    y = np.asarray(y)
    if x.shape[-1] != y.shape[-1]:
        raise ManifoldError(f"lorentz_inner: length mismatch {x.shape[-1]} vs {y.shape[-1]}")
    if x.shape[-1] < 2:
        raise ManifoldError("lorentz_inner: vectors need at least 2 coordinates")
    out = np.sum(x[..., 1:] * y[..., 1:], axis=-1) - x[..., 0] * y[..., 0]
    return out[..., None] if keepdims else out


def lorentz_norm(z):
    """sqrt(<z, z>_L) for space-like z, clamped at 0."""
    return np.sqrt(np.maximum(lorentz_inner(z, z), 0.0))


def origin(n, K=DEFAULT_K, dtype=np.float64):
    K = check_curvature(K)
    o = np.zeros(n + 1, dtype=dtype)
    o[0] = np.sqrt(-1.0 / K)
    return o


def time_from_spatial(spatial, K=DEFAULT_K):
    K = check_curvature(K)
    spatial = np.asarray(spatial)
    return np.sqrt(np.sum(spatial * spatial, axis=-1) - 1.0 / K)


def project_to_hyperboloid(spatial, K=DEFAULT_K):
    """Lift spatial coordinates onto the upper sheet: x_t = sqrt(|x_s|^2 - 1/K)."""
    spatial = np.asarray(spatial)
    if not np.issubdtype(spatial.dtype, np.floating):
        spatial = spatial.astype(float)
    t = time_from_spatial(spatial, K)
    return np.concatenate([t[..., None], spatial], axis=-1)


def manifold_error(x, K=DEFAULT_K):
    """|<x, x>_L - 1/K| per point."""
    K = check_curvature(K)
    return np.abs(lorentz_inner(x, x) - 1.0 / K)


def on_manifold(x, K=DEFAULT_K, tol=ON_MANIFOLD_TOL):
    x = np.asarray(x)
    return bool(np.all(manifold_error(x, K) < tol) and np.all(x[..., 0] > 0))


def tangent_error(x, z):
    return np.abs(lorentz_inner(x, z))


def project_to_tangent(x, u, K=DEFAULT_K):
    """Remove the component of ``u`` along ``x``: u - K <x, u>_L x."""
    K = check_curvature(K)
    return u - K * lorentz_inner(x, u, keepdims=True) * x


def exp_map(x, z, K=DEFAULT_K, tol=ON_MANIFOLD_TOL):
    """Follow the geodesic from ``x`` with initial velocity ``z`` for unit time."""
    K = check_curvature(K)
    x = np.asarray(x)
    z = np.asarray(z)
    zz = lorentz_inner(z, z, keepdims=True)
    if np.any(zz < -tol):
        raise ManifoldError("exp_map: tangent vector is not space-like")
    znorm = np.sqrt(np.maximum(zz, 0.0))
    alpha = np.sqrt(-K) * znorm
    small = znorm < SMALL_TANGENT
    safe = np.where(small, 1.0, alpha)
    # below SMALL_TANGENT use the series limit sinh(a)/a -> 1
    coef = np.where(small, 1.0, np.sinh(alpha) / safe)
    return np.cosh(alpha) * x + coef * z


def log_map(x, y, K=DEFAULT_K):
    """Tangent vector at ``x`` pointing to ``y`` with Lorentz norm d(x, y)."""
    K = check_curvature(K)
    x = np.asarray(x)
    y = np.asarray(y)
    beta = np.maximum(K * lorentz_inner(x, y, keepdims=True), ARCOSH_FLOOR)
    coef = np.arccosh(beta) / np.sqrt(beta * beta - 1.0)
    out = coef * (y - beta * x)
    same = np.all(x == y, axis=-1, keepdims=True)
    return np.where(same, 0.0, out)


def exp_map0(z, K=DEFAULT_K):
    z = np.asarray(z)
    return exp_map(np.broadcast_to(origin(z.shape[-1] - 1, K), z.shape), z, K)


def log_map0(y, K=DEFAULT_K):
    y = np.asarray(y)
    return log_map(np.broadcast_to(origin(y.shape[-1] - 1, K), y.shape), y, K)


def squared_distance(x, y, K=DEFAULT_K):
    """Squared Lorentzian distance 2/K - 2<x, y>_L (clamped at 0)."""
    K = check_curvature(K)
    return np.maximum(2.0 / K - 2.0 * lorentz_inner(x, y), 0.0)


def distance(x, y, K=DEFAULT_K):
    """Geodesic distance arcosh(K <x, y>_L) / sqrt(-K)."""
    K = check_curvature(K)
    beta = np.maximum(K * lorentz_inner(x, y), 1.0)
    return np.arccosh(beta) / np.sqrt(-K)


def boost_matrix(v):
    """Lorentz boost for velocity ``v`` (|v| < 1)."""
    v = np.asarray(v, dtype=float)
    speed2 = float(v @ v)
    if speed2 >= 1.0:
        raise ManifoldError(f"boost_matrix: |v| must be < 1, got {np.sqrt(speed2):.6g}")
    n = v.shape[0]
    gamma = 1.0 / np.sqrt(1.0 - speed2)
    B = np.empty((n + 1, n + 1))
    B[0, 0] = gamma
    B[0, 1:] = -gamma * v
    B[1:, 0] = -gamma * v
    B[1:, 1:] = np.eye(n) + (gamma * gamma / (1.0 + gamma)) * np.outer(v, v)
    return B


def rotation_matrix(R, tol=1e-9):
    """Embed a special orthogonal n x n matrix as a Lorentz rotation."""
    R = np.asarray(R, dtype=float)
    n = R.shape[0]
    if R.shape != (n, n):
        raise ManifoldError(f"rotation_matrix: expected a square matrix, got {R.shape}")
    if np.max(np.abs(R.T @ R - np.eye(n))) > tol or abs(np.linalg.det(R) - 1.0) > tol:
        raise ManifoldError("rotation_matrix: input is not special orthogonal")
    out = np.eye(n + 1)
    out[1:, 1:] = R
    return out


def random_special_orthogonal(n, rng):
    """Gram-Schmidt (via QR) of a Gaussian matrix with the determinant fixed to +1."""
    A = rng.standard_normal((n, n))
    Q, Rr = np.linalg.qr(A)
    Q = Q * np.sign(np.diag(Rr))
    if np.linalg.det(Q) < 0:
        Q[:, 0] = -Q[:, 0]
    return Q


def random_velocity(n, rng, max_speed=0.95):
    d = rng.standard_normal(n)
    d /= np.linalg.norm(d)
    return d * rng.uniform(0.0, max_speed)


def random_point(n, K=DEFAULT_K, scale=1.0, rng=None, size=None):
    """Gaussian spatial sample (std ``scale``) lifted onto the hyperboloid."""
    if scale <= 0:
        raise ValueError("scale must be positive")
    rng = np.random.default_rng() if rng is None else rng
    shape = (n,) if size is None else tuple(np.atleast_1d(size)) + (n,)
    return project_to_hyperboloid(scale * rng.standard_normal(shape), K)


def random_tangent(x, K=DEFAULT_K, scale=1.0, rng=None):
    rng = np.random.default_rng() if rng is None else rng
    u = scale * rng.standard_normal(np.shape(x))
    return project_to_tangent(x, u, K)
