"""Randomized property suites for the geometry and the layers.

Every suite returns a list of :class:`Check` records, one per property, each
holding the largest error seen over its trials and the tolerance it is held to.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass

import numpy as np

from . import autodiff as ad
from . import manifold as mf
from .autodiff import Tensor
from .layers import (LorentzLinear, LorentzPositionEncoding, LorentzResidual, MultiHeadAttention,
                     centroid, fx_matrix, fx_transform, is_boost, lorentz_attention,
                     pseudo_rotation_composite, pseudo_rotation_matrix, pseudo_rotation_tangent)
from .models import (GcnModel, KgModel, ToyTransformerEncoder, kg_loss, lp_loss, nc_loss,
                     neighbour_mask, sample_negatives, token_cross_entropy, type_probability)

MANIFOLD_TOL = 1e-9
LEMMA2_TOL = 1e-8
GRAD_TOL = 1e-5
GRAD_STEP = 1e-6
SUITES = ("manifold", "theorem1", "lemma1", "lemma2", "centroid", "gradients")


@dataclass
class Check:
    name: str
    max_error: float
    tol: float
    trials: int
    seconds: float = 0.0
    detail: str = ""

    @property
    def passed(self):
        return bool(np.isfinite(self.max_error) and self.max_error < self.tol)

    def to_dict(self):
        return {**asdict(self), "passed": self.passed}


def _closure(points, K):
    """Worst of |<y,y> - 1/K| and a penalty when the time coordinate is not positive."""
    pts = np.asarray(points, dtype=float).reshape(-1, np.shape(points)[-1])
    err = float(np.max(mf.manifold_error(pts, K)))
    if np.any(pts[:, 0] <= 0):
        err = float("inf")
    return err


class _Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.t0


def _random_K(rng):
    return -float(rng.choice([1.0, 0.5, 2.0]))


def manifold_suite(trials=1000, seed=0, K=mf.DEFAULT_K):
    """Closure of every point-producing operation over ``trials`` random applications."""
    rng = np.random.default_rng(seed)
    checks = []

    def run(name, fn):
        worst = 0.0
        with _Timer() as t:
            for _ in range(trials):
                worst = max(worst, _closure(fn(), K))
        checks.append(Check(name, worst, MANIFOLD_TOL, trials, t.seconds))

    def dim():
        return int(rng.integers(2, 9))

    def tangent(x, max_len=5.0):
        # geodesic length uniform in (0, max_len]; |<y,y>| roundoff grows like |y|^2
        z = mf.random_tangent(x, K, rng=rng)
        zn = np.sqrt(max(float(mf.lorentz_inner(z, z)), 0.0))
        return z * (rng.uniform(0.0, max_len) / (np.sqrt(-K) * zn)) if zn > 0 else z

    def exp_case():
        x = mf.random_point(dim(), K, rng=rng)
        return mf.exp_map(x, tangent(x), K)

    def log_case():
        n = dim()
        x, y = mf.random_point(n, K, rng=rng), mf.random_point(n, K, rng=rng)
        # the tangent vector itself is not a point; map it back and check closure
        return mf.exp_map(x, mf.log_map(x, y, K), K)

    def fx_case():
        n, m = dim(), dim()
        return fx_transform(rng.standard_normal((m + 1, n + 1)), mf.random_point(n, K, rng=rng), K).data

    layers = {}

    def cached(key, build):
        if key not in layers:
            layers[key] = build()
        return layers[key]

    def linear_case():
        n, m = dim(), dim()
        layer = cached(("lin", n, m), lambda: LorentzLinear(n + 1, m + 1, K=K, rng=rng, init_bound=0.5))
        return layer(mf.random_point(n, K, rng=rng, size=4)).data

    def centroid_case():
        n, P = dim(), int(rng.integers(1, 8))
        w = rng.uniform(0.01, 1.0, P)
        return centroid(w, mf.random_point(n, K, scale=2.0, rng=rng, size=P), K).data

    def attention_case():
        n, Lq, Lk = dim(), int(rng.integers(1, 5)), int(rng.integers(1, 6))
        Q = mf.random_point(n, K, rng=rng, size=Lq)
        Kset = mf.random_point(n, K, rng=rng, size=Lk)
        V = mf.random_point(n, K, rng=rng, size=Lk)
        return lorentz_attention(Q, Kset, V, K).data

    def residual_case():
        n = dim()
        layer = cached(("res", n), lambda: LorentzResidual(n + 1, n + 1, K=K, rng=rng, init_bound=0.5))
        o = mf.random_point(n, K, rng=rng, size=3)
        x = mf.random_point(n, K, rng=rng, size=3)
        return layer(o, x).data

    def position_case():
        n, L = dim(), int(rng.integers(1, 6))
        layer = cached(("pos", n), lambda: LorentzPositionEncoding(8, n + 1, K=K, rng=rng, init_std=1.0))
        return layer(mf.random_point(n, K, rng=rng, size=L)).data

    for name, fn in (("exp_map", exp_case), ("log_map", log_case), ("fx_transform", fx_case),
                     ("lorentz_linear", linear_case), ("centroid", centroid_case),
                     ("attention", attention_case), ("residual", residual_case),
                     ("position_encode", position_case)):
        run(name, fn)

    # exp/log round trips, distance <= 5
    worst_el = worst_le = 0.0
    with _Timer() as t:
        for _ in range(trials):
            n = dim()
            x = mf.random_point(n, K, rng=rng)
            z = tangent(x)
            back = mf.log_map(x, mf.exp_map(x, z, K), K)
            worst_el = max(worst_el, float(np.linalg.norm(back - z) / max(np.linalg.norm(z), 1e-300)))
            y = mf.exp_map(x, z, K)
            again = mf.exp_map(x, mf.log_map(x, y, K), K)
            worst_le = max(worst_le, float(np.linalg.norm(again - y) / np.linalg.norm(y)))
    checks.append(Check("log(exp(z)) = z", worst_el, LEMMA2_TOL, trials, t.seconds / 2))
    checks.append(Check("exp(log(y)) = y", worst_le, LEMMA2_TOL, trials, t.seconds / 2))
    return checks


def theorem1_suite(trials=500, seed=0):
    """Any matrix M gives an on-manifold f_x(M)x, over dims 2-8 and several curvatures."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    with _Timer() as t:
        for _ in range(trials):
            K = _random_K(rng)
            n, m = (int(v) for v in rng.integers(2, 9, size=2))
            M = rng.standard_normal((m + 1, n + 1)) * rng.uniform(0.1, 3.0)
            x = mf.random_point(n, K, scale=rng.uniform(0.1, 3.0), rng=rng)
            y = fx_transform(M, x, K).data
            worst = max(worst, _closure(y, K))
            # the matrix form agrees with the direct product
            worst = max(worst, float(np.max(np.abs(fx_matrix(M, x, K) @ x - y)) / np.max(np.abs(y))))
    return [Check("f_x(M) x on manifold", worst, MANIFOLD_TOL, trials, t.seconds)]


def lemma1_suite(trials=200, points=50, seed=0):
    """Boosts and rotations are fixed by f_x."""
    rng = np.random.default_rng(seed)
    checks = []
    for name, make in (("boost", lambda n: mf.boost_matrix(mf.random_velocity(n, rng))),
                       ("rotation", lambda n: mf.rotation_matrix(mf.random_special_orthogonal(n, rng)))):
        worst = 0.0
        with _Timer() as t:
            for _ in range(trials):
                n = int(rng.integers(2, 9))
                A = make(n)
                for x in mf.random_point(n, scale=rng.uniform(0.1, 2.0), rng=rng, size=points):
                    worst = max(worst, float(np.max(np.abs(fx_matrix(A, x) - A))))
        checks.append(Check(f"f_x({name}) = {name}", worst, MANIFOLD_TOL, trials * points, t.seconds))
    return checks


def lemma2_suite(trials=100, seed=0):
    """Tangent-space layer: closed form, literal composite and f_x of its matrix agree.

    Also checks the matrix is a fixed point of f_x, is not a boost for a
    generic W, and collapses to the identity (the only boost it can be) at W = I.
    """
    rng = np.random.default_rng(seed)
    worst = {"closed vs composite": 0.0, "closed vs fx": 0.0, "composite vs fx": 0.0,
             "f_x(H) = H": 0.0}
    boost_hits = 0
    identity_err = 0.0
    with _Timer() as t:
        for _ in range(trials):
            K = _random_K(rng)
            n = int(rng.integers(2, 9))
            W = rng.standard_normal((n, n))
            x = mf.random_point(n, K, scale=rng.uniform(0.2, 2.0), rng=rng)
            H = pseudo_rotation_matrix(W, x, K)
            closed = pseudo_rotation_tangent(W, x, K)
            comp = pseudo_rotation_composite(W, x, K)
            via_fx = fx_transform(H, x, K).data

            def rel(a, b):
                return float(np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b)))

            worst["closed vs composite"] = max(worst["closed vs composite"], rel(closed, comp))
            worst["closed vs fx"] = max(worst["closed vs fx"], rel(closed, via_fx))
            worst["composite vs fx"] = max(worst["composite vs fx"], rel(comp, via_fx))
            worst["f_x(H) = H"] = max(worst["f_x(H) = H"],
                                      float(np.max(np.abs(fx_matrix(H, x, K) - H)) / np.max(np.abs(H))))
            boost_hits += int(is_boost(H, tol=1e-6))
            HI = pseudo_rotation_matrix(np.eye(n), x, K)
            identity_err = max(identity_err, float(np.max(np.abs(HI - np.eye(n + 1)))))
    checks = [Check(name, err, LEMMA2_TOL, trials, t.seconds / 4) for name, err in worst.items()]
    checks.append(Check("generic H is not a boost", float(boost_hits), 0.5, trials, 0.0,
                        detail="max_error counts boosts found"))
    checks.append(Check("W = I gives H = I", identity_err, LEMMA2_TOL, trials, 0.0))
    return checks


def centroid_objective(mu, points, weights, K=mf.DEFAULT_K):
    return float(np.sum(weights * mf.squared_distance(points, mu[None, :], K)))


def centroid_suite(configs=20, candidates=1000, seed=0):
    """The centroid beats random candidates on the weighted squared-distance objective
    and ignores a positive rescaling of the weights."""
    rng = np.random.default_rng(seed)
    excess = 0.0
    scale_err = 0.0
    with _Timer() as t:
        for _ in range(configs):
            K = _random_K(rng)
            n, P = int(rng.integers(2, 9)), int(rng.integers(2, 10))
            pts = mf.random_point(n, K, scale=rng.uniform(0.3, 2.0), rng=rng, size=P)
            w = rng.uniform(0.05, 1.0, P)
            mu = centroid(w, pts, K).data
            best = centroid_objective(mu, pts, w, K)
            # half the candidates are perturbations of the centroid, half are global
            local = mf.exp_map(np.broadcast_to(mu, (candidates // 2, n + 1)),
                               mf.random_tangent(np.broadcast_to(mu, (candidates // 2, n + 1)), K,
                                                 scale=rng.uniform(1e-3, 0.5), rng=rng), K)
            glob = mf.random_point(n, K, scale=2.0, rng=rng, size=candidates - candidates // 2)
            cand = np.concatenate([local, glob])
            obj = np.sum(w[None, :] * mf.squared_distance(pts[None, :, :], cand[:, None, :], K), axis=1)
            excess = max(excess, float(np.max(best - obj)) / max(best, 1.0))
            c = rng.uniform(1e-3, 1e3)
            mu2 = centroid(c * w, pts, K).data
            scale_err = max(scale_err, float(np.max(np.abs(mu2 - mu)) / np.max(np.abs(mu))))
    return [
        Check("centroid minimizes objective", max(excess, 0.0), 1e-12, configs * candidates, t.seconds,
              detail="max_error is the largest relative amount a candidate beat the centroid by"),
        Check("weight-scale invariance", scale_err, 1e-12, configs, 0.0),
    ]


def _grad_check(name, f, params, skip=None):
    with _Timer() as t:
        rep = ad.finite_difference_check(f, params, h=GRAD_STEP, tol=GRAD_TOL, skip=skip)
    return Check(name, float(rep.max_rel_err), GRAD_TOL, rep.n_checked, t.seconds,
                 detail=f"{len(rep.failures)} elements over tolerance, {rep.n_skipped} skipped")


def gradient_suite(seed=0):
    """Backward pass against central differences for every layer and loss (64-bit)."""
    rng = np.random.default_rng(seed)
    checks = []
    with ad.precision("f64"):
        n = 4
        x = Tensor(mf.random_point(n, rng=rng, size=3), requires_grad=True)

        proj3 = Tensor(rng.standard_normal((3, n + 1)))
        lin = LorentzLinear(n + 1, n + 1, rng=rng, init_bound=0.5, bias=True, dropout=0.3)
        lin.train()
        mask = (rng.random((3, n + 1)) > 0.3).astype(float)
        checks.append(_grad_check(
            "lorentz_linear", lambda *a: ad.sum(lin(x, dropout_mask=mask) * proj3),
            [x] + lin.parameters()))

        relu_lin = LorentzLinear(n + 1, n + 1, rng=rng, init_bound=0.5, activation="relu")
        checks.append(_grad_check(
            "lorentz_linear_relu", lambda *a: ad.sum(relu_lin(x) * proj3),
            [x] + relu_lin.parameters(), skip=[ad.near_threshold(x.data, 0.0, GRAD_STEP)]
            + [None] * len(relu_lin.parameters())))

        res = LorentzResidual(n + 1, n + 1, rng=rng, init_bound=0.5, activation="relu")
        o = Tensor(mf.random_point(n, rng=rng, size=3), requires_grad=True)
        checks.append(_grad_check(
            "lorentz_residual", lambda *a: ad.sum(res(o, x) * proj3),
            [o, x] + res.parameters(),
            skip=[ad.near_threshold(o.data, 0.0, GRAD_STEP)] + [None] * (1 + len(res.parameters()))))

        pos = LorentzPositionEncoding(5, n + 1, rng=rng, init_std=0.5)
        checks.append(_grad_check(
            "position_encode", lambda *a: ad.sum(pos(x) * proj3),
            [x] + pos.parameters()))

        pts = Tensor(mf.random_point(n, rng=rng, size=4), requires_grad=True)
        w = Tensor(rng.uniform(0.1, 1.0, 4), requires_grad=True)
        proj = rng.standard_normal(n + 1)
        checks.append(_grad_check(
            "centroid", lambda *a: ad.sum(centroid(w, pts) * Tensor(proj)), [w, pts]))

        Q = Tensor(mf.random_point(n, rng=rng, size=2), requires_grad=True)
        V = Tensor(mf.random_point(n, rng=rng, size=4), requires_grad=True)
        proj2 = Tensor(rng.standard_normal((2, n + 1)))
        checks.append(_grad_check(
            "attention", lambda *a: ad.sum(lorentz_attention(Q, pts, V) * proj2), [Q, pts, V]))

        mha = MultiHeadAttention(n + 1, 2, rng=rng, init_bound=0.5)
        mw = rng.standard_normal((3, n + 1))
        checks.append(_grad_check(
            "multi_head_attention", lambda *a: ad.sum(mha(x, x, x) * Tensor(mw)),
            [x] + mha.parameters()))

        fxM = Tensor(rng.standard_normal((n + 1, n + 1)), requires_grad=True)
        checks.append(_grad_check(
            "fx_transform", lambda *a: ad.sum(fx_transform(fxM, x) * proj3), [fxM, x]))

        kg = KgModel(6, 2, 3, rng=rng, init_std=0.5)
        batch = np.array([[0, 0, 1], [2, 1, 3], [4, 0, 5]])
        neg = sample_negatives(batch, 2, 6, rng)
        checks.append(_grad_check("kg_loss", lambda *a: kg_loss(kg, batch, negatives=neg),
                                  kg.parameters()))

        edges = np.array([[0, 1], [1, 2], [2, 3], [3, 4], [1, 4]])
        A = neighbour_mask(5, edges)
        feats = rng.standard_normal((5, 3))
        gcn = GcnModel(3, 3, n_layers=2, task="lp", rng=rng, init_bound=0.5)
        checks.append(_grad_check(
            "lp_loss", lambda *a: lp_loss(gcn, gcn.encode(feats, A), edges[:3], np.array([[0, 3], [0, 4]])),
            gcn.parameters()))
        gcn_nc = GcnModel(3, 3, n_layers=1, task="nc", n_classes=2, rng=rng, init_bound=0.5)
        checks.append(_grad_check(
            "nc_loss", lambda *a: nc_loss(gcn_nc, gcn_nc.encode(feats, A), [0, 2, 4], [0, 1, 0]),
            gcn_nc.parameters()))

        rep = Tensor(mf.random_point(n, rng=rng), requires_grad=True)
        typ = mf.random_point(n, rng=rng)
        checks.append(_grad_check(
            "type_probability", lambda *a: type_probability(rep, typ, 1.7, 0.3), [rep]))

        tf = ToyTransformerEncoder(5, dim=3, n_layers=1, heads=2, max_len=4, rng=rng, init_std=0.5)
        ids = np.array([[0, 4, 1, 1]])
        targets = np.array([[0, 0, 1, 1]])
        where = ids == 4
        checks.append(_grad_check(
            "toy_transformer_loss",
            lambda *a: token_cross_entropy(tf(ids)[1], targets, where),
            tf.parameters()))
    return checks


def run_suite(name, trials=None, seed=0):
    """Run one suite (or ``all``). ``trials`` overrides each suite's default count."""
    if name == "all":
        out = []
        for s in SUITES:
            out.extend(run_suite(s, trials, seed))
        return out
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; choose from {SUITES + ('all',)}")
    if trials is not None and trials < 0:
        raise ValueError("trials must be >= 0")
    if trials == 0:
        return []
    if name == "manifold":
        return manifold_suite(trials or 1000, seed)
    if name == "theorem1":
        return theorem1_suite(trials or 500, seed)
    if name == "lemma1":
        return lemma1_suite(trials or 200, seed=seed)
    if name == "lemma2":
        return lemma2_suite(trials or 100, seed)
    if name == "centroid":
        return centroid_suite(trials or 20, seed=seed)
    return gradient_suite(seed)
