"""Knowledge-graph completion: score, loss and filtered ranking."""

from __future__ import annotations

import numpy as np

from .. import autodiff as ad
from .. import kernels
from .. import manifold as mf
from ..layers.base import Module, Parameter, uniform
from ..layers.functional import lift, squared_distance
from ..layers.linear import _rescale

RELATION_FORMS = ("general", "fx")


class KgModel(Module):
    """Entity points, one Lorentz linear map per relation, per-entity biases and a margin.

    Entities are stored by their spatial coordinates; the time coordinate is
    recomputed on every forward pass. ``relation_form="general"`` maps with the
    bounded-time layer (scale ``scale``); ``"fx"`` uses the plain
    ``[sqrt(|Wx|^2 - 1/K); Wx]`` map.
    """

    def __init__(self, n_entities, n_relations, dim, K=mf.DEFAULT_K, margin=8.0, scale=2.5,
                 learn_scale=True, max_norm=None, relation_form="general", init_std=0.1,
                 rng=None, init_bound=None):
        if relation_form not in RELATION_FORMS:
            raise ValueError(f"relation_form must be one of {RELATION_FORMS}")
        if n_entities < 1 or n_relations < 1 or dim < 1:
            raise ValueError("need at least one entity, one relation and dim >= 1")
        rng = np.random.default_rng() if rng is None else rng
        if init_bound is None:
            # fan-in default for the relation maps
            init_bound = 1.0 / np.sqrt(dim + 1)
        self.K = mf.check_curvature(K)
        self.n_entities = n_entities
        self.n_relations = n_relations
        self.dim = dim
        self.max_norm = max_norm
        self.relation_form = relation_form
        self.eps = 1.1 * np.sqrt(-1.0 / self.K)
        self.entity = Parameter(init_std * rng.standard_normal((n_entities, dim)))
        if max_norm is not None:
            kernels.clip_row_norms(self.entity.data, max_norm)
        self.rel_weight = Parameter(uniform(rng, (n_relations, dim, dim + 1), init_bound))
        if relation_form == "general":
            self.rel_v = Parameter(uniform(rng, (n_relations, dim + 1), init_bound))
            self.rel_time_bias = Parameter(np.zeros(n_relations))
            self.rel_log_scale = Parameter(np.full(n_relations, np.log(scale)), requires_grad=learn_scale)
        self.bias_head = Parameter(np.zeros(n_entities))
        self.bias_tail = Parameter(np.zeros(n_entities))
        self.margin = Parameter(np.array(margin), requires_grad=False)

    @property
    def projected(self):
        """Parameters stored as spatial rows that take the max-norm projection."""
        return [self.entity]

    def points(self, ids=None):
        spatial = self.entity if ids is None else self.entity[np.asarray(ids)]
        return lift(spatial, self.K)

    def transform(self, x, r):
        """Apply relation ``r[i]`` to point ``x[i]``; x (B, dim+1), r (B,)."""
        r = np.asarray(r)
        W = self.rel_weight[r]                                   # (B, dim, dim+1)
        u = (W @ x.reshape(x.shape[0], self.dim + 1, 1)).reshape(x.shape[0], self.dim)
        if self.relation_form == "fx":
            norm_sq = ad.sum(ad.square(u), axis=-1, keepdims=True)
            return ad.concat([ad.sqrt(norm_sq - 1.0 / self.K), u])
        z = ad.sum(x * self.rel_v[r], axis=-1, keepdims=True) + self.rel_time_bias[r].reshape(-1, 1)
        scale = ad.exp(self.rel_log_scale[r]).reshape(-1, 1)
        y0 = scale * ad.sigmoid(z) + self.eps
        return _rescale(u, y0, self.K)

    def _check_ids(self, h, r, t):
        for name, ids, hi in (("entity", h, self.n_entities), ("relation", r, self.n_relations),
                              ("entity", t, self.n_entities)):
            ids = np.asarray(ids)
            if ids.size and (ids.min() < 0 or ids.max() >= hi):
                bad = ids[(ids < 0) | (ids >= hi)].ravel()[0]
                raise IndexError(f"unknown {name} id {bad} (have {hi})")

    def forward(self, triplets):
        """Scores for an (N, 3) array of (h, r, t) ids."""
        triplets = np.asarray(triplets, dtype=np.int64).reshape(-1, 3)
        h, r, t = triplets[:, 0], triplets[:, 1], triplets[:, 2]
        self._check_ids(h, r, t)
        head = self.transform(self.points(h), r)
        d2 = squared_distance(head, self.points(t), self.K)
        return -d2 + self.bias_head[h] + self.bias_tail[t] + self.margin

    def score_all_tails(self, queries):
        """Numpy (B, |E|) scores of every candidate tail for (h, r) queries."""
        queries = np.asarray(queries, dtype=np.int64)
        h, r = queries[:, 0], queries[:, 1]
        self._check_ids(h, r, np.zeros(0, np.int64))
        with ad.no_grad():
            head = self.transform(self.points(h), r).data
            ent = self.points().data
        ip = kernels.pairwise_inner(head, ent)
        d2 = np.maximum(2.0 / self.K - 2.0 * ip, 0.0)
        return (-d2 + self.bias_head.data[h][:, None] + self.bias_tail.data[None, :]
                + self.margin.data)


def kg_score(model, h, r, t):
    """Score of one triplet (ints) or a batch (equal-length id arrays); a Tensor."""
    scalar = np.ndim(h) == 0
    trip = np.stack([np.atleast_1d(h), np.atleast_1d(r), np.atleast_1d(t)], axis=1)
    s = model(trip)
    return s.reshape(()) if scalar else s


def sample_negatives(batch, k, n_entities, rng):
    """(N, k, 3) corrupted copies of ``batch``.

    Each negative replaces the head or the tail (coin flip) by an entity drawn
    uniformly from the vocabulary without the true one.
    """
    if k < 1:
        raise ValueError("need k >= 1 negatives")
    if n_entities < 2:
        raise ValueError("corruption needs at least two entities")
    batch = np.asarray(batch, dtype=np.int64).reshape(-1, 3)
    N = len(batch)
    neg = np.repeat(batch[:, None, :], k, axis=1)
    side = np.where(rng.random((N, k)) < 0.5, 0, 2)
    true = np.take_along_axis(neg, side[..., None], axis=2)[..., 0]
    draw = rng.integers(0, n_entities - 1, size=(N, k))
    draw = draw + (draw >= true)
    np.put_along_axis(neg, side[..., None], draw[..., None], axis=2)
    return neg


def kg_loss(model, batch, k=1, rng=None, negatives=None):
    """Binary cross-entropy over positives and ``k`` corrupted triplets each.

    -(1/N) sum_i [log sigma(s_i) + sum_j log(1 - sigma(s~_ij))]. Pass
    ``negatives`` (N, k, 3) to freeze the corruption.
    """
    batch = np.asarray(batch, dtype=np.int64).reshape(-1, 3)
    if negatives is None:
        rng = np.random.default_rng() if rng is None else rng
        negatives = sample_negatives(batch, k, model.n_entities, rng)
    negatives = np.asarray(negatives, dtype=np.int64)
    N = len(batch)
    pos = model(batch)
    neg = model(negatives.reshape(-1, 3))
    total = ad.sum(ad.log_sigmoid(pos)) + ad.sum(ad.log_sigmoid(-neg))
    return -total / float(N)


def kg_rank_metrics(model, triplets, filter_csr=None, batch_size=512, hits=(1, 3, 10),
                    return_ranks=False):
    """Filtered MRR and Hits@K ranking the true tail of every row of ``triplets``.

    ``triplets`` should carry the reciprocal rows so head prediction is covered.
    ``filter_csr`` is ``(indptr, indices)`` of known-true tails per row (see
    ``TripletStore.filter_csr``); None ranks in the raw setting.
    """
    triplets = np.asarray(triplets, dtype=np.int64).reshape(-1, 3)
    if len(triplets) == 0:
        raise ValueError("no triplets to rank")
    ranks = np.empty(len(triplets))
    for start in range(0, len(triplets), batch_size):
        chunk = triplets[start:start + batch_size]
        scores = model.score_all_tails(chunk[:, :2])
        if filter_csr is None:
            ranks[start:start + len(chunk)] = kernels.filtered_ranks(scores, chunk[:, 2])
        else:
            indptr, indices = filter_csr
            sub_ptr = indptr[start:start + len(chunk) + 1]
            sub_idx = indices[sub_ptr[0]:sub_ptr[-1]]
            ranks[start:start + len(chunk)] = kernels.filtered_ranks(
                scores, chunk[:, 2], sub_ptr - sub_ptr[0], sub_idx)
    out = metrics_from_ranks(ranks, hits)
    return (out, ranks) if return_ranks else out


def metrics_from_ranks(ranks, hits=(1, 3, 10)):
    ranks = np.asarray(ranks, dtype=float)
    out = {"mrr": float(np.mean(1.0 / ranks))}
    for k in hits:
        out[f"hits{k}"] = float(np.mean(ranks <= k))
    return out


__all__ = ["KgModel", "kg_score", "kg_loss", "kg_rank_metrics", "sample_negatives",
           "metrics_from_ranks"]
