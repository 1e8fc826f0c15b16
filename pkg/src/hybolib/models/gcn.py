"""Hyperbolic graph network: Lorentz linear transform, then centroid attention over neighbours."""

from __future__ import annotations

import numpy as np

from .. import autodiff as ad
from .. import manifold as mf
from ..layers.base import Module, Parameter
from ..layers.functional import _t, lift, lorentz_attention, pairwise_squared_distance, squared_distance
from ..layers.linear import LorentzLinear
from .heads import fermi_dirac, fermi_dirac_logit

TASKS = ("lp", "nc")


def neighbour_mask(n_nodes, edges, self_loops=True):
    A = np.zeros((n_nodes, n_nodes), dtype=bool)
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    A[edges[:, 0], edges[:, 1]] = True
    A[edges[:, 1], edges[:, 0]] = True
    if self_loops:
        np.fill_diagonal(A, True)
    return A


def gcn_layer(layer, X, adjacency, K=mf.DEFAULT_K):
    """One aggregation step.

    Every node's transformed feature is the query; the transformed features
    of the nodes marked in its ``adjacency`` row are keys and values. A node
    with an empty row keeps its transformed feature.
    """
    adjacency = np.asarray(adjacency, dtype=bool)
    H = layer(X)
    if H.shape[0] != adjacency.shape[0] or adjacency.shape[0] != adjacency.shape[1]:
        raise ValueError(f"adjacency {adjacency.shape} does not match {H.shape[0]} nodes")
    out = lorentz_attention(H, H, H, K, mask=adjacency)
    isolated = ~adjacency.any(axis=1)
    if isolated.any():
        out = ad.where(np.broadcast_to(isolated[:, None], out.shape), H, out)
    return out


class GcnModel(Module):
    """Stack of Lorentz GCN layers over node features lifted onto the hyperboloid.

    ``task="lp"`` scores edges with the Fermi-Dirac decoder (``r``, ``t``);
    ``task="nc"`` scores nodes against ``n_classes`` learnable class points.
    """

    def __init__(self, in_features, dim, n_layers=2, task="lp", n_classes=2, K=mf.DEFAULT_K,
                 scale=2.5, dropout=0.0, r=2.0, t=1.0, self_loops=True, rng=None,
                 init_bound=None):
        if task not in TASKS:
            raise ValueError(f"task must be one of {TASKS}")
        if n_layers < 1:
            raise ValueError("need at least one layer")
        if t <= 0:
            raise ValueError("Fermi-Dirac temperature must be positive")
        rng = np.random.default_rng() if rng is None else rng
        self.K = mf.check_curvature(K)
        self.task = task
        self.r = float(r)
        self.t = float(t)
        self.self_loops = self_loops
        widths = [in_features + 1] + [dim + 1] * n_layers
        self.layers = [
            LorentzLinear(widths[i], widths[i + 1], K=K, scale=scale, dropout=dropout,
                          activation="identity" if i == 0 else "relu", rng=rng,
                          init_bound=1.0 / np.sqrt(widths[i]) if init_bound is None else init_bound)
            for i in range(n_layers)
        ]
        if task == "nc":
            self.classes = Parameter(0.1 * rng.standard_normal((n_classes, dim)))

    @property
    def projected(self):
        return []

    def encode(self, features, adjacency, collect=None):
        """Node points after every layer; ``collect`` (a list) receives each intermediate."""
        X = lift(_t(features, like=self.layers[0].weight), self.K)
        if collect is not None:
            collect.append(X)
        for layer in self.layers:
            X = gcn_layer(layer, X, adjacency, self.K)
            if collect is not None:
                collect.append(X)
        return X

    def forward(self, features, adjacency):
        return self.encode(features, adjacency)

    def edge_logits(self, X, pairs):
        pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        d2 = squared_distance(X[pairs[:, 0]], X[pairs[:, 1]], self.K)
        return fermi_dirac_logit(d2, self.r, self.t)

    def edge_probability(self, X, pairs):
        return ad.sigmoid(self.edge_logits(X, pairs))

    def class_logits(self, X, nodes=None):
        Z = X if nodes is None else X[np.asarray(nodes)]
        return -pairwise_squared_distance(Z, lift(self.classes, self.K), self.K)


def lp_loss(model, X, pos, neg):
    """Mean binary cross-entropy of Fermi-Dirac probabilities on edges and non-edges."""
    lp = model.edge_logits(X, pos)
    ln = model.edge_logits(X, neg)
    total = ad.sum(ad.log_sigmoid(lp)) + ad.sum(ad.log_sigmoid(-ln))
    return -total / float(len(pos) + len(neg))


def nc_loss(model, X, nodes, labels):
    logp = ad.log_softmax(model.class_logits(X, nodes))
    labels = np.asarray(labels, dtype=np.int64)
    picked = logp[np.arange(len(labels)), labels]
    return -ad.mean(picked)


__all__ = ["GcnModel", "gcn_layer", "neighbour_mask", "lp_loss", "nc_loss", "fermi_dirac"]
