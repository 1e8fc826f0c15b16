"""Triplet stores, graphs, loaders and synthetic generators.

Triplet files are UTF-8 TSV, ``head<TAB>relation<TAB>tail`` per line, one
file per split (``train.txt``, ``valid.txt``, ``test.txt``). Edge lists are
``u<TAB>v`` per line with 0-based node ids.

Every split stored in a :class:`TripletStore` already contains the
reciprocal triplet ``(t, r + R, h)`` after each original ``(h, r, t)``, so
evaluation only ever ranks tails.
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SPLITS = ("train", "valid", "test")
RECIPROCAL_SUFFIX = "_reverse"


class DataError(ValueError):
    pass


@dataclass
class TripletStore:
    entities: list
    relations: list          # base relations only; reciprocal of r has id r + len(relations)
    train: np.ndarray        # (N, 3) int64, reciprocals included
    valid: np.ndarray
    test: np.ndarray
    filter: dict = field(default_factory=dict)   # (h, r) -> sorted int64 array of true tails

    @property
    def n_entities(self):
        return len(self.entities)

    @property
    def n_relations(self):
        """Relation ids in use, reciprocals included."""
        return 2 * len(self.relations)

    def relation_name(self, r):
        R = len(self.relations)
        return self.relations[r] if r < R else self.relations[r - R] + RECIPROCAL_SUFFIX

    def split(self, name):
        return getattr(self, name)

    def originals(self, name):
        """The split without its reciprocal rows."""
        arr = self.split(name)
        return arr[arr[:, 1] < len(self.relations)]

    def filter_csr(self, queries):
        """CSR (indptr, indices) of known-true tails for each (h, r) in ``queries``."""
        lists = [self.filter.get((int(h), int(r)), np.zeros(0, np.int64)) for h, r in queries[:, :2]]
        indptr = np.zeros(len(lists) + 1, dtype=np.int64)
        indptr[1:] = np.cumsum([len(x) for x in lists])
        indices = np.concatenate(lists) if lists else np.zeros(0, np.int64)
        return indptr, indices.astype(np.int64)


def with_reciprocals(triplets, n_base_relations):
    triplets = np.asarray(triplets, dtype=np.int64).reshape(-1, 3)
    rev = triplets[:, [2, 1, 0]].copy()
    rev[:, 1] += n_base_relations
    out = np.empty((2 * len(triplets), 3), dtype=np.int64)
    out[0::2] = triplets
    out[1::2] = rev
    return out


def build_filter(*splits):
    known = defaultdict(set)
    for arr in splits:
        for h, r, t in arr:
            known[(int(h), int(r))].add(int(t))
    return {k: np.array(sorted(v), dtype=np.int64) for k, v in known.items()}


def make_store(entities, relations, raw_splits):
    """Build a store from per-split arrays of original (h, r, t) id triplets."""
    R = len(relations)
    full = {name: with_reciprocals(raw_splits.get(name, np.zeros((0, 3))), R) for name in SPLITS}
    store = TripletStore(list(entities), list(relations), full["train"], full["valid"], full["test"])
    store.filter = build_filter(*full.values())
    return store


def _read_triplet_file(path):
    rows = []
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 3 or not all(p.strip() for p in parts):
                raise DataError(f"{path}:{lineno}: expected head<TAB>relation<TAB>tail, got {line!r}")
            rows.append(tuple(p.strip() for p in parts))
    return rows


def _split_path(root, name):
    for ext in (".txt", ".tsv", ""):
        p = root / f"{name}{ext}"
        if p.is_file():
            return p
    return None


def _read_dict(path):
    """``id<TAB>name`` lines; ids must be 0..n-1 in order."""
    names = []
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2 or parts[0].strip() != str(len(names)):
                raise DataError(f"{path}:{lineno}: expected {len(names)}<TAB>name, got {line!r}")
            names.append(parts[1].strip())
    if len(set(names)) != len(names):
        raise DataError(f"{path}: duplicate names")
    return {n: i for i, n in enumerate(names)}


def load_triplets(path, vocab_from="all"):
    """Load ``train``/``valid``/``test`` TSV files from directory ``path``.

    Vocabularies are built from every split (``vocab_from="all"``, the usual
    convention) or from train only, in which case an unseen valid/test name
    is an error. Ids follow first appearance, train first, unless the
    directory has ``entities.dict`` / ``relations.dict`` (``id<TAB>name``),
    which then fix the ids and the vocabulary.
    """
    root = Path(path)
    if root.is_file():
        files = {"train": root}
    else:
        files = {name: _split_path(root, name) for name in SPLITS}
        if files["train"] is None:
            raise DataError(f"{root}: no train file found")
    rows = {name: _read_triplet_file(p) if p is not None else [] for name, p in files.items()}
    ent, rel = {}, {}
    dicts = [None if root.is_file() else root / f"{k}.dict" for k in ("entities", "relations")]
    if all(d is not None and d.is_file() for d in dicts):
        ent, rel = _read_dict(dicts[0]), _read_dict(dicts[1])
    vocab_splits = () if ent else SPLITS if vocab_from == "all" else ("train",)
    for name in vocab_splits:
        for h, r, t in rows.get(name, []):
            ent.setdefault(h, len(ent))
            rel.setdefault(r, len(rel))
            ent.setdefault(t, len(ent))
    raw = {}
    for name in SPLITS:
        ids = []
        for lineno, (h, r, t) in enumerate(rows.get(name, []), 1):
            for kind, key, table in (("entity", h, ent), ("relation", r, rel), ("entity", t, ent)):
                if key not in table:
                    raise DataError(f"{name} triplet {lineno}: {kind} {key!r} not in vocabulary")
            ids.append((ent[h], rel[r], ent[t]))
        raw[name] = np.array(ids, dtype=np.int64).reshape(-1, 3)
    return make_store(list(ent), list(rel), raw)


def write_triplets(store, out_dir):
    """Write the original (non-reciprocal) triplets of every split as TSV, plus
    ``entities.dict`` and ``relations.dict`` so a reload keeps the same ids."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, vocab in (("entities", store.entities), ("relations", store.relations)):
        with open(out / f"{name}.dict", "w", encoding="utf-8", newline="\n") as fh:
            fh.writelines(f"{i}\t{v}\n" for i, v in enumerate(vocab))
    for name in SPLITS:
        with open(out / f"{name}.txt", "w", encoding="utf-8", newline="\n") as fh:
            for h, r, t in store.originals(name):
                fh.write(f"{store.entities[h]}\t{store.relations[r]}\t{store.entities[t]}\n")


# ---------------------------------------------------------------------------
# synthetic knowledge graphs


def tree_edges(branching, depth):
    """Parent-child pairs of a balanced tree with nodes numbered breadth-first."""
    edges = []
    level = [0]
    nxt = 1
    for _ in range(depth):
        new_level = []
        for parent in level:
            for _ in range(branching):
                edges.append((parent, nxt))
                new_level.append(nxt)
                nxt += 1
        level = new_level
    return np.array(edges, dtype=np.int64).reshape(-1, 2), nxt


def split_edges(edges, n_nodes, rng, frac_valid=0.1, frac_test=0.1):
    """Random edge assignment to train/valid/test keeping every node in train.

    An edge is only held out if both endpoints keep another train edge.
    Returns three index arrays into ``edges``.
    """
    E = len(edges)
    want = {"test": int(round(frac_test * E)), "valid": int(round(frac_valid * E))}
    degree = np.bincount(edges.ravel(), minlength=n_nodes)
    assign = np.zeros(E, dtype=np.int64)     # 0 train, 1 valid, 2 test
    for i in rng.permutation(E):
        u, v = edges[i]
        if degree[u] < 2 or degree[v] < 2:
            continue
        for code, name in ((2, "test"), (1, "valid")):
            if want[name] > 0:
                want[name] -= 1
                assign[i] = code
                degree[u] -= 1
                degree[v] -= 1
                break
        else:
            break
    return np.flatnonzero(assign == 0), np.flatnonzero(assign == 1), np.flatnonzero(assign == 2)


def gen_tree_kg(branching, depth, seed=0):
    """Balanced tree as a one-relation ``parent_of`` knowledge graph, split 80/10/10."""
    if branching < 2 or depth < 2:
        raise DataError("gen_tree_kg needs branching >= 2 and depth >= 2")
    edges, n = tree_edges(branching, depth)
    if 2 * len(edges) < 10:
        raise DataError(f"tree with {len(edges)} edges is too small (< 10 triplets)")
    rng = np.random.default_rng(seed)
    parts = split_edges(edges, n, rng)
    raw = {}
    for name, idx in zip(SPLITS, parts):
        e = edges[np.sort(idx)]
        raw[name] = np.stack([e[:, 0], np.zeros(len(e), np.int64), e[:, 1]], axis=1)
    return make_store([f"n{i}" for i in range(n)], ["parent_of"], raw)


# ---------------------------------------------------------------------------
# graphs


@dataclass
class Graph:
    n_nodes: int
    edges: np.ndarray                       # (E, 2) undirected, u < v, unique
    features: np.ndarray | None = None      # (N, d) spatial vectors
    labels: np.ndarray | None = None        # (N,) int
    lp_splits: dict = field(default_factory=dict)   # name -> (pos (k,2), neg (k,2))
    nc_splits: dict = field(default_factory=dict)   # name -> node index array
    meta: dict = field(default_factory=dict)

    def adjacency(self, edges=None, self_loops=False):
        edges = self.edges if edges is None else edges
        A = np.zeros((self.n_nodes, self.n_nodes), dtype=bool)
        A[edges[:, 0], edges[:, 1]] = True
        A[edges[:, 1], edges[:, 0]] = True
        if self_loops:
            np.fill_diagonal(A, True)
        return A

    @property
    def train_edges(self):
        return self.lp_splits["train"][0] if "train" in self.lp_splits else self.edges


def _canonical_edges(edges, n_nodes):
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if len(edges) and (edges.min() < 0 or edges.max() >= n_nodes):
        bad = edges[(edges < 0) | (edges >= n_nodes)][0]
        raise DataError(f"node id {bad} out of range [0, {n_nodes})")
    edges = edges[edges[:, 0] != edges[:, 1]]
    edges = np.sort(edges, axis=1)
    return np.unique(edges, axis=0)


def load_edge_list(path, n_nodes=None):
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise DataError(f"{path}:{lineno}: expected u<TAB>v, got {line!r}")
            try:
                rows.append((int(parts[0]), int(parts[1])))
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-integer node id in {line!r}") from None
    edges = np.array(rows, dtype=np.int64).reshape(-1, 2)
    if len(edges) and edges.min() < 0:
        raise DataError(f"{path}: negative node id")
    n = int(edges.max()) + 1 if n_nodes is None and len(edges) else (n_nodes or 0)
    return Graph(n, _canonical_edges(edges, n))


def write_edge_list(graph, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for u, v in graph.edges:
            fh.write(f"{u}\t{v}\n")


def sample_non_edges(n_nodes, forbidden, count, rng):
    """``count`` distinct node pairs (u < v) not in ``forbidden`` (a boolean adjacency)."""
    out = set()
    while len(out) < count:
        u, v = rng.integers(0, n_nodes, size=2)
        if u == v or forbidden[u, v]:
            continue
        out.add((min(u, v), max(u, v)))
    return np.array(sorted(out), dtype=np.int64).reshape(-1, 2)


def lp_split(graph, rng, frac_valid=0.05, frac_test=0.1):
    """Hold out uniformly random edges (plus as many random non-edges) for link prediction.

    A node may lose all its training edges; the self-loop keeps its own feature.
    """
    E = len(graph.edges)
    n_te, n_va = int(round(frac_test * E)), int(round(frac_valid * E))
    perm = rng.permutation(E)
    te, va, tr = np.sort(perm[:n_te]), np.sort(perm[n_te:n_te + n_va]), np.sort(perm[n_te + n_va:])
    full = graph.adjacency()
    neg = sample_non_edges(graph.n_nodes, full, len(va) + len(te), rng)
    graph.lp_splits = {
        "train": (graph.edges[tr], np.zeros((0, 2), np.int64)),
        "valid": (graph.edges[va], neg[:len(va)]),
        "test": (graph.edges[te], neg[len(va):]),
    }
    return graph


def nc_split(graph, rng, frac_valid=0.2, frac_test=0.3):
    perm = rng.permutation(graph.n_nodes)
    n_va = int(round(frac_valid * graph.n_nodes))
    n_te = int(round(frac_test * graph.n_nodes))
    graph.nc_splits = {
        "valid": np.sort(perm[:n_va]),
        "test": np.sort(perm[n_va:n_va + n_te]),
        "train": np.sort(perm[n_va + n_te:]),
    }
    return graph


def node_depths(n_nodes, edges, root=0):
    adj = defaultdict(list)
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    depth = np.full(n_nodes, -1, dtype=np.int64)
    depth[root] = 0
    frontier = [root]
    while frontier:
        nxt = []
        for u in frontier:
            for w in adj[u]:
                if depth[w] < 0:
                    depth[w] = depth[u] + 1
                    nxt.append(w)
        frontier = nxt
    return depth


def _tree_features(n_nodes, edges, labels, rng, dim=16, step=1.0, label_dim=4, label_signal=4.0,
                   root_norm=1.5):
    """Hierarchical features: each node's vector is its parent's plus Gaussian noise
    (a random walk down the tree), concatenated with a noisy one-hot of its label."""
    depth = node_depths(n_nodes, edges)
    parent = np.full(n_nodes, -1)
    for u, v in edges:
        child, par = (v, u) if depth[v] > depth[u] else (u, v)
        parent[child] = par
    walk = np.zeros((n_nodes, dim))
    root = rng.standard_normal(dim)
    walk[depth == 0] = root_norm * np.sqrt(dim) * root / np.linalg.norm(root)
    for node in np.argsort(depth, kind="stable"):
        if parent[node] >= 0:
            walk[node] = walk[parent[node]] + step * rng.standard_normal(dim)
    lab = 0.5 * rng.standard_normal((n_nodes, label_dim))
    lab[np.arange(n_nodes), labels % label_dim] += label_signal
    return np.concatenate([walk / np.sqrt(dim), lab], axis=1)


def gen_toy_graph(kind="tree", size=63, seed=0, branching=2, feature_dim=16):
    """Synthetic graph with features, depth-parity labels and LP/NC splits.

    ``tree``: the first ``size`` nodes of a breadth-first ``branching``-ary tree.
    ``barbell``: two cliques of ``size // 2`` nodes joined by one edge; labels
    are the clique index.
    """
    rng = np.random.default_rng(seed)
    if kind == "tree":
        depth = 1
        while (branching ** (depth + 1) - 1) // (branching - 1) < size:
            depth += 1
        edges, _ = tree_edges(branching, depth)
        edges = edges[edges[:, 1] < size]
        labels = node_depths(size, edges) % 2
    elif kind == "barbell":
        half = size // 2
        if half < 2:
            raise DataError("barbell needs size >= 4")
        clique = [(i, j) for i in range(half) for j in range(i + 1, half)]
        edges = np.array(clique + [(i + half, j + half) for i, j in clique] + [(half - 1, half)])
        size = 2 * half
        labels = (np.arange(size) >= half).astype(np.int64)
    else:
        raise DataError(f"unknown graph kind {kind!r}")
    g = Graph(size, _canonical_edges(edges, size), labels=labels.astype(np.int64),
              meta={"kind": kind, "seed": seed})
    if kind == "tree":
        g.features = _tree_features(size, g.edges, g.labels, rng, dim=feature_dim)
    else:
        g.features = rng.standard_normal((size, feature_dim)) * 0.5
        g.features[:, 0] += np.where(labels == 1, 1.0, -1.0)
    lp_split(g, rng)
    nc_split(g, rng)
    return g


def write_graph(graph, out_dir):
    """Edge list, features, labels and splits under ``out_dir``; returns the manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_edge_list(graph, out / "edges.tsv")
    arrays = {}
    if graph.features is not None:
        arrays["features"] = graph.features
    if graph.labels is not None:
        arrays["labels"] = graph.labels
    for name, (pos, neg) in graph.lp_splits.items():
        arrays[f"lp_{name}_pos"] = pos
        arrays[f"lp_{name}_neg"] = neg
    for name, idx in graph.nc_splits.items():
        arrays[f"nc_{name}"] = idx
    with open(out / "graph.npz", "wb") as fh:
        np.savez(fh, **arrays)
    return {"n_nodes": graph.n_nodes, "n_edges": int(len(graph.edges)), **graph.meta}


def read_graph(out_dir):
    root = Path(out_dir)
    manifest = json.loads((root / "manifest.json").read_text()) if (root / "manifest.json").is_file() else {}
    g = load_edge_list(root / "edges.tsv", n_nodes=manifest.get("n_nodes"))
    if (root / "graph.npz").is_file():
        with np.load(root / "graph.npz") as z:
            g.features = z["features"] if "features" in z.files else None
            g.labels = z["labels"] if "labels" in z.files else None
            for name in SPLITS:
                if f"lp_{name}_pos" in z.files:
                    g.lp_splits[name] = (z[f"lp_{name}_pos"], z[f"lp_{name}_neg"])
                if f"nc_{name}" in z.files:
                    g.nc_splits[name] = z[f"nc_{name}"]
    g.meta = {k: v for k, v in manifest.items() if k not in ("n_nodes", "n_edges")}
    return g


# ---------------------------------------------------------------------------
# toy sequences


@dataclass
class SequenceTask:
    inputs: np.ndarray     # (N, L) ids with masked positions set to mask_id
    targets: np.ndarray    # (N, L) original ids
    masked: np.ndarray     # (N, L) bool, positions to reconstruct
    vocab_size: int        # content tokens plus the mask token
    mask_id: int


def gen_toy_sequences(n, length=16, n_tokens=8, mask_rate=0.25, seed=0):
    """Two-segment sequences for masked-token reconstruction.

    Each sequence is token ``a`` repeated over the first half and token ``b``
    over the second. A ``mask_rate`` share of positions is replaced by the mask
    token, always leaving at least one visible position per half, so every
    masked token is recoverable from its own half.
    """
    if length < 4 or n_tokens < 2 or n < 1:
        raise DataError("need length >= 4, n_tokens >= 2 and n >= 1")
    rng = np.random.default_rng(seed)
    half = length // 2
    a = rng.integers(0, n_tokens, size=n)
    b = rng.integers(0, n_tokens, size=n)
    targets = np.where(np.arange(length)[None, :] < half, a[:, None], b[:, None])
    masked = rng.random((n, length)) < mask_rate
    for lo, hi in ((0, half), (half, length)):
        full = masked[:, lo:hi].all(axis=1)
        keep = rng.integers(lo, hi, size=n)
        masked[np.flatnonzero(full), keep[full]] = False
    empty = ~masked.any(axis=1)
    masked[np.flatnonzero(empty), rng.integers(0, length, size=int(empty.sum()))] = True
    inputs = np.where(masked, n_tokens, targets)
    return SequenceTask(inputs.astype(np.int64), targets.astype(np.int64), masked,
                        n_tokens + 1, n_tokens)
