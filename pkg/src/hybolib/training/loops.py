"""Training loops for the three model kinds.

Each loop is deterministic given ``config.seed``: one SeedSequence is split
into an initialization stream and a training stream (shuffling, negatives,
dropout). Progress goes to the ``hybolib`` logger; per-epoch records go to
``history`` and, when ``log_path`` is given, to a JSON Lines file.
"""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .. import autodiff as ad
from .. import checkpoint
from .. import datasets as ds
from .. import manifold as mf
from ..models import (GcnModel, KgModel, ToyTransformerEncoder, kg_loss, kg_rank_metrics,
                      lp_loss, nc_loss, neighbour_mask, token_cross_entropy)
from .metrics import accuracy, f1_macro, roc_auc
from .optim import NumericalAbort, make_optimizer

logger = logging.getLogger("hybolib.train")


@dataclass
class TrainResult:
    model: object
    history: list = field(default_factory=list)
    best_metric: float | None = None
    best_epoch: int | None = None
    extra: dict = field(default_factory=dict)


class JsonlLog:
    """Collects epoch records; mirrors them to ``path`` when given."""

    def __init__(self, path=None):
        self.records = []
        self._fh = open(path, "w", encoding="utf-8") if path else None

    def write(self, record):
        self.records.append(record)
        if self._fh:
            self._fh.write(json.dumps(record) + "\n")
            self._fh.flush()

    def close(self):
        if self._fh:
            self._fh.close()
            self._fh = None


def split_rngs(seed):
    init, train = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(init), np.random.default_rng(train)


def _optimizer(config, model):
    return make_optimizer(config.optimizer, list(model.named_parameters()), config.lr,
                          betas=config.betas, grad_clip=config.grad_clip,
                          max_norm=config.max_norm, projected=model.projected, K=config.K,
                          weight_decay=config.weight_decay)


def _step(model, opt, loss, lr=None):
    value = float(loss.item())
    if not math.isfinite(value):
        raise NumericalAbort(f"loss became {value}")
    model.zero_grad()
    loss.backward()
    opt.step(lr=lr)
    return value


def _run(model, config, log, epoch_fn, eval_fn, higher_is_better=True):
    """Shared epoch/eval/checkpoint logic.

    ``epoch_fn(epoch)`` trains one epoch and returns the mean loss;
    ``eval_fn()`` returns ``(selection_value, metric_dict)``.
    """
    result = TrainResult(model)
    best_state = model.state_dict()
    best = None
    stale = 0
    for epoch in range(1, config.epochs + 1):
        t0 = time.perf_counter()
        try:
            loss = epoch_fn(epoch)
        except NumericalAbort as exc:
            model.load_state_dict(best_state)
            raise NumericalAbort(f"epoch {epoch}: {exc}", state=best_state) from None
        metric = {}
        if epoch % config.eval_every == 0 or epoch == config.epochs:
            value, metric = eval_fn()
            improved = best is None or (value > best if higher_is_better else value < best)
            if improved:
                best, result.best_epoch = value, epoch
                best_state = model.state_dict()
                stale = 0
            else:
                stale += 1
        record = {"epoch": epoch, "loss": loss, "metric": metric,
                  "wall_ms": int(round(1000 * (time.perf_counter() - t0)))}
        log.write(record)
        result.history.append(record)
        if metric:
            logger.info("epoch %d loss %.5f %s", epoch, loss,
                        " ".join(f"{k} {v:.4f}" for k, v in metric.items()))
        if config.patience is not None and stale >= config.patience:
            logger.info("early stop at epoch %d (best epoch %s)", epoch, result.best_epoch)
            break
    if best is not None:
        model.load_state_dict(best_state)
    result.best_metric = best
    return result


def _batches(n, batch_size, rng):
    perm = rng.permutation(n)
    return [perm[i:i + batch_size] for i in range(0, n, batch_size)]


# ---------------------------------------------------------------------------
# knowledge graphs


def build_kg_model(config, n_entities, n_relations, rng=None):
    return KgModel(n_entities, n_relations, config.dim, K=config.K, margin=config.margin,
                   scale=config.scale, learn_scale=config.learn_scale, max_norm=config.max_norm,
                   relation_form=config.relation_form, init_std=config.init_std, rng=rng)


def evaluate_kg(model, store, split="valid"):
    triplets = store.split(split)
    if len(triplets) == 0:
        raise ValueError(f"split {split!r} is empty")
    return kg_rank_metrics(model, triplets, store.filter_csr(triplets))


def train_kg(config, store, log_path=None, precision="f64"):
    """Adam (or RSGD) on the BCE loss; keeps the parameters with the best valid MRR."""
    with ad.precision(precision):
        init_rng, rng = split_rngs(config.seed)
        model = build_kg_model(config, store.n_entities, store.n_relations, init_rng)
        opt = _optimizer(config, model)
        train = store.train
        eval_split = "valid" if len(store.valid) else "train"

        def epoch_fn(epoch):
            total, count = 0.0, 0
            for idx in _batches(len(train), config.batch_size, rng):
                batch = train[idx]
                loss = kg_loss(model, batch, config.negatives, rng)
                total += _step(model, opt, loss) * len(batch)
                count += len(batch)
            return total / count

        def eval_fn():
            m = evaluate_kg(model, store, eval_split)
            return m["mrr"], m

        log = JsonlLog(log_path)
        try:
            return _run(model, config, log, epoch_fn, eval_fn)
        finally:
            log.close()


# ---------------------------------------------------------------------------
# graphs


def _graph_features(graph):
    if graph.features is not None:
        return np.asarray(graph.features)
    return np.eye(graph.n_nodes)


def build_gcn_model(config, in_features, n_classes=2, task=None, rng=None):
    return GcnModel(in_features, config.dim, n_layers=config.layers, task=task or config.task,
                    n_classes=n_classes, K=config.K, scale=config.scale, dropout=config.dropout,
                    r=config.fd_r, t=config.fd_t, self_loops=config.self_loops, rng=rng)


def gcn_adjacency(graph, task, self_loops=True):
    edges = graph.train_edges if task == "lp" else graph.edges
    return neighbour_mask(graph.n_nodes, edges, self_loops)


def evaluate_gcn(model, graph, task, split="valid", adjacency=None):
    adjacency = gcn_adjacency(graph, task, model.self_loops) if adjacency is None else adjacency
    with ad.no_grad():
        model.eval()
        X = model.encode(_graph_features(graph), adjacency)
        model.train()
        if task == "lp":
            pos, neg = graph.lp_splits[split]
            return {"roc_auc": roc_auc(model.edge_logits(X, pos).data, model.edge_logits(X, neg).data)}
        nodes = graph.nc_splits[split]
        pred = np.argmax(model.class_logits(X, nodes).data, axis=-1)
        true = graph.labels[nodes]
        return {"f1": f1_macro(pred, true), "accuracy": accuracy(pred, true)}


def train_gcn(config, graph, task=None, log_path=None, precision="f64"):
    """Full-batch training for link prediction (``lp``) or node classification (``nc``)."""
    task = task or config.task
    if task == "lp" and not graph.lp_splits:
        raise ValueError("graph has no link-prediction splits")
    if task == "nc" and (graph.labels is None or not graph.nc_splits):
        raise ValueError("graph has no node labels or node splits")
    with ad.precision(precision):
        init_rng, rng = split_rngs(config.seed)
        feats = _graph_features(graph)
        n_classes = int(graph.labels.max()) + 1 if graph.labels is not None else 2
        model = build_gcn_model(config, feats.shape[1], n_classes, task, init_rng)
        model.train()
        opt = _optimizer(config, model)
        adjacency = gcn_adjacency(graph, task, config.self_loops)
        full = graph.adjacency(self_loops=True)

        def epoch_fn(epoch):
            X = model.encode(feats, adjacency)
            if task == "lp":
                pos = graph.train_edges
                neg = ds.sample_non_edges(graph.n_nodes, full, len(pos), rng)
                loss = lp_loss(model, X, pos, neg)
            else:
                nodes = graph.nc_splits["train"]
                loss = nc_loss(model, X, nodes, graph.labels[nodes])
            return _step(model, opt, loss)

        def eval_fn():
            m = evaluate_gcn(model, graph, task, "valid", adjacency)
            return (m["roc_auc"] if task == "lp" else m["f1"]), m

        log = JsonlLog(log_path)
        try:
            res = _run(model, config, log, epoch_fn, eval_fn)
        finally:
            log.close()
        res.extra["task"] = task
        return res


# ---------------------------------------------------------------------------
# toy transformer


def build_transformer(config, rng=None):
    return ToyTransformerEncoder(config.vocab + 1, dim=config.dim, n_layers=config.layers,
                                 heads=config.heads, max_len=config.seq_len, K=config.K,
                                 scale=config.scale, dropout=config.dropout,
                                 init_std=config.init_std, rng=rng)


def transformer_tasks(config):
    make = lambda n, seed: ds.gen_toy_sequences(n, config.seq_len, config.vocab,  # noqa: E731
                                                config.mask_rate, seed)
    return make(config.n_sequences, config.seed), make(max(64, config.n_sequences // 4), config.seed + 1)


def evaluate_transformer(model, task, batch_size=64):
    """Masked-token accuracy and the worst manifold error over every intermediate."""
    correct, total, worst = 0, 0, 0.0
    with ad.no_grad():
        for start in range(0, len(task.inputs), batch_size):
            sl = slice(start, start + batch_size)
            collect = []
            _, logits = model(task.inputs[sl], collect=collect)
            pred = np.argmax(logits.data, axis=-1)
            m = task.masked[sl]
            correct += int(np.sum((pred == task.targets[sl]) & m))
            total += int(m.sum())
            for pts in collect:
                worst = max(worst, float(np.max(mf.manifold_error(pts.data, model.K))))
    return {"accuracy": correct / max(total, 1), "manifold_error": worst}


def train_transformer(config, log_path=None, precision="f64", tasks=None):
    """Masked reconstruction with a linear warmup over ``config.warmup`` optimizer steps."""
    with ad.precision(precision):
        init_rng, rng = split_rngs(config.seed)
        train_task, valid_task = tasks or transformer_tasks(config)
        model = build_transformer(config, init_rng)
        model.train()
        opt = _optimizer(config, model)

        def epoch_fn(epoch):
            total, count = 0.0, 0
            for idx in _batches(len(train_task.inputs), config.batch_size, rng):
                _, logits = model(train_task.inputs[idx])
                loss = token_cross_entropy(logits, train_task.targets[idx], train_task.masked[idx])
                warm = min(1.0, (opt.step_count + 1) / config.warmup) if config.warmup else 1.0
                total += _step(model, opt, loss, lr=config.lr * warm) * len(idx)
                count += len(idx)
            return total / count

        def eval_fn():
            model.eval()
            m = evaluate_transformer(model, valid_task)
            model.train()
            return m["accuracy"], m

        log = JsonlLog(log_path)
        try:
            return _run(model, config, log, epoch_fn, eval_fn)
        finally:
            log.close()


# ---------------------------------------------------------------------------
# checkpoints


def save_model(path, model, kind, config, extra=None):
    meta = {"model": kind, "config": config.to_dict(), **(extra or {})}
    return checkpoint.save(path, model.state_dict(), meta)


def load_model(path):
    """Rebuild a model from an archive written by :func:`save_model`; returns (model, meta)."""
    from .config import RunConfig

    state, header = checkpoint.load(path)
    meta = header["meta"]
    config = RunConfig.from_dict(meta["config"])
    precision = "f32" if header["scalar_bits"] == 32 else "f64"
    with ad.precision(precision):
        kind = meta["model"]
        if kind == "kg":
            model = build_kg_model(config, meta["n_entities"], meta["n_relations"])
        elif kind == "gcn":
            model = build_gcn_model(config, meta["in_features"], meta.get("n_classes", 2),
                                    meta.get("task"))
        elif kind == "toy-transformer":
            model = build_transformer(config)
        else:
            raise checkpoint.CheckpointError(f"unknown model kind {kind!r}")
        model.load_state_dict(state)
    return model, meta


__all__ = ["TrainResult", "JsonlLog", "train_kg", "train_gcn", "train_transformer",
           "evaluate_kg", "evaluate_gcn", "evaluate_transformer", "build_kg_model",
           "build_gcn_model", "build_transformer", "save_model", "load_model",
           "transformer_tasks", "gcn_adjacency", "split_rngs", "NumericalAbort"]
