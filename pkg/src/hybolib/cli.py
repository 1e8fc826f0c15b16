"""Command-line entry point: ``hybolib {verify,gen,train,eval}``.

Machine-readable results (JSON) go to stdout, progress to stderr.
Exit codes: 0 success, 1 verification failure, 2 usage or configuration
error, 3 numerical abort.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import checkpoint
from . import datasets as ds
from .training import config as cfgmod
from .training.loops import (evaluate_gcn, evaluate_kg, evaluate_transformer, load_model,
                             save_model, train_gcn, train_kg, train_transformer, transformer_tasks)
from .training.optim import NumericalAbort
from .verify import SUITES, run_suite

EXIT_OK, EXIT_VERIFY, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3
logger = logging.getLogger("hybolib")


class UsageError(Exception):
    pass


def _emit(obj):
    json.dump(obj, sys.stdout, indent=None, sort_keys=False)
    sys.stdout.write("\n")
    sys.stdout.flush()


def _seed(args_seed):
    return args_seed if args_seed is not None else cfgmod.default_seed()


# ---------------------------------------------------------------------------
# verify


def cmd_verify(args):
    seed = _seed(args.seed)
    if args.trials == 0:
        logger.warning("trials = 0: nothing to check, passing vacuously")
    checks = run_suite(args.suite, args.trials, seed)
    passed = all(c.passed for c in checks)
    for c in checks:
        logger.info("%-4s %-32s max error %.3e (tol %.0e)", "ok" if c.passed else "FAIL",
                    c.name, c.max_error, c.tol)
    _emit({"suite": args.suite, "seed": seed, "trials": args.trials, "passed": passed,
           "checks": [c.to_dict() for c in checks]})
    return EXIT_OK if passed else EXIT_VERIFY


# ---------------------------------------------------------------------------
# gen


def _prepare_out(path):
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise UsageError(f"cannot write to {out}: {exc}") from None
    return out


def cmd_gen(args):
    seed = _seed(args.seed)
    out = _prepare_out(args.out)
    if args.kind == "tree-kg":
        store = ds.gen_tree_kg(args.branching, args.depth, seed=seed)
        ds.write_triplets(store, out)
        manifest = {"kind": "tree-kg", "seed": seed, "branching": args.branching, "depth": args.depth,
                    "n_entities": store.n_entities, "n_relations": len(store.relations),
                    "counts": {s: int(len(store.originals(s))) for s in ds.SPLITS}}
    else:
        kind = "tree" if args.kind == "tree-graph" else "barbell"
        graph = ds.gen_toy_graph(kind, args.size, seed=seed, branching=args.branching)
        manifest = {**ds.write_graph(graph, out), "kind": args.kind, "seed": seed,
                    "lp_counts": {s: int(len(p)) for s, (p, _) in graph.lp_splits.items()},
                    "nc_counts": {s: int(len(v)) for s, v in graph.nc_splits.items()}}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    _emit(manifest)
    return EXIT_OK


# ---------------------------------------------------------------------------
# train / eval


def _load_kg_data(path):
    if path is None:
        raise UsageError("kg needs --data (a directory of train/valid/test TSV files)")
    return ds.load_triplets(path)


def _load_graph_data(path):
    if path is None:
        raise UsageError("gcn needs --data (a directory written by `hybolib gen tree-graph`)")
    return ds.read_graph(path)


def _run_config(args):
    overrides = dict(cfgmod.parse_override(o) for o in (args.set or []))
    for key in ("data", "out", "precision", "seed"):
        val = getattr(args, key, None)
        if val is not None:
            overrides[key] = val
    return cfgmod.load_run_config(args.config, model=args.model, overrides=overrides)


def cmd_train(args):
    cfg = _run_config(args)
    out = _prepare_out(cfg.out or "run")
    ckpt, log_path = out / "model.npz", out / "log.jsonl"
    tcfg = cfg.train_config()
    meta = {}
    try:
        if cfg.model == "kg":
            store = _load_kg_data(cfg.data)
            meta = {"n_entities": store.n_entities, "n_relations": store.n_relations}
            res = train_kg(tcfg, store, log_path=log_path, precision=cfg.precision)
            final = evaluate_kg(res.model, store, "test") if len(store.test) else {}
        elif cfg.model == "gcn":
            graph = _load_graph_data(cfg.data)
            feats = graph.features if graph.features is not None else np.eye(graph.n_nodes)
            meta = {"in_features": int(feats.shape[1]), "task": cfg.task,
                    "n_classes": int(graph.labels.max()) + 1 if graph.labels is not None else 2}
            res = train_gcn(tcfg, graph, log_path=log_path, precision=cfg.precision)
            final = evaluate_gcn(res.model, graph, cfg.task, "test")
        else:
            res = train_transformer(tcfg, log_path=log_path, precision=cfg.precision)
            final = evaluate_transformer(res.model, transformer_tasks(tcfg)[1])
    except NumericalAbort as exc:
        logger.error("numerical abort: %s", exc)
        if exc.state is not None:
            checkpoint.save(ckpt, exc.state, {"model": cfg.model, "config": cfg.to_dict(), **meta,
                                              "aborted": True})
            logger.error("last good parameters written to %s", ckpt)
        _emit({"model": cfg.model, "aborted": True, "error": str(exc)})
        return EXIT_NUMERIC
    save_model(ckpt, res.model, cfg.model, cfg, meta)
    _emit({"model": cfg.model, "best_epoch": res.best_epoch, "best_valid": res.best_metric,
           "test": final, "checkpoint": str(ckpt), "log": str(log_path)})
    return EXIT_OK


def cmd_eval(args):
    try:
        model, meta = load_model(args.checkpoint)
    except (OSError, checkpoint.CheckpointError, KeyError) as exc:
        raise UsageError(f"cannot load checkpoint {args.checkpoint}: {exc}") from None
    kind = meta["model"]
    if args.model and args.model != kind:
        raise UsageError(f"checkpoint holds a {kind} model, not {args.model}")
    cfg = cfgmod.RunConfig.from_dict(meta["config"])
    data = args.data or cfg.data
    if kind == "kg":
        store = _load_kg_data(data)
        if store.n_entities != model.n_entities:
            raise UsageError(f"checkpoint has {model.n_entities} entities, data has {store.n_entities}")
        metrics = evaluate_kg(model, store, args.split)
    elif kind == "gcn":
        metrics = evaluate_gcn(model, _load_graph_data(data), meta.get("task", cfg.task), args.split)
    else:
        tasks = transformer_tasks(cfg.train_config())
        metrics = evaluate_transformer(model, tasks[1] if args.split != "train" else tasks[0])
    _emit(metrics)
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="hybolib", description="Fully hyperbolic networks in the Lorentz model.")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    p.add_argument("-q", "--quiet", action="store_true", help="warnings and errors only")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run randomized property suites")
    v.add_argument("--suite", choices=SUITES + ("all",), default="all")
    v.add_argument("--trials", type=int, default=None, help="trials per suite (default: suite-specific)")
    v.add_argument("--seed", type=int, default=None, help=f"default: ${cfgmod.SEED_ENV} or 0")
    v.set_defaults(func=cmd_verify)

    g = sub.add_parser("gen", help="write a synthetic dataset and manifest.json")
    g.add_argument("kind", choices=("tree-kg", "tree-graph", "barbell"))
    g.add_argument("--out", required=True)
    g.add_argument("--branching", type=int, default=None, help="tree-kg: 3, tree-graph: 2")
    g.add_argument("--depth", type=int, default=3, help="tree-kg depth")
    g.add_argument("--size", type=int, default=63, help="graph node count")
    g.add_argument("--seed", type=int, default=None)
    g.set_defaults(func=cmd_gen)

    t = sub.add_parser("train", help="train a model; writes model.npz and log.jsonl under --out",
                       formatter_class=argparse.RawDescriptionHelpFormatter,
                       epilog="config keys and defaults (kg; gcn and toy-transformer override some):\n"
                              + cfgmod.field_help())
    t.add_argument("model", choices=cfgmod.MODEL_KINDS)
    t.add_argument("--config", help="JSON file of config keys")
    t.add_argument("--data")
    t.add_argument("--out")
    t.add_argument("--precision", choices=cfgmod.PRECISIONS)
    t.add_argument("--seed", type=int)
    t.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate a checkpoint; prints one JSON metrics object")
    e.add_argument("model", nargs="?", choices=cfgmod.MODEL_KINDS)
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--data")
    e.add_argument("--split", choices=ds.SPLITS, default="test")
    e.set_defaults(func=cmd_eval)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s",
                        force=True)
    if getattr(args, "kind", None) is not None and args.command == "gen" and args.branching is None:
        args.branching = 3 if args.kind == "tree-kg" else 2
    try:
        return args.func(args)
    except (UsageError, cfgmod.ConfigError, ds.DataError) as exc:
        logger.error("%s", exc)
        return EXIT_USAGE
    except NumericalAbort as exc:
        logger.error("numerical abort: %s", exc)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
