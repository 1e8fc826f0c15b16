"""Compare the compiled and numpy kernels, then put them in context.

    python benchmarks/bench_kernels.py [--repeat 20]

The end-to-end section runs one toy KG training (with and without the compiled
backend, in subprocesses) so the kernel share of a real run is visible.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from hybolib import kernels

E2E = """
import time
from hybolib import datasets as ds, kernels
from hybolib.training import TrainConfig, train_kg
store = ds.gen_tree_kg(3, 3, seed=0)
t0 = time.perf_counter()
train_kg(TrainConfig(epochs=100, eval_every=10), store)
print(kernels.BACKEND, time.perf_counter() - t0)
"""


def bench(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def cases(rng):
    n_ent, n_q, d = 2000, 256, 33
    X, Y = rng.standard_normal((n_q, d)), rng.standard_normal((n_ent, d))
    scores = rng.standard_normal((n_q, n_ent))
    targets = rng.integers(0, n_ent, n_q).astype(np.int64)
    counts = rng.integers(0, 50, n_q)
    indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    indices = rng.integers(0, n_ent, indptr[-1]).astype(np.int64)
    S = 3 * rng.standard_normal((n_ent, d - 1))
    return {
        "pairwise_inner 256x2000x33": lambda m: m.pairwise_inner(X, Y),
        "filtered_ranks 256x2000": lambda m: m.filtered_ranks(scores, targets, indptr, indices),
        "clip_row_norms 2000x32": lambda m: m.clip_row_norms(S.copy(), 1.5),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--skip-e2e", action="store_true")
    args = ap.parse_args(argv)

    impls = kernels.implementations()
    print(f"backends: {', '.join(sorted(impls))}")
    for name, fn in cases(np.random.default_rng(0)).items():
        times = {b: bench(lambda: fn(m), args.repeat) for b, m in impls.items()}
        line = "  ".join(f"{b} {1e3 * t:8.3f} ms" for b, t in sorted(times.items()))
        if len(times) == 2:
            line += f"  speedup x{times['python'] / times['cython']:.1f}"
        print(f"{name:28s} {line}")

    if args.skip_e2e:
        return
    print("toy KG, 100 epochs:")
    for pure in ("", "1"):
        env = {**os.environ, "HYBOLIB_PURE_PYTHON": pure}
        out = subprocess.run([sys.executable, "-c", E2E], env=env, capture_output=True, text=True, check=True)
        backend, seconds = out.stdout.split()
        print(f"  {backend:8s} {float(seconds):6.2f} s")


if __name__ == "__main__":
    main()
