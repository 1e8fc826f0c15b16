"""Pure numpy versions of the compiled kernels."""

import numpy as np


def pairwise_inner(X, Y):
    """Lorentzian inner product of every row of ``X`` with every row of ``Y``."""
    if X.shape[1] != Y.shape[1]:
        raise ValueError(f"pairwise_inner: width mismatch {X.shape[1]} vs {Y.shape[1]}")
    Yg = Y.copy()
    Yg[:, 0] = -Yg[:, 0]
    return X @ Yg.T


def filtered_ranks(scores, targets, indptr, indices):
    nq, ne = scores.shape
    if np.any((targets < 0) | (targets >= ne)):
        raise IndexError(f"filtered_ranks: target out of range [0, {ne})")
    rows = np.arange(nq)
    st = scores[rows, targets][:, None]
    keep = np.ones(scores.shape, dtype=bool)
    counts = np.diff(indptr)
    qrow = np.repeat(rows, counts)
    keep[qrow, indices] = False
    keep[rows, targets] = True
    greater = np.sum((scores > st) & keep, axis=1)
    ties = np.sum((scores == st) & keep, axis=1)
    return greater + 1 + (ties - 1) / 2.0


def clip_row_norms(S, max_norm):
    norms = np.linalg.norm(S, axis=1)
    over = norms > max_norm
    S[over] *= (max_norm / norms[over])[:, None]
    return S
