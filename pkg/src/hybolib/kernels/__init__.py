"""Hot loops for evaluation and parameter projection.

The Cython build (``_ckernels``) is used when importable; otherwise the numpy
versions in ``_pykernels`` are used. Set ``HYBOLIB_PURE_PYTHON=1`` to force the
fallback. ``BACKEND`` names the active implementation. ``pairwise_inner``
always goes through numpy: a BLAS matrix product beats the compiled loop.

pairwise_inner(X, Y)
    (P, d) x (Q, d) -> (P, Q) Lorentzian inner products.
filtered_ranks(scores, targets, indptr, indices)
    1-based rank of ``scores[i, targets[i]]`` within row ``i`` after removing
    the columns ``indices[indptr[i]:indptr[i+1]]`` (the target itself is never
    removed). Ties get the mean rank of the tied block.
clip_row_norms(S, max_norm)
    Rescale, in place, every row of ``S`` whose Euclidean norm exceeds
    ``max_norm`` down to exactly ``max_norm``.
"""

import logging
import os

import numpy as np

from . import _pykernels

logger = logging.getLogger(__name__)

_impl = _pykernels
BACKEND = "python"
if not os.environ.get("HYBOLIB_PURE_PYTHON"):
    try:
        from . import _ckernels as _impl  # noqa: F811
        BACKEND = "cython"
    except ImportError:
        logger.debug("compiled kernels unavailable, using numpy fallback")


def _as_real(a):
    a = np.ascontiguousarray(a)
    if a.dtype not in (np.float32, np.float64):
        a = a.astype(np.float64)
    return a


def pairwise_inner(X, Y):
    X = _as_real(X)
    Y = np.ascontiguousarray(Y, dtype=X.dtype)
    return _pykernels.pairwise_inner(X, Y)


def filtered_ranks(scores, targets, indptr=None, indices=None):
    scores = _as_real(scores)
    targets = np.ascontiguousarray(targets, dtype=np.int64)
    if indptr is None:
        indptr = np.zeros(len(targets) + 1, dtype=np.int64)
        indices = np.zeros(0, dtype=np.int64)
    indptr = np.ascontiguousarray(indptr, dtype=np.int64)
    indices = np.ascontiguousarray(indices, dtype=np.int64)
    return _impl.filtered_ranks(scores, targets, indptr, indices)


def clip_row_norms(S, max_norm):
    if not (S.flags.c_contiguous and S.dtype in (np.float32, np.float64)):
        raise TypeError("clip_row_norms works in place on a C-contiguous float array")
    _impl.clip_row_norms(S, float(max_norm))
    return S


def implementations():
    """Both backends keyed by name (the compiled one only if built)."""
    impls = {"python": _pykernels}
    try:
        from . import _ckernels
        impls["cython"] = _ckernels
    except ImportError:
        pass
    return impls
