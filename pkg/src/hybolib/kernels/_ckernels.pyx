# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops. Signatures mirror ``_pykernels`` exactly."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()

ctypedef fused real:
    float
    double


def pairwise_inner(real[:, ::1] X, real[:, ::1] Y):
    cdef Py_ssize_t p = X.shape[0], q = Y.shape[0], d = X.shape[1]
    if Y.shape[1] != d:
        raise ValueError(f"pairwise_inner: width mismatch {X.shape[1]} vs {Y.shape[1]}")
    dtype = np.float32 if real is float else np.float64
    out_arr = np.empty((p, q), dtype=dtype)
    cdef real[:, ::1] out = out_arr
    cdef Py_ssize_t i, j, k
    cdef double acc
    with nogil:
        for i in range(p):
            for j in range(q):
                acc = -(<double>X[i, 0]) * Y[j, 0]
                for k in range(1, d):
                    acc += (<double>X[i, k]) * Y[j, k]
                out[i, j] = <real>acc
    return out_arr


def filtered_ranks(real[:, ::1] scores, const long long[::1] targets,
                   const long long[::1] indptr, const long long[::1] indices):
    cdef Py_ssize_t nq = scores.shape[0], ne = scores.shape[1]
    out_arr = np.empty(nq, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, j, e, t
    cdef double st, s
    cdef long long greater, ties
    for i in range(nq):
        t = targets[i]
        if t < 0 or t >= ne:
            raise IndexError(f"filtered_ranks: target {t} out of range [0, {ne})")
    with nogil:
        for i in range(nq):
            t = targets[i]
            st = scores[i, t]
            greater = 0
            ties = 0
            for e in range(ne):
                s = scores[i, e]
                if s > st:
                    greater += 1
                elif s == st:
                    ties += 1
            for j in range(indptr[i], indptr[i + 1]):
                e = indices[j]
                if e == t:
                    continue
                s = scores[i, e]
                if s > st:
                    greater -= 1
                elif s == st:
                    ties -= 1
            # ties counts the target itself
            out[i] = greater + 1 + (ties - 1) / 2.0
    return out_arr


def clip_row_norms(real[:, ::1] S, double max_norm):
    cdef Py_ssize_t n = S.shape[0], d = S.shape[1], i, k
    cdef double acc, scale
    with nogil:
        for i in range(n):
            acc = 0.0
            for k in range(d):
                acc += (<double>S[i, k]) * S[i, k]
            acc = sqrt(acc)
            if acc > max_norm:
                scale = max_norm / acc
                for k in range(d):
                    S[i, k] = <real>(S[i, k] * scale)
