# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops. Mirrors slowdrip._kernels_py exactly."""

import numpy as np
cimport numpy as cnp
from libc.math cimport log, sqrt, INFINITY

cnp.import_array()

cdef double INV_LN2 = 1.4426950408889634


def pairwise_js(const double[:, ::1] P):
    """Symmetric matrix of base-2 Jensen-Shannon distances between rows of P.

    Uses JS = (H(p) + H(q)) / 2 - sum m ln m with the per-row terms
    precomputed, so each pair costs one logarithm per symbol.
    """
    cdef Py_ssize_t n = P.shape[0], k = P.shape[1]
    cdef Py_ssize_t i, j, c
    cdef double acc, m, d, x
    out_arr = np.zeros((n, n), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    h_arr = np.zeros(n, dtype=np.float64)
    cdef double[::1] h = h_arr
    for i in range(n):
        acc = 0.0
        for c in range(k):
            x = P[i, c]
            if x > 0.0:
                acc += x * log(x)
        h[i] = acc
    for i in range(n):
        for j in range(i + 1, n):
            acc = 0.5 * (h[i] + h[j])
            for c in range(k):
                m = 0.5 * (P[i, c] + P[j, c])
                if m > 0.0:
                    acc -= m * log(m)
            acc *= INV_LN2
            if acc < 0.0:
                acc = 0.0
            d = sqrt(acc)
            if d > 1.0:
                d = 1.0
            out[i, j] = d
            out[j, i] = d
    return out_arr


def mutual_reachability_mst(const double[:, ::1] D, const double[::1] core):
    """Prim's MST over the mutual-reachability graph max(core_i, core_j, D_ij).

    Returns an (n-1, 3) array of (from, to, weight) in insertion order.
    Ties pick the lowest vertex index.
    """
    cdef Py_ssize_t n = D.shape[0]
    cdef Py_ssize_t step, v, u, best_v
    cdef double w, best_w
    edges_arr = np.zeros((max(n - 1, 0), 3), dtype=np.float64)
    cdef double[:, ::1] edges = edges_arr
    if n < 2:
        return edges_arr
    in_tree_arr = np.zeros(n, dtype=np.uint8)
    dist_arr = np.full(n, INFINITY, dtype=np.float64)
    src_arr = np.zeros(n, dtype=np.intp)
    cdef unsigned char[::1] in_tree = in_tree_arr
    cdef double[::1] dist = dist_arr
    cdef Py_ssize_t[::1] src = src_arr
    u = 0
    in_tree[0] = 1
    for step in range(n - 1):
        best_v = -1
        best_w = INFINITY
        for v in range(n):
            if in_tree[v]:
                continue
            w = D[u, v]
            if core[u] > w:
                w = core[u]
            if core[v] > w:
                w = core[v]
            if w < dist[v]:
                dist[v] = w
                src[v] = u
            if dist[v] < best_w or best_v < 0:
                best_w = dist[v]
                best_v = v
        edges[step, 0] = src[best_v]
        edges[step, 1] = best_v
        edges[step, 2] = best_w
        in_tree[best_v] = 1
        u = best_v
    return edges_arr
