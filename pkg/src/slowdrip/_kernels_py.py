"""Pure numpy implementations of the compiled kernels."""

import numpy as np


def _xlogx(x):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(x > 0.0, x * np.log(x), 0.0)


def pairwise_js(P):
    P = np.ascontiguousarray(P, dtype=np.float64)
    n = P.shape[0]
    out = np.zeros((n, n))
    h = _xlogx(P).sum(axis=1)
    for i in range(n - 1):
        M = 0.5 * (P[i] + P[i + 1:])
        acc = (0.5 * (h[i] + h[i + 1:]) - _xlogx(M).sum(axis=1)) / np.log(2.0)
        d = np.minimum(np.sqrt(np.maximum(acc, 0.0)), 1.0)
        out[i, i + 1:] = d
        out[i + 1:, i] = d
    return out


def mutual_reachability_mst(D, core):
    D = np.ascontiguousarray(D, dtype=np.float64)
    core = np.ascontiguousarray(core, dtype=np.float64)
    n = D.shape[0]
    edges = np.zeros((max(n - 1, 0), 3))
    if n < 2:
        return edges
    in_tree = np.zeros(n, dtype=bool)
    dist = np.full(n, np.inf)
    src = np.zeros(n, dtype=np.intp)
    u = 0
    in_tree[0] = True
    for step in range(n - 1):
        w = np.maximum(np.maximum(D[u], core[u]), core)
        better = (~in_tree) & (w < dist)
        dist[better] = w[better]
        src[better] = u
        cand = np.where(in_tree, np.inf, dist)
        v = int(np.argmin(cand))
        edges[step] = (src[v], v, dist[v])
        in_tree[v] = True
        u = v
    return edges
