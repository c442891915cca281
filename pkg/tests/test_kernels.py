import numpy as np
import pytest
from scipy.spatial.distance import jensenshannon

from slowdrip import _kernels_py, kernels

try:
    from slowdrip import _kernels as compiled
except ImportError:  # extension not built
    compiled = None

needs_ext = pytest.mark.skipif(compiled is None, reason="compiled extension not built")


def _dists(seed, n=40, k=66):
    rng = np.random.default_rng(seed)
    P = rng.random((n, k)) * (rng.random((n, k)) < 0.6)
    P[:, 0] += 1e-3
    return P / P.sum(axis=1, keepdims=True)


def test_backend_reported():
    assert kernels.BACKEND in ("cython", "python")


@pytest.mark.parametrize("seed", range(5))
def test_python_js_matches_scipy(seed):
    P = _dists(seed)
    D = _kernels_py.pairwise_js(P)
    for i in range(0, 40, 7):
        for j in range(0, 40, 5):
            assert D[i, j] == pytest.approx(jensenshannon(P[i], P[j], base=2), abs=1e-9)


@needs_ext
@pytest.mark.parametrize("seed", range(5))
def test_compiled_js_matches_python(seed):
    P = _dists(seed)
    np.testing.assert_allclose(compiled.pairwise_js(P), _kernels_py.pairwise_js(P), atol=1e-12, rtol=0)


@needs_ext
@pytest.mark.parametrize("seed", range(5))
def test_compiled_mst_matches_python(seed):
    rng = np.random.default_rng(seed)
    X = rng.random((60, 4))
    D = np.linalg.norm(X[:, None] - X[None], axis=2)
    core = np.ascontiguousarray(np.sort(D, axis=1)[:, 4])
    a = compiled.mutual_reachability_mst(D, core)
    b = _kernels_py.mutual_reachability_mst(D, core)
    np.testing.assert_allclose(a, b, atol=1e-12, rtol=0)


def test_mst_weight_is_minimal():
    from scipy.sparse.csgraph import minimum_spanning_tree

    rng = np.random.default_rng(9)
    X = rng.random((50, 3))
    D = np.linalg.norm(X[:, None] - X[None], axis=2)
    core = np.sort(D, axis=1)[:, 3]
    mr = np.maximum(D, np.maximum(core[:, None], core[None, :]))
    np.fill_diagonal(mr, 0)
    edges = kernels.mutual_reachability_mst(D, core)
    assert edges.shape == (49, 3)
    assert edges[:, 2].sum() == pytest.approx(minimum_spanning_tree(mr).sum())


def test_degenerate_sizes():
    assert kernels.mutual_reachability_mst(np.zeros((1, 1)), np.zeros(1)).shape == (0, 3)
    assert kernels.pairwise_js(np.ones((1, 2)) / 2).shape == (1, 1)
