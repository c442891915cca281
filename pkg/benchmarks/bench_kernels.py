"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py --sizes 100 300 1000 --repeat 3
"""

import argparse
import time

import numpy as np

from slowdrip import _kernels_py

try:
    from slowdrip import _kernels
except ImportError:
    _kernels = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def inputs(n, seed):
    rng = np.random.default_rng(seed)
    P = np.ascontiguousarray(rng.dirichlet(np.full(36, 0.5), size=n))
    X = rng.random((n, 20))
    D = np.ascontiguousarray(np.sqrt(((X[:, None, :] - X[None, :, :]) ** 2).sum(-1)))
    core = np.ascontiguousarray(np.sort(D, axis=1)[:, min(9, n - 1)])
    return P, D, core


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[100, 300, 1000])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    if _kernels is None:
        print("compiled extension not built; run `pip install -e . --no-build-isolation` first")
    print(f"{'kernel':<26}{'n':>6}{'numpy s':>12}{'cython s':>12}{'speedup':>10}")
    for n in args.sizes:
        P, D, core = inputs(n, args.seed)
        for name, call in [
            ("pairwise_js", lambda m: m.pairwise_js(P)),
            ("mutual_reachability_mst", lambda m: m.mutual_reachability_mst(D, core)),
        ]:
            t_py, out_py = best_of(lambda: call(_kernels_py), args.repeat)
            if _kernels is None:
                print(f"{name:<26}{n:>6}{t_py:>12.4f}{'-':>12}{'-':>10}")
                continue
            t_cy, out_cy = best_of(lambda: call(_kernels), args.repeat)
            if name == "pairwise_js":
                assert np.allclose(out_py, out_cy, atol=1e-12)
            else:
                assert np.isclose(np.asarray(out_py)[:, 2].sum(), np.asarray(out_cy)[:, 2].sum())
            print(f"{name:<26}{n:>6}{t_py:>12.4f}{t_cy:>12.4f}{t_py / t_cy:>9.1f}x")


if __name__ == "__main__":
    main()
