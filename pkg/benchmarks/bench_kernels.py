"""Compare the compiled and pure-Python kernel backends.

    python benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import time

import numpy as np

from fedgroup import kernels
from fedgroup.grouping import complement
from fedgroup.simgraph import SimilarityGraph


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def workloads(seed=0):
    rng = np.random.default_rng(seed)
    n, m = 2_000_000, 10_000
    xs, ys = rng.uniform(0, 100, n), rng.uniform(0, 100, n)
    owner = rng.integers(0, m, n)
    graph_m = 2000
    iu = np.triu_indices(graph_m, 1)
    keep = rng.random(iu[0].size) < 0.3
    edges = [(int(i) + 1, int(j) + 1, 0.9) for i, j in zip(iu[0][keep], iu[1][keep])]
    indptr, indices = complement(SimilarityGraph.from_edges(graph_m, edges)).csr()
    caps = np.full(graph_m, graph_m, dtype=np.int64)
    return {
        "disc_counts (n=2M)": lambda impl: kernels.disc_counts(xs, ys, owner, 50, 50, 10, m, impl=impl),
        "grid_counts (n=2M, 16x16)": lambda impl: kernels.grid_counts(xs, ys, owner, (0, 0, 100, 100), 16, m,
                                                                      impl=impl),
        "greedy_color (m=2000)": lambda impl: kernels.greedy_color(indptr, indices, caps, impl=impl),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    backends = kernels.available_backends()
    print(f"active backend: {kernels.BACKEND}; available: {', '.join(backends)}")
    print(f"{'kernel':<28}" + "".join(f"{b:>12}" for b in backends) + "     speedup")
    for name, fn in workloads().items():
        t = {b: best_of(lambda: fn(b), args.repeat) for b in backends}
        speedup = f"{t['python'] / t['cython']:>10.1f}x" if "cython" in t else ""
        print(f"{name:<28}" + "".join(f"{t[b] * 1e3:>10.1f}ms" for b in backends) + speedup)


if __name__ == "__main__":
    main()
