"""Benchmark the numba-jitted kernels against the pure-numpy fallbacks.

Both code paths implement the same contracts with different algorithms
(queue BFS vs. frontier matmul, sorted-merge intersection vs. bitset
popcount), so this doubles as a cross-check: every timed call also compares
results between backends.

Run from the repository root:

    python3 benchmarks/bench_backends.py
    python3 benchmarks/bench_backends.py --sizes 100 400 1600 --repeats 5
"""

import argparse
import time

import numpy as np

from condgraphgen import backend
from condgraphgen.evaluation import corpus_stats
from condgraphgen.graphs import Graph, synthesize_toy_corpus


def random_csr(n: int, mean_degree: float, rng: np.random.Generator):
    p = min(mean_degree / max(n - 1, 1), 1.0)
    rows, cols = np.triu_indices(n, k=1)
    keep = rng.random(rows.size) < p
    edges = list(zip(rows[keep].tolist(), cols[keep].tolist()))
    return backend.csr_from_edges(n, edges), edges


def time_call(fn, repeats: int) -> tuple[float, object]:
    best = float("inf")
    result = None
    for _ in range(repeats):
        start = time.perf_counter()
        result = fn()
        best = min(best, time.perf_counter() - start)
    return best, result


def bench_kernels(sizes, mean_degree, repeats, rng) -> list[dict]:
    rows = []
    for n in sizes:
        (indptr, indices), _ = random_csr(n, mean_degree, rng)
        members = np.flatnonzero(
            backend.components_labels(indptr, indices, n)
            == np.bincount(backend.components_labels(indptr, indices, n)).argmax()
        )
        seg_x = rng.standard_normal((4 * n, 32))
        seg_idx = rng.integers(0, n, size=4 * n)
        cases = {
            "components": lambda: backend.components_labels(indptr, indices, n),
            "path_pair_sum": lambda: backend.sp_pair_sum(indptr, indices, members),
            "triangles": lambda: backend.triangle_count(indptr, indices, n),
            "segment_sum": lambda: backend.segment_sum(seg_x, seg_idx, n),
        }
        for label, fn in cases.items():
            timings = {}
            results = {}
            for mode in ("numpy", "numba"):
                backend.use_backend(mode)
                if mode == "numba":
                    backend.warmup()
                timings[mode], results[mode] = time_call(fn, repeats)
            assert np.array_equal(
                np.asarray(results["numpy"]), np.asarray(results["numba"])
            ), f"backend mismatch on {label} (n={n})"
            rows.append(
                {
                    "kernel": label,
                    "n": n,
                    "numpy_s": timings["numpy"],
                    "numba_s": timings["numba"],
                }
            )
    return rows


def bench_corpus(repeats: int, rng) -> list[dict]:
    corpora = {
        "toy corpus (200 graphs)": synthesize_toy_corpus(200, seed=7),
        "sparse 400-node graphs (20)": [
            _random_graph(400, 4.0, rng) for _ in range(20)
        ],
    }
    rows = []
    for label, graphs in corpora.items():
        timings = {}
        for mode in ("numpy", "numba"):
            backend.use_backend(mode)
            if mode == "numba":
                backend.warmup()
            timings[mode], _ = time_call(lambda: corpus_stats(graphs), repeats)
        rows.append(
            {"kernel": label, "n": "-", "numpy_s": timings["numpy"], "numba_s": timings["numba"]}
        )
    return rows


def _random_graph(n: int, mean_degree: float, rng) -> Graph:
    _, edges = random_csr(n, mean_degree, rng)
    return Graph(n, frozenset(edges), tuple([0] * n), 0)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", type=int, nargs="+", default=[50, 200, 800])
    parser.add_argument("--mean-degree", type=float, default=4.0)
    parser.add_argument("--repeats", type=int, default=3)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    rows = bench_kernels(args.sizes, args.mean_degree, args.repeats, rng)
    rows += bench_corpus(args.repeats, rng)

    width = max(len(r["kernel"]) for r in rows) + 2
    print(f"{'kernel':{width}s}{'n':>6s}{'numpy':>12s}{'numba':>12s}{'speedup':>10s}")
    for r in rows:
        speed = r["numpy_s"] / r["numba_s"] if r["numba_s"] > 0 else float("inf")
        print(
            f"{r['kernel']:{width}s}{str(r['n']):>6s}"
            f"{r['numpy_s'] * 1e3:>10.2f}ms{r['numba_s'] * 1e3:>10.2f}ms{speed:>9.1f}x"
        )
    backend.use_backend("auto")


if __name__ == "__main__":
    main()
