"""Compare the compiled kernels with the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]

Prints median wall time per call for each backend, the speedup, and
whether both backends returned identical results.
"""
import argparse
import statistics
import time

import numpy as np

from denserec import kernels


def _time(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def bench_scatter(n_rows, n_idx, d, repeat, rng):
    idx = rng.integers(0, n_rows, size=n_idx)
    rows = rng.standard_normal((n_idx, d)).astype(np.float32)
    outs = {}

    def run(backend):
        out = np.zeros((n_rows, d), dtype=np.float32)
        kernels.scatter_add_rows(out, idx, rows, backend=backend)
        outs[backend] = out

    return {b: _time(lambda b=b: run(b), repeat) for b in ("cython", "python")}, np.array_equal(outs["cython"], outs["python"])


def bench_topk(n_queries, n_items, k, repeat, rng):
    scores = rng.standard_normal((n_queries, n_items)).astype(np.float32)
    scores[:, 1] = scores[:, 0]  # exercise the tie rule
    outs = {}

    def run(backend):
        outs[backend] = kernels.topk_rows(scores, k, backend=backend)

    return {b: _time(lambda b=b: run(b), repeat) for b in ("cython", "python")}, np.array_equal(outs["cython"], outs["python"])


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=7)
    args = parser.parse_args()
    if kernels.BACKEND != "cython":
        print("compiled kernels are not built; only the fallback is available")
        return 1
    rng = np.random.default_rng(0)
    cases = [
        ("scatter_add_rows 151x32, 7.7k idx", lambda: bench_scatter(151, 512 * 15, 32, args.repeat, rng)),
        ("scatter_add_rows 151x32, 33k idx", lambda: bench_scatter(151, 512 * 65, 32, args.repeat, rng)),
        ("scatter_add_rows 50k x64, 100k idx", lambda: bench_scatter(50_000, 100_000, 64, args.repeat, rng)),
        ("topk_rows 256 x 200, k=100", lambda: bench_topk(256, 200, 100, args.repeat, rng)),
        ("topk_rows 256 x 10k, k=100", lambda: bench_topk(256, 10_000, 100, args.repeat, rng)),
        ("topk_rows 64 x 100k, k=100", lambda: bench_topk(64, 100_000, 100, args.repeat, rng)),
    ]
    print(f"{'case':40s} {'cython ms':>10s} {'numpy ms':>10s} {'speedup':>8s}  same")
    for name, fn in cases:
        times, same = fn()
        c, p = times["cython"] * 1e3, times["python"] * 1e3
        print(f"{name:40s} {c:10.3f} {p:10.3f} {p / c:7.1f}x  {same}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
