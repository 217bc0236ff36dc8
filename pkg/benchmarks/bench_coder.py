"""Throughput comparison of the compiled and pure-Python range coder kernels.

Run: python3 benchmarks/bench_coder.py [--symbols N] [--alphabet K]
"""

import argparse
import time

import numpy as np

import mrcodec.coder as rc


def make_workload(rng, n, k):
    w = rng.random((n, k)) + 1e-6
    freqs = np.floor(w / w.sum(1, keepdims=True) * (rc.CDF_TOTAL - k)).astype(np.int64) + 1
    deficit = rc.CDF_TOTAL - freqs.sum(1)
    freqs[np.arange(n), rng.integers(0, k, n)] += deficit
    rows = np.zeros((n, k + 1), np.uint32)
    rows[:, 1:] = np.cumsum(freqs, axis=1)
    p = freqs / rc.CDF_TOTAL
    symbols = np.array([rng.choice(k, p=p[i]) for i in range(n)])
    return symbols, rows


def bench(backend, symbols, rows, repeats=3):
    best_enc = best_dec = float("inf")
    stream = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        stream = rc.rc_encode(symbols, rows, backend=backend)
        best_enc = min(best_enc, time.perf_counter() - t0)
        t0 = time.perf_counter()
        out = rc.rc_decode(stream, rows, backend=backend)
        best_dec = min(best_dec, time.perf_counter() - t0)
    assert np.array_equal(out, symbols)
    return best_enc, best_dec, len(stream.data)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--symbols", type=int, default=200_000)
    ap.add_argument("--alphabet", type=int, default=131)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    symbols, rows = make_workload(rng, args.symbols, args.alphabet)
    n = args.symbols

    print(f"workload: {n} symbols, alphabet {args.alphabet}, "
          f"active backend: {rc.backend()}")
    results = {}
    for backend in rc.available_backends():
        enc, dec, size = bench(backend, symbols, rows)
        results[backend] = (enc, dec)
        print(f"  [{backend:2s}] encode {n / enc / 1e6:7.2f} Msym/s   "
              f"decode {n / dec / 1e6:7.2f} Msym/s   ({size} bytes)")
    if len(results) == 2:
        c, py = results["c"], results["py"]
        print(f"  speedup: encode {py[0] / c[0]:.1f}x, decode {py[1] / c[1]:.1f}x")


if __name__ == "__main__":
    main()
