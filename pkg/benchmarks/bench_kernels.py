#!/usr/bin/env python3
"""Time the hot window kernels on the numba and pure-numpy backends.

Runs itself once per backend (the backend is chosen at import time via
BELLSIM_NUMBA), so both measurements use a fresh process.  JIT compilation
is excluded by a warmup call.

    python3 benchmarks/bench_kernels.py [--n 4000000]
"""

import argparse
import json
import os
import subprocess
import sys
import time


def measure(n: int) -> dict:
    import numpy as np

    from bellsim import kernels, models

    pair = models.chsh_pairs()[0]
    coin = models.coincidence_instance(4.0, 1.0)
    fin = models.random_product_model(np.random.default_rng(1), outcomes=(-1, 0, 1))
    idx = np.arange(n, dtype=np.uint64)

    results = {"backend": kernels.backend_name(), "n": n}
    for name, model in (("coincidence", coin), ("finite-product", fin)):
        model.sample_windows(pair, idx[:1000], 7)  # warmup / JIT
        t0 = time.perf_counter()
        model.sample_windows(pair, idx, 7)
        dt = time.perf_counter() - t0
        results[name] = {"seconds": dt, "windows_per_second": n / dt}
    return results


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--n", type=int, default=4_000_000)
    parser.add_argument("--emit-json", action="store_true", help=argparse.SUPPRESS)
    args = parser.parse_args()

    if args.emit_json:
        print(json.dumps(measure(args.n)))
        return

    rows = []
    for flag in ("1", "0"):
        env = dict(os.environ, BELLSIM_NUMBA=flag)
        out = subprocess.run(
            [sys.executable, __file__, "--n", str(args.n), "--emit-json"],
            check=True, capture_output=True, text=True, env=env,
        )
        rows.append(json.loads(out.stdout.strip().splitlines()[-1]))

    print(f"{args.n} windows per kernel")
    print(f"{'kernel':<16} {'backend':<8} {'seconds':>9} {'windows/s':>14}")
    for row in rows:
        for kernel in ("coincidence", "finite-product"):
            r = row[kernel]
            print(f"{kernel:<16} {row['backend']:<8} "
                  f"{r['seconds']:>9.3f} {r['windows_per_second']:>14,.0f}")
    numba_row, numpy_row = rows
    for kernel in ("coincidence", "finite-product"):
        speedup = numpy_row[kernel]["seconds"] / numba_row[kernel]["seconds"]
        print(f"{kernel}: numba is {speedup:.2f}x the numpy path")


if __name__ == "__main__":
    main()
