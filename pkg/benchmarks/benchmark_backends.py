#!/usr/bin/env python3
"""Time the coordinate-descent kernels on both backends.

The backend is chosen at import time from MNIR_BACKEND, so each timing runs
in a fresh subprocess.  The numba timing excludes JIT compilation by fitting
once before the clock starts.

Usage: python benchmarks/benchmark_backends.py [--repeats N]
"""

import argparse
import json
import os
import subprocess
import sys

_WORKER = r"""
import json, os, sys, time
import numpy as np
from scipy import sparse
from mnir.corpus import SparseCounts
from mnir.model import FactorMatrix, PriorSpec
from mnir.api import mnir_fit
from mnir.solver import SolverConfig
from mnir._kernels import BACKEND

def synthetic(n, p, seed=0):
    rng = np.random.default_rng(seed)
    v = rng.integers(1, 6, n).astype(float)
    phi = np.where(rng.random(p) < 0.2, rng.normal(0, 0.5, p), 0.0)
    alpha = rng.normal(0, 1, p)
    eta = alpha + np.outer(v, phi)
    q = np.exp(eta - eta.max(1, keepdims=True))
    q /= q.sum(1, keepdims=True)
    m = rng.integers(30, 120, n)
    x = np.vstack([rng.multinomial(m[i], q[i]) for i in range(n)])
    return SparseCounts(sparse.csr_matrix(x.astype(float))), FactorMatrix(v)

def run_case(name, counts, factors, prior, repeats):
    mnir_fit(counts, factors, prior)  # warm-up (JIT compile on numba)
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fit = mnir_fit(counts, factors, prior)
        times.append(time.perf_counter() - t0)
    return {"case": name, "backend": BACKEND, "best_s": min(times),
            "mean_s": sum(times) / len(times), "sweeps": fit.sweeps}

repeats = int(sys.argv[1])
results = []
counts, factors = synthetic(400, 600)
results.append(run_case("synthetic 400x600", counts, factors,
                        PriorSpec(s=1.0, r=0.5), repeats))
try:
    from mnir.datasets import load_we8there
    counts, vocab, ratings = load_we8there()
    factors = FactorMatrix(ratings["overall"], names=["overall"])
    results.append(run_case("we8there 6166x2640 (5 levels)", counts, factors,
                            PriorSpec(s=1.0, r=0.5), repeats))
except Exception as e:
    print(f"skipping bundled-data case: {e}", file=sys.stderr)
print(json.dumps(results))
"""


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()

    by_backend = {}
    for backend in ("numpy", "numba"):
        env = dict(os.environ, MNIR_BACKEND=backend)
        proc = subprocess.run(
            [sys.executable, "-c", _WORKER, str(args.repeats)],
            env=env, capture_output=True, text=True)
        if proc.returncode != 0:
            print(f"{backend}: failed\n{proc.stderr}", file=sys.stderr)
            continue
        by_backend[backend] = json.loads(proc.stdout.strip().splitlines()[-1])

    if not by_backend:
        return 1
    print(f"{'case':38} {'backend':8} {'best (s)':>10} {'mean (s)':>10} {'sweeps':>7}")
    for backend, rows in by_backend.items():
        for row in rows:
            print(f"{row['case']:38} {row['backend']:8} "
                  f"{row['best_s']:10.3f} {row['mean_s']:10.3f} {row['sweeps']:7d}")
    if len(by_backend) == 2:
        for a, b in zip(by_backend["numpy"], by_backend["numba"]):
            speedup = a["best_s"] / b["best_s"]
            print(f"{a['case']:38} numba speedup: {speedup:.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
