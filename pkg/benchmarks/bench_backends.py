#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure NumPy fallback.

Covers the raw kernels (gate application, marginals, collapse) and two
protocol-level workloads (an ideal session and an intercept-resend
detection run). Run from an environment where qsdcsim is installed:

    python benchmarks/bench_backends.py [--trials N]
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from qsdcsim import backend
from qsdcsim.adversary import Ideal, InterceptResend, detection_probability
from qsdcsim.codec import QUBIT3
from qsdcsim.protocol import ProtocolConfig, run_session
from qsdcsim.states import ShiftPhaseGate, gate_matrix


def time_call(fn, repeats: int = 3) -> float:
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def bench_kernels(impl, loops: int = 20000) -> dict[str, float]:
    rng = np.random.default_rng(1)
    amps = rng.normal(size=8) + 1j * rng.normal(size=8)
    amps /= np.linalg.norm(amps)
    amps.setflags(write=False)
    mat = gate_matrix(ShiftPhaseGate(1, 1), 2)

    def gates():
        for _ in range(loops):
            impl.apply_single(amps, mat, 2)

    def probs():
        for _ in range(loops):
            impl.particle_probs(amps, 2, 2)

    def collapse():
        for _ in range(loops):
            impl.project_digit(amps, 2, 2, 1)

    return {
        "apply_single (8-dim)": time_call(gates) / loops * 1e6,
        "particle_probs (8-dim)": time_call(probs) / loops * 1e6,
        "project_digit (8-dim)": time_call(collapse) / loops * 1e6,
    }


def bench_protocol(trials: int) -> dict[str, float]:
    payload = tuple(QUBIT3.message_of_index(k % 8) for k in range(40))
    cfg = ProtocolConfig(
        batch_size=64,
        scheme=QUBIT3,
        check_fraction=0.1,
        check_method=1,
        abort_threshold=0.0,
        payload=payload,
        seed=7,
    )

    def sessions():
        for k in range(10):
            run_session(cfg, Ideal())

    def detection():
        rng = np.random.default_rng(2)
        detection_probability(InterceptResend("zx"), 1, trials, rng)

    return {
        "ideal session (N=64) x10": time_call(sessions, repeats=2) * 1e3,
        f"detection run ({trials} checks)": time_call(detection, repeats=2) * 1e3,
    }


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--trials", type=int, default=20000,
                        help="checked positions per detection run (default 20000)")
    args = parser.parse_args()

    if not backend.compiled_available():
        print("compiled kernels are not built; only the python backend is measured")
        names = ["python"]
    else:
        names = ["python", "cython"]

    results: dict[str, dict[str, float]] = {}
    for name in names:
        backend.use(name)
        rows = bench_kernels(backend.impl)
        rows.update(bench_protocol(args.trials))
        results[name] = rows
    backend.use("auto")

    labels = list(next(iter(results.values())))
    width = max(len(label) for label in labels) + 2
    header = f"{'workload':<{width}}" + "".join(f"{n:>14}" for n in names)
    if len(names) == 2:
        header += f"{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for label in labels:
        unit = "us" if "dim" in label else "ms"
        line = f"{label:<{width}}"
        for name in names:
            line += f"{results[name][label]:>12.2f}{unit}"
        if len(names) == 2:
            line += f"{results['python'][label] / results['cython'][label]:>9.1f}x"
        print(line)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
