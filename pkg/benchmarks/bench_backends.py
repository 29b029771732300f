"""Wall-clock comparison of the numba and numpy backends.

Each backend runs in its own interpreter (the backend is fixed at import).
Every workload is run once untimed so numba compilation is excluded, then
timed ``--repeats`` times; the best time is reported.

Usage::

    python3 benchmarks/bench_backends.py --iterations 5000 --json bench.json
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time

WORKLOADS = ("gaussian10", "banana", "relu10", "horseshoe10", "deepgp-eval")


def _workload(name: str, iterations: int):
    import numpy as np

    from agess import AdaptConfig, EllipticalFamily, run_agess
    from agess.targets import (banana_target, deep_gp_data, deep_gp_target, gaussian_target, horseshoe_data,
                               horseshoe_target, relu_data, relu_regression_target)

    t6 = EllipticalFamily.student_t(6.0)
    cfg = AdaptConfig(n_iter=iterations, n_burn=iterations // 4)

    def chain(target, P, mu0=None):
        mu0 = np.zeros(P) if mu0 is None else mu0
        return lambda: run_agess(target, None, t6, mu0, np.eye(P), cfg, np.random.default_rng(0))

    if name == "gaussian10":
        return chain(gaussian_target(np.zeros(10), np.diag(np.arange(1.0, 11))), 10)
    if name == "banana":
        return chain(banana_target(np.array([0.1]), 1.0, -1.0), 2, np.array([0.0, 0.5]))
    if name == "relu10":
        return chain(relu_regression_target(relu_data(1000, 10, np.random.default_rng(1))), 10)
    if name == "horseshoe10":
        return chain(horseshoe_target(horseshoe_data(50, 10, np.random.default_rng(2))), 22)
    if name == "deepgp-eval":
        d = deep_gp_data(50)
        t = deep_gp_target(d.X, d.y)
        th = np.concatenate([d.X[:, 0], np.zeros(3)])
        return lambda: [t(th) for _ in range(max(1, iterations // 10))]
    raise ValueError(name)


def child(args) -> None:
    import agess

    res = {"backend": agess.BACKEND, "results": {}}
    for name in args.workloads:
        fn = _workload(name, args.iterations)
        t0 = time.perf_counter()
        fn()  # warm-up: compilation for numba, imports for numpy
        warm = time.perf_counter() - t0
        best = float("inf")
        for _ in range(args.repeats):
            t0 = time.perf_counter()
            fn()
            best = min(best, time.perf_counter() - t0)
        res["results"][name] = {"first_call": warm, "best": best}
    print(json.dumps(res))


def parent(args) -> None:
    out = {}
    for backend in ("numba", "numpy"):
        env = {**os.environ, "AGESS_BACKEND": backend}
        cmd = [sys.executable, __file__, "--child", "--iterations", str(args.iterations), "--repeats",
               str(args.repeats), "--workloads", *args.workloads]
        r = subprocess.run(cmd, env=env, capture_output=True, text=True, check=True)
        out[backend] = json.loads(r.stdout.strip().splitlines()[-1])["results"]
    print(f"{'workload':<14}{'numba [s]':>12}{'numpy [s]':>12}{'speed-up':>10}{'numba 1st call':>16}")
    for name in args.workloads:
        a, b = out["numba"][name], out["numpy"][name]
        print(f"{name:<14}{a['best']:>12.4f}{b['best']:>12.4f}{b['best'] / a['best']:>10.1f}"
              f"{a['first_call']:>16.3f}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"iterations": args.iterations, "repeats": args.repeats, "timings": out}, fh, indent=2)


def main(argv=None) -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--iterations", type=int, default=5000, help="chain length per workload")
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--workloads", nargs="+", default=list(WORKLOADS), choices=WORKLOADS)
    p.add_argument("--json", help="also write raw timings here")
    p.add_argument("--child", action="store_true", help=argparse.SUPPRESS)
    args = p.parse_args(argv)
    child(args) if args.child else parent(args)


if __name__ == "__main__":
    main()
