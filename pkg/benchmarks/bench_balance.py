#!/usr/bin/env python3
"""Benchmark the compiled balance kernel against its pure-python twin.

Both kernels share one splitmix64 stream and draw order, so besides timing
the run also verifies that every statistic matches between the two.

Usage: python benchmarks/bench_balance.py [--duration S] [--reps N]
"""

import argparse
import time

from allpath import _balance_py
from allpath.balance import HOLD_DCMIX, HOLD_EXP, TrafficMix

try:
    from allpath import _balance_core
except ImportError:
    _balance_core = None

CASES = [
    ("exp N=2 C=20 lam=30", [20, 20], 30.0, HOLD_EXP, (1.0, 0.0, 0.0, 0.0)),
    ("exp N=6 C=20 lam=100", [20] * 6, 100.0, HOLD_EXP, (1.0, 0.0, 0.0, 0.0)),
    ("dcmix N=6 C=20 rho=0.8", [20] * 6, None, HOLD_DCMIX, None),
]


def run(kernel, caps, lam, duration, reps, kind, params):
    t0 = time.perf_counter()
    out = []
    for rep in range(reps):
        out.append(kernel.run_replication(caps, lam, duration, duration * 0.1,
                                          1000 + rep, kind, *params))
    return time.perf_counter() - t0, out


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--duration", type=float, default=5.0)
    ap.add_argument("--reps", type=int, default=10)
    args = ap.parse_args()

    mix = TrafficMix()
    print("%-28s %12s %12s %9s" % ("case", "python [s]", "cython [s]", "speedup"))
    for name, caps, lam, kind, params in CASES:
        if kind == HOLD_DCMIX:
            _, p0, p1, p2, p3 = mix.kernel_params()
            params = (p0, p1, p2, p3)
            lam = 0.8 * sum(caps) / mix.mean_holding_s
        t_py, out_py = run(_balance_py, caps, lam, args.duration, args.reps,
                           kind, params)
        if _balance_core is None:
            print("%-28s %12.3f %12s %9s" % (name, t_py, "n/a", "n/a"))
            continue
        t_cy, out_cy = run(_balance_core, caps, lam, args.duration, args.reps,
                           kind, params)
        for a, b in zip(out_py, out_cy):
            busy_a, rest_a = a[0], a[1:]
            busy_b, rest_b = b[0], b[1:]
            assert rest_a == rest_b, (name, rest_a, rest_b)
            assert all(abs(x - y) <= 1e-9 * max(1.0, abs(x))
                       for x, y in zip(busy_a, busy_b)), name
        print("%-28s %12.3f %12.3f %8.1fx" % (name, t_py, t_cy, t_py / t_cy))
    if _balance_core is None:
        print("\ncompiled kernel not built; showing pure-python timings only")
    else:
        print("\nall replication statistics match between kernels")


if __name__ == "__main__":
    main()
