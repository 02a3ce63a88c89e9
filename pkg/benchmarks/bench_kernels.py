#!/usr/bin/env python3
"""Benchmark the iteration backends on the affine inclusion hot loop.

Compares the compiled extension (when built) against the NumPy fallback
and the generic object-level loop on identical runs, reporting wall time
per million iterations and the speedup over the object loop.

    python benchmarks/bench_kernels.py [--dim 20] [--budget 100000] \
        [--repeat 3] [--noise]
"""

import argparse
import time

from opsplit import kernels
from opsplit.problems import make_affine_inclusion
from opsplit.schedules import SQRT2, StepSchedule
from opsplit.solvers import run

GAUSS = {"noise": "gaussian", "variance": {"kind": "power", "c": 1.0, "p": 2.0}}


def time_variant(label, fn, repeat):
    best = min(_timed(fn) for _ in range(repeat))
    return label, best


def _timed(fn):
    t0 = time.perf_counter()
    fn()
    return time.perf_counter() - t0


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dim", type=int, default=20)
    ap.add_argument("--budget", type=int, default=100_000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--noise", action="store_true",
                    help="benchmark the Gaussian-noise path instead of exact")
    args = ap.parse_args()

    prob = make_affine_inclusion(args.dim, 1.0, 2.0, seed=0)
    sched = StepSchedule("constant", gamma=0.5 * (SQRT2 - 1) / prob.mu)
    noise = GAUSS if args.noise else None

    variants = []
    for name in kernels.available_backends():
        variants.append((f"kernel[{name}]", lambda b=name: run(
            prob, "srfb", sched, args.budget, noise=noise, backend=b)))
    variants.append(("object loop", lambda: run(
        prob, "srfb", sched, args.budget, noise=noise, keep_iterates=True)))

    print(f"dim={args.dim} budget={args.budget} "
          f"noise={'gaussian' if args.noise else 'exact'} "
          f"(best of {args.repeat})")
    results = [time_variant(label, fn, args.repeat) for label, fn in variants]
    baseline = dict(results).get("object loop")
    for label, seconds in results:
        per_m = seconds / args.budget * 1e6
        speedup = f"{baseline / seconds:6.1f}x" if baseline else "      "
        print(f"  {label:<16} {seconds:8.3f} s   {per_m:8.3f} s/Miter   {speedup}")


if __name__ == "__main__":
    main()
