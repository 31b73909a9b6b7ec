"""Benchmark the pure-Python trial loop against the compiled kernel.

Run from the repository root::

    python3 benchmarks/bench_backends.py [--trials 20] [--seed 0]

Three workloads, smallest to largest:

* ``curl weights``   one plane-fit weight computation on a 7x9 dot grid
                     (vectorized numpy vs the scalar C kernel)
* ``single trial``   one noisy tactile placement of the beaker
* ``catalog batch``  every object x both modes, ``--trials`` trials per cell

The two backends execute the same formulas in the same order, so their
outputs are bitwise identical (see tests/test_backends_agree.py); the only
difference this script should surface is wall time.
"""

import argparse
import time

import numpy as np

from gelplace import _pyloop
from gelplace.backend import HAVE_COMPILED
from gelplace.catalog import builtin_catalog
from gelplace.controller import ControllerConfig, run_placement
from gelplace.harness import run_batch, table2_scenarios
from gelplace.tactile import make_grid


def best_of(fn, repeat=5):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench_curl(results):
    grid = make_grid(7, 9)
    rng = np.random.default_rng(0)
    valid = rng.random(grid.n_dots) >= 0.05
    xy = grid.xy

    def py(n=200):
        for _ in range(n):
            _pyloop.curl_weight_vectors(xy[:, 0], xy[:, 1], valid, 8)

    row = {"python": best_of(py) / 200}
    if HAVE_COMPILED:
        from gelplace import _speedups

        def compiled(n=200):
            for _ in range(n):
                _speedups.curl_weight_vectors(xy, valid, 8)

        row["compiled"] = best_of(compiled) / 200
    results["curl weights (7x9 grid)"] = row


def bench_single_trial(results):
    spec = builtin_catalog()["beaker"]
    cfg = ControllerConfig()

    def trial(backend):
        run_placement(spec, cfg, "tactile", 9.0, -7.0,
                      np.random.default_rng(7), backend=backend)

    row = {"python": best_of(lambda: trial("python"))}
    if HAVE_COMPILED:
        row["compiled"] = best_of(lambda: trial("compiled"))
    results["single noisy trial (beaker)"] = row


def bench_batch(results, trials, seed):
    scenarios = table2_scenarios(n_trials=trials)

    def batch(backend):
        run_batch(scenarios, seed=seed, backend=backend)

    row = {"python": best_of(lambda: batch("python"), repeat=1)}
    if HAVE_COMPILED:
        row["compiled"] = best_of(lambda: batch("compiled"), repeat=2)
    results[f"catalog batch ({len(scenarios)} cells x {trials})"] = row


def fmt_seconds(s):
    if s < 1e-3:
        return f"{s * 1e6:8.1f} us"
    if s < 1.0:
        return f"{s * 1e3:8.2f} ms"
    return f"{s:8.2f} s "


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--trials", type=int, default=3,
                        help="trials per catalog cell (default %(default)s)")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    if not HAVE_COMPILED:
        print("compiled kernel not importable: timing the python loop only\n")

    results = {}
    bench_curl(results)
    bench_single_trial(results)
    bench_batch(results, args.trials, args.seed)

    name_w = max(len(n) for n in results)
    print(f"{'workload'.ljust(name_w)}  {'python':>11}  {'compiled':>11}  {'speedup':>8}")
    print(f"{'-' * name_w}  {'-' * 11}  {'-' * 11}  {'-' * 8}")
    for name, row in results.items():
        py = fmt_seconds(row["python"])
        if "compiled" in row:
            comp = fmt_seconds(row["compiled"])
            speed = f"{row['python'] / row['compiled']:7.1f}x"
        else:
            comp, speed = "-".rjust(11), "-".rjust(8)
        print(f"{name.ljust(name_w)}  {py}  {comp}  {speed}")


if __name__ == "__main__":
    main()
