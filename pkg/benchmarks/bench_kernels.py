"""Compiled vs pure-Python kernel throughput.

    python benchmarks/bench_kernels.py [--t-end 2000] [--repeat 3]

Both backends consume the same random stream, so each pair of runs makes the
same jumps; the script checks that before reporting the speedup.
"""

import argparse
import time

import numpy as np

from noisebound import kernels
from noisebound.simulation import simulate, simulate_split_coupling
from noisebound.suites import builtin_network


def best_time(fn, repeat):
    best, result = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        result = fn()
        best = min(best, time.perf_counter() - t0)
    return best, result


def bench(label, make, repeat):
    rows = {}
    for backend in ("python", "cython"):
        rows[backend] = best_time(lambda b=backend: make(b), repeat)
    (tp, rp), (tc, rc) = rows["python"], rows["cython"]
    assert rp.n_jumps == rc.n_jumps and np.array_equal(rp.times, rc.times), "backends diverged"
    jumps = rp.n_jumps
    print(f"{label:<28} {jumps:>9} jumps  python {jumps / tp:>11.0f}/s  cython {jumps / tc:>12.0f}/s  x{tp / tc:.0f}")


def main():
    p = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    p.add_argument("--t-end", type=float, default=2000.0)
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args()
    if not kernels.compiled_available():
        raise SystemExit("compiled extension not built; run `pip install -e . --no-build-isolation`")
    for name in ("mutual_repression", "balanced_triad", "repressilator"):
        net = builtin_network(name)
        bench(f"ssa {name}", lambda b: simulate(net, t_end=args.t_end, seed=1, backend=b, record=False), args.repeat)
    net = builtin_network("balanced_triad")
    bench(
        "coupling balanced_triad",
        lambda b: simulate_split_coupling(net, (1, -1, -1), (0, 5, 5), (5, 0, 0), args.t_end, seed=1, backend=b),
        args.repeat,
    )


if __name__ == "__main__":
    main()
