"""Compare the compiled and pure-Python simulation kernels.

Usage: python3 benchmarks/bench_kernel.py [--events N] [--repeat R]

Both kernels consume the same random streams, so besides the timings the
script checks that their statistics are bit-identical.
"""

import argparse
import time

import numpy as np

from prioqn.model import NetworkSpec
from prioqn.sim import KERNELS, SimConfig, simulate_replication
from prioqn.specfile import parse_spec

NETWORKS = ["mm1", "symmetric2class", "example1_row3", "table2_row3", "neti_3x2", "netii_c23"]


def best_time(cfg, kernel, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        stats = simulate_replication(cfg, 0, kernel=kernel)
        times.append(time.perf_counter() - t0)
    return min(times), stats


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--events", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if "cython" not in KERNELS:
        raise SystemExit("compiled kernel not built; reinstall with Cython available")

    print(f"{'network':<18}{'K':>4}{'python s':>11}{'cython s':>11}{'speedup':>9}  identical")
    for name in NETWORKS:
        spec: NetworkSpec = parse_spec(name)
        cfg = SimConfig(spec, events=args.events, seed=1)
        tp, sp_ = best_time(cfg, "python", args.repeat)
        tc, sc = best_time(cfg, "cython", args.repeat)
        same = all(np.array_equal(sp_.as_dict()[k], sc.as_dict()[k]) for k in sp_.as_dict())
        print(f"{name:<18}{spec.num_classes:>4}{tp:>11.3f}{tc:>11.4f}{tp / tc:>8.1f}x  {'yes' if same else 'NO'}")


if __name__ == "__main__":
    main()
