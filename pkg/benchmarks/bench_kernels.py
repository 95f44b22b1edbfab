"""Time the compiled and pure-Python integer kernels on the same inputs.

    python3 benchmarks/bench_kernels.py [--sizes 8 16 32] [--repeat 5] [--seed 0]
"""

import argparse
import random
import timeit

from towerkit import linalg
from towerkit.adams import mod_ring, pages, standard_adams_tower
from towerkit.complexes import Complex
from towerkit.modules import FGModule


def rand_mat(rng, n, entry=9):
    return linalg.Mat([[rng.randint(-entry, entry) for _ in range(n)] for _ in range(n)])


def workloads(sizes, rng):
    for n in sizes:
        a, b = rand_mat(rng, n), rand_mat(rng, n)
        yield f"smith {n}x{n}", lambda a=a: linalg.smith(a)
        yield f"matmul {n}x{n}", lambda a=a, b=b: a @ b
    X = Complex.concentrated(FGModule((0,)), 0)
    yield "mod-3 pages s<=6", lambda: pages(standard_adams_tower(mod_ring(3), X, 10), 2, 6, [-1, 0])


def timed(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[8, 16, 32])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    backends = ["python"] + (["compiled"] if linalg._available is not None else [])
    print(f"{'workload':<20}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}")
    prev = linalg.backend()
    try:
        for name, fn in workloads(args.sizes, random.Random(args.seed)):
            times = []
            for b in backends:
                linalg.use_backend(b)
                times.append(timed(fn, args.repeat))
            ratio = f"{times[0] / times[1]:.1f}x" if len(times) == 2 and times[1] else "-"
            print(f"{name:<20}" + "".join(f"{t * 1e3:>10.2f}ms" for t in times) + f"{ratio:>10}")
    finally:
        linalg.use_backend(prev)


if __name__ == "__main__":
    main()
