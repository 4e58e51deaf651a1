"""Count distinct non-collinear S-balanced configurations by random-start Newton.

    python3 scripts/multistart_count.py --s 10 --starts 2000
"""

import argparse
import time

import numpy as np

from sbalanced.continuation import multistart_search


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--masses", default="1,1,1")
    parser.add_argument("--s", type=float, default=10.0)
    parser.add_argument("--starts", type=int, default=2000)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    m = np.array([float(x) for x in args.masses.split(",")])
    t0 = time.perf_counter()
    sols = multistart_search(m, args.s, args.starts, rng_seed=args.seed)
    planar = [x for x in sols if not x.collinear]
    print(f"{len(sols)} classes up to reflections, {len(planar)} non-collinear")
    print(f"non-collinear configurations without symmetry reduction: {sum(x.orbit_size for x in planar)}")
    for x in sols:
        print(f"  {'collinear' if x.collinear else 'planar':9s} indices={tuple(x.indices)} orbit={x.orbit_size}")
    print(f"{time.perf_counter() - t0:.1f}s")


if __name__ == "__main__":
    main()
