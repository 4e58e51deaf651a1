"""Direction of the branch leaving the collinear family for masses (1, 1, mu).

For each mu the seed solutions at kernel amplitudes eps give the curvature
``c = (s - s_tilde) / eps**2``.  ``c > 0`` means the branch leaves toward
larger s (no fold near the bifurcation), ``c < 0`` toward smaller s.

    python3 scripts/pitchfork_direction.py
"""

import argparse

import numpy as np

from sbalanced.collinear import solve_collinear_cc
from sbalanced.continuation import ContinuationSettings, seed_secondary_solution
from sbalanced.spectral import b_spectrum, bifurcation_values


def curvature(mu, eps):
    m = np.array([1.0, 1.0, mu])
    q_hat = solve_collinear_cc(m, (0, 1, 2))
    s_tilde = bifurcation_values(b_spectrum(q_hat, m))[0]
    pair = seed_secondary_solution(q_hat, s_tilde, m, ContinuationSettings(seed_eps=eps))
    return s_tilde, (pair.first[1] - s_tilde) / eps**2


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--mus", default="0.01,0.05,0.1,0.2,0.25,0.3,0.4,0.5,0.75,1.0")
    parser.add_argument("--eps", type=float, default=1e-4)
    args = parser.parse_args(argv)
    print(f"{'mu':>6} {'s_tilde':>12} {'curvature':>12}")
    for mu in (float(x) for x in args.mus.split(",")):
        s_tilde, c = curvature(mu, args.eps)
        print(f"{mu:6.3f} {s_tilde:12.8f} {c:12.5f}")


if __name__ == "__main__":
    main()
