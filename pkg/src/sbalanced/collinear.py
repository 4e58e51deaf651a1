"""Normalized collinear central configurations (1-CSBC) and their s-CSBC
counterparts."""

from __future__ import annotations

import numpy as np

from .core import as_masses, balance_residual, check_s, eliminated_body, residual_jacobian


class NoConvergence(RuntimeError):
    pass


def check_ordering(ordering, n: int) -> tuple[int, ...]:
    order = tuple(int(i) for i in ordering)
    if sorted(order) != list(range(n)):
        raise ValueError(f"ordering {ordering!r} is not a permutation of 0..{n - 1}")
    return order


def _y_config(y: np.ndarray) -> np.ndarray:
    q = np.zeros(2 * y.size)
    q[1::2] = y
    return q


def solve_collinear_cc(masses, ordering=None, *, tol: float = 1e-13, max_iter: int = 100,
                       armijo: float = 1e-4, min_step: float = 1e-8) -> np.ndarray:
    """Unique normalized collinear central configuration on the y-axis.

    ``ordering[k]`` is the index of the k-th body from the bottom.  Damped
    Newton on the y-restricted balance equations, starting from bodies equally
    spaced on [-1, 1].
    """
    m = as_masses(masses)
    n = m.size
    order = check_ordering(range(n) if ordering is None else ordering, n)
    y = np.empty(n)
    y[list(order)] = np.linspace(-1.0, 1.0, n)
    y -= m @ y / m.sum()

    # the heaviest body is fixed by the center of mass
    p = eliminated_body(m)
    keep = [i for i in range(n) if i != p]
    Py = np.zeros((n, n - 1))
    Py[keep, np.arange(n - 1)] = 1.0
    Py[p] = -m[keep] / m[p]

    def resid(yr):
        return balance_residual(_y_config(Py @ yr), m, 1.0)[1::2][keep]

    yr = y[keep]
    r = resid(yr)
    for _ in range(max_iter):
        if np.max(np.abs(r)) <= tol:
            break
        J = residual_jacobian(_y_config(Py @ yr), m, 1.0)[0][1::2, 1::2][keep] @ Py
        step = np.linalg.solve(J, -r)
        if np.linalg.norm(step) <= 4 * np.finfo(float).eps * np.linalg.norm(yr):
            break
        f0 = 0.5 * r @ r
        t = 1.0
        while True:
            cand = yr + t * step
            yc = Py @ cand
            if np.all(np.diff(yc[list(order)]) > 0):
                rc = resid(cand)
                if 0.5 * rc @ rc <= (1 - 2 * armijo * t) * f0:
                    break
            t *= 0.5
            if t < min_step:
                break
        if t < min_step:
            # stalled at the roundoff floor
            if np.max(np.abs(r)) <= 1e3 * tol:
                break
            raise NoConvergence("line search failed in collinear solver")
        yr, r = cand, rc
    else:
        raise NoConvergence(f"collinear solver did not converge in {max_iter} iterations")
    # zeros of F satisfy I(q) = 1 on their own; rescaling would only add roundoff
    return _y_config(Py @ yr)


def make_s_csbc(q_hat: np.ndarray, s: float) -> np.ndarray:
    """Rotate a 1-CSBC onto the x-axis and scale it by ``1/sqrt(s)``."""
    s = check_s(s)
    q = np.zeros_like(q_hat, dtype=float)
    q[0::2] = q_hat[1::2] / np.sqrt(s)
    return q


def ordering_of(q: np.ndarray, axis: str = "y") -> tuple[int, ...]:
    """Bottom-to-top (or left-to-right) ordering of the bodies along an axis."""
    t = np.reshape(q, (-1, 2))[:, 1 if axis == "y" else 0]
    return tuple(int(i) for i in np.argsort(t, kind="stable"))
