"""Configuration-space primitives for the planar-reduced n-body problem.

Configurations are flat float arrays ``q = (x1, y1, ..., xn, yn)`` of length
``2n``; masses are 1-D arrays of length ``n``.  The parameter ``s >= 1``
weights the x-direction: ``S = diag(s, 1)`` acts on every body.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

COLLISION_TOL = 1e-9


class CollisionError(ValueError):
    """Two bodies are closer than the collision threshold."""


class DegenerateConfiguration(ValueError):
    """The configuration has zero weighted moment of inertia."""


def as_masses(masses) -> np.ndarray:
    m = np.asarray(masses, dtype=float).ravel()
    if m.size < 2:
        raise ValueError("need at least two bodies")
    if not np.all(np.isfinite(m)) or np.any(m <= 0):
        raise ValueError("masses must be positive")
    return m


def check_s(s: float) -> float:
    s = float(s)
    if not s >= 1.0:
        raise ValueError(f"s must be >= 1, got {s}")
    return s


@dataclass(frozen=True)
class ProblemInstance:
    masses: np.ndarray
    s: float

    def __post_init__(self):
        object.__setattr__(self, "masses", as_masses(self.masses))
        object.__setattr__(self, "s", check_s(self.s))

    @property
    def n(self) -> int:
        return self.masses.size


def s_diagonal(s: float, n: int) -> np.ndarray:
    """Diagonal of the block matrix diag(S, ..., S) as a length-2n vector."""
    return np.tile([float(s), 1.0], n)


def center_of_mass(q: np.ndarray, m: np.ndarray) -> np.ndarray:
    return (m @ np.reshape(q, (-1, 2))) / m.sum()


def make_configuration(coords, masses, collision_tol: float = COLLISION_TOL) -> np.ndarray:
    """Build a flat configuration from ``(n, 2)`` coordinates.

    The weighted center of mass is subtracted, and the result is checked for
    collisions.
    """
    m = as_masses(masses)
    Q = np.array(coords, dtype=float).reshape(-1, 2)
    if Q.shape[0] != m.size:
        raise ValueError(f"got {Q.shape[0]} bodies for {m.size} masses")
    Q = Q - (m @ Q) / m.sum()
    q = Q.ravel()
    _pair_geometry(q, collision_tol)
    return q


def _pair_geometry(q: np.ndarray, collision_tol: float = COLLISION_TOL):
    Q = np.reshape(q, (-1, 2))
    d = Q[:, None, :] - Q[None, :, :]
    r = np.sqrt(np.einsum("ijk,ijk->ij", d, d))
    n = Q.shape[0]
    off = ~np.eye(n, dtype=bool)
    if np.any(r[off] < collision_tol):
        i, j = np.argwhere((r < collision_tol) & off)[0]
        raise CollisionError(f"bodies {i} and {j} collide (distance {r[i, j]:.3e})")
    np.fill_diagonal(r, 1.0)
    return d, r, off


def potential(q: np.ndarray, m: np.ndarray) -> float:
    """Newtonian potential ``U(q) = sum_{i<j} m_i m_j / r_ij`` (positive)."""
    _, r, off = _pair_geometry(q)
    mm = np.outer(m, m)
    return 0.5 * float(np.sum(mm[off] / r[off]))


def gradient(q: np.ndarray, m: np.ndarray) -> np.ndarray:
    """Gradient of ``U``; per-body blocks sum to zero."""
    d, r, off = _pair_geometry(q)
    w = np.outer(m, m) / r**3
    w[~off] = 0.0
    return -np.einsum("ij,ijk->ik", w, d).ravel()


def hessian_U(q: np.ndarray, m: np.ndarray) -> np.ndarray:
    """Hessian of ``U`` as a dense ``2n x 2n`` matrix.

    Off-diagonal blocks are ``m_i m_j / r^3 (I - 3 u u^T)``; diagonal blocks make
    every block-row sum to zero.
    """
    d, r, off = _pair_geometry(q)
    n = m.size
    u = d / r[..., None]
    w = np.outer(m, m) / r**3
    w[~off] = 0.0
    blocks = w[..., None, None] * (np.eye(2) - 3.0 * u[..., :, None] * u[..., None, :])
    blocks[~off] = 0.0
    idx = np.arange(n)
    blocks[idx, idx] = -blocks.sum(axis=1)
    return blocks.transpose(0, 2, 1, 3).reshape(2 * n, 2 * n)


def weighted_moment(q: np.ndarray, m: np.ndarray, s: float) -> float:
    """S-weighted moment of inertia ``sum_i m_i (s x_i^2 + y_i^2)``."""
    Q = np.reshape(q, (-1, 2))
    return float(m @ (s * Q[:, 0] ** 2 + Q[:, 1] ** 2))


def balance_residual(q: np.ndarray, m: np.ndarray, s: float) -> np.ndarray:
    """``F(q, s) = M^-1 grad U(q) + U(q) S q``; zeros are normalized SBC."""
    n = m.size
    return gradient(q, m) / np.repeat(m, 2) + potential(q, m) * s_diagonal(s, n) * q


def residual_jacobian(q: np.ndarray, m: np.ndarray, s: float) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(dF/dq, dF/ds)`` in full ``2n`` coordinates."""
    n = m.size
    Sd = s_diagonal(s, n)
    u = potential(q, m)
    g = gradient(q, m)
    J = hessian_U(q, m) / np.repeat(m, 2)[:, None] + u * np.diag(Sd) + np.outer(Sd * q, g)
    dFds = np.zeros(2 * n)
    dFds[0::2] = u * q[0::2]
    return J, dFds


def normalize(q: np.ndarray, m: np.ndarray, s: float) -> np.ndarray:
    I = weighted_moment(q, m, s)
    if I <= 0.0:
        raise DegenerateConfiguration("weighted moment of inertia vanishes")
    return q / np.sqrt(I)


def pairwise_distances(q: np.ndarray) -> np.ndarray:
    Q = np.reshape(q, (-1, 2))
    iu = np.triu_indices(Q.shape[0], 1)
    return np.linalg.norm(Q[iu[0]] - Q[iu[1]], axis=1)


def collinearity_angle(q: np.ndarray) -> float:
    """Largest angle between a pair difference ``q_i - q_j`` and the x-axis.

    Angles are folded into ``[0, pi/2]``.
    """
    d, _, off = _pair_geometry(q)
    ang = np.arctan2(np.abs(d[..., 1]), np.abs(d[..., 0]))
    return float(ang[off].max())


def min_pair_angle(q: np.ndarray) -> float:
    """Smallest pair angle with the x-axis; equals ``pi/2`` iff all bodies lie on
    a vertical line."""
    d, _, off = _pair_geometry(q)
    ang = np.arctan2(np.abs(d[..., 1]), np.abs(d[..., 0]))
    return float(ang[off].min())


def reflect(q: np.ndarray, axis: str) -> np.ndarray:
    """Reflect along a main axis.

    ``"x"`` reflects across the x-axis (y -> -y), ``"y"`` across the y-axis
    (x -> -x).
    """
    out = np.array(q, dtype=float)
    if axis in ("x", "X"):
        out[1::2] *= -1.0
    elif axis in ("y", "Y"):
        out[0::2] *= -1.0
    else:
        raise ValueError(f"axis must be 'x' or 'y', got {axis!r}")
    return out


def symmetry_images(q: np.ndarray) -> list[np.ndarray]:
    """The four images of ``q`` under reflections along the main axes."""
    return [np.array(q, dtype=float), reflect(q, "x"), reflect(q, "y"), -np.asarray(q, dtype=float)]


# -- Center-of-mass reduction ------------------------------------------------

def eliminated_body(m: np.ndarray) -> int:
    """Body removed by the center-of-mass reduction: the heaviest one (last on
    ties), so that its recovered coordinates amplify roundoff the least."""
    return int(m.size - 1 - np.argmax(m[::-1]))


def reduction_matrix(m: np.ndarray) -> np.ndarray:
    """Linear map from reduced coordinates to full ``2n`` coordinates.

    Body ``p = eliminated_body(m)`` is recovered as
    ``q_p = -(1/m_p) sum_{i != p} m_i q_i``.
    """
    n = m.size
    p = eliminated_body(m)
    keep = [i for i in range(n) if i != p]
    P = np.zeros((n, n - 1))
    P[keep, np.arange(n - 1)] = 1.0
    P[p] = -m[keep] / m[p]
    return np.kron(P, np.eye(2))


def reduced_indices(m: np.ndarray) -> np.ndarray:
    """Positions of the reduced coordinates inside the full vector."""
    p = eliminated_body(m)
    return np.array([k for k in range(2 * m.size) if k // 2 != p])


def reduce(q: np.ndarray, m: np.ndarray) -> np.ndarray:
    return np.asarray(q, dtype=float)[reduced_indices(m)]


# -- Solution hooks ----------------------------------------------------------

# Callables ``hook(q, m, s)`` invoked on every converged solution of F = 0.
SOLUTION_HOOKS: list[Callable[[np.ndarray, np.ndarray, float], None]] = []


def notify_solution(q: np.ndarray, m: np.ndarray, s: float) -> None:
    for hook in SOLUTION_HOOKS:
        hook(q, m, s)
