"""Inertia indices, collinear spectra and spectral flow along trivial branches."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.linalg import null_space

from .core import (
    balance_residual,
    hessian_U,
    potential,
    s_diagonal,
)

ZERO_REL_TOL = 1e-8
CLUSTER_REL_TOL = 1e-6
COLLINEAR_TOL = 1e-10


class NotCollinear(ValueError):
    pass


class DegenerateSpectrum(ValueError):
    """Eigenvalue clustering is ambiguous at the requested tolerance."""


class NotAdmissible(ValueError):
    """A spectral-flow endpoint is a degenerate critical point."""


class InertiaIndices(NamedTuple):
    minus: int
    zero: int
    plus: int

    @property
    def dim(self) -> int:
        return self.minus + self.zero + self.plus


@dataclass(frozen=True)
class SpectrumInfo:
    """Distinct eigenvalues of ``M^-1 B`` (translation mode removed).

    ``etas`` is strictly decreasing, ``etas[0] == -u_value``.
    """

    etas: tuple[float, ...]
    alphas: tuple[int, ...]
    u_value: float

    @property
    def k(self) -> int:
        return len(self.etas) - 1

    @property
    def thresholds(self) -> np.ndarray:
        """The values ``-eta_j / U`` for j = 0..k (the first one is 1)."""
        return -np.asarray(self.etas) / self.u_value


@dataclass(frozen=True)
class CrossingReport:
    crossings: tuple[tuple[float, int], ...]
    flow: int


def count_inertia(eigenvalues: np.ndarray, rel_tol: float = ZERO_REL_TOL) -> InertiaIndices:
    ev = np.asarray(eigenvalues)
    if ev.size == 0:
        return InertiaIndices(0, 0, 0)
    tau = rel_tol * np.abs(ev).max()
    return InertiaIndices(int(np.sum(ev < -tau)), int(np.sum(np.abs(ev) <= tau)), int(np.sum(ev > tau)))


def constrained_space_basis(q: np.ndarray, m: np.ndarray, s: float) -> np.ndarray:
    """Orthonormal basis, in mass-scaled coordinates ``w = M^{1/2} v``, of the
    space ``{v : sum m_i v_i = 0, <S M q, v> = 0}``."""
    n = m.size
    msq = np.sqrt(np.repeat(m, 2))
    C = np.zeros((3, 2 * n))
    C[0, 0::2] = m
    C[1, 1::2] = m
    C[2] = s_diagonal(s, n) * np.repeat(m, 2) * q
    return null_space(C / msq)


def constrained_hessian_spectrum(q: np.ndarray, m: np.ndarray, s: float,
                                 rel_tol: float = ZERO_REL_TOL,
                                 check_critical: bool = True):
    """Inertia indices and eigenvalues of the Hessian of ``U`` restricted to the
    normalization ellipsoid, at a zero of ``F``.

    The quadratic form ``v -> <(D^2 U + U M S) v, v>`` is diagonalized on the
    ``(2n-3)``-dimensional constrained space in a mass-orthonormal basis.
    """
    if check_critical:
        res = np.max(np.abs(balance_residual(q, m, s)))
        if res > 1e-8:
            warnings.warn(f"configuration is not a zero of F (residual {res:.2e})", stacklevel=2)
    n = m.size
    A = hessian_U(q, m) + potential(q, m) * np.diag(np.repeat(m, 2) * s_diagonal(s, n))
    msq = np.sqrt(np.repeat(m, 2))
    Aw = A / msq[:, None] / msq[None, :]
    Z = constrained_space_basis(q, m, s)
    ev = np.linalg.eigvalsh(Z.T @ Aw @ Z)
    return count_inertia(ev, rel_tol), ev


def collinear_axis(q: np.ndarray, tol: float = COLLINEAR_TOL) -> str:
    """Return ``"y"`` or ``"x"`` for the coordinate axis holding every body."""
    Q = np.reshape(q, (-1, 2))
    scale = np.abs(Q).max()
    if np.abs(Q[:, 0]).max() <= tol * scale:
        return "y"
    if np.abs(Q[:, 1]).max() <= tol * scale:
        return "x"
    raise NotCollinear("configuration is not collinear along a coordinate axis")


def b_matrix(q: np.ndarray, m: np.ndarray) -> np.ndarray:
    """Interaction matrix ``b_ij = m_i m_j / r_ij^3`` with zero row sums."""
    axis = collinear_axis(q)
    t = np.reshape(q, (-1, 2))[:, 1 if axis == "y" else 0]
    r = np.abs(t[:, None] - t[None, :])
    np.fill_diagonal(r, 1.0)
    B = np.outer(m, m) / r**3
    np.fill_diagonal(B, 0.0)
    np.fill_diagonal(B, -B.sum(axis=1))
    return B


def _cluster(values: np.ndarray, rel_tol: float) -> tuple[list[float], list[int]]:
    """Group sorted (descending) values into clusters of relative spread rel_tol."""
    scale = np.abs(values).max()
    gaps = np.abs(np.diff(values)) / scale
    ambiguous = (gaps > rel_tol / 10) & (gaps < rel_tol * 10)
    if np.any(ambiguous):
        raise DegenerateSpectrum(f"eigenvalue gaps {gaps[ambiguous]} are ambiguous at tolerance {rel_tol}")
    etas, alphas = [], []
    start = 0
    for i in range(1, values.size + 1):
        if i == values.size or gaps[i - 1] > rel_tol:
            etas.append(float(values[start:i].mean()))
            alphas.append(i - start)
            start = i
    return etas, alphas


def b_spectrum(q: np.ndarray, m: np.ndarray, cluster_tol: float = CLUSTER_REL_TOL) -> SpectrumInfo:
    """Distinct eigenvalues of ``M^-1 B(q)`` on the mass-weighted CoM-zero
    subspace, with multiplicities."""
    B = b_matrix(q, m)
    sq = np.sqrt(m)
    Bs = B / sq[:, None] / sq[None, :]
    Z = null_space(sq[None, :])  # removes the translation mode
    ev = np.linalg.eigvalsh(Z.T @ Bs @ Z)[::-1]
    etas, alphas = _cluster(ev, cluster_tol)
    return SpectrumInfo(tuple(etas), tuple(alphas), potential(q, m))


def csbc_indices_closed_form(spec: SpectrumInfo, s: float, n: int, rel_tol: float = 1e-9) -> InertiaIndices:
    """Inertia indices of a 1-CSBC at parameter ``s`` from its ``B`` spectrum."""
    c = spec.thresholds
    alphas = np.asarray(spec.alphas)
    for j, cj in enumerate(c):
        if abs(s - cj) <= rel_tol * cj:
            # degenerate: s sits on a threshold (j = 0 is the rotational s = 1 case)
            return InertiaIndices(int(n - 1 - alphas[: j + 1].sum()), int(alphas[j]),
                                  int(n - 2 + alphas[:j].sum()))
    passed = int(np.sum(c < s))
    if passed == len(c):
        return InertiaIndices(0, 0, 2 * n - 3)
    done = int(alphas[:passed].sum())
    return InertiaIndices(n - 1 - done, 0, n - 2 + done)


def bifurcation_values(spec: SpectrumInfo) -> list[float]:
    """Parameters ``s = -eta_j / U`` (j >= 1) where the 1-CSBC degenerates."""
    return [float(c) for c in spec.thresholds[1:]]


def spectral_flow_trivial_branch(q: np.ndarray, m: np.ndarray, s1: float, s2: float,
                                 rel_tol: float = 1e-9) -> CrossingReport:
    """Spectral flow of the Hessian path along the constant family ``q`` on
    ``[s1, s2]``, computed from endpoint Morse indices."""
    spec = b_spectrum(q, m)
    values = bifurcation_values(spec)
    for s_end in (s1, s2):
        if any(abs(s_end - v) <= rel_tol * v for v in values):
            raise NotAdmissible(f"endpoint s={s_end} is a degenerate instant")
    n = m.size
    lo, hi = min(s1, s2), max(s1, s2)
    crossings = tuple((v, a) for v, a in zip(values, spec.alphas[1:]) if lo < v < hi)
    flow = (csbc_indices_closed_form(spec, s1, n).minus
            - csbc_indices_closed_form(spec, s2, n).minus)
    return CrossingReport(crossings, flow)
