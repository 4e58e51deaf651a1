"""Pseudo-arclength continuation of ``F(q, s) = 0`` and branch switching.

Newton systems are solved in center-of-mass reduced coordinates (one body is
eliminated, see :func:`sbalanced.core.reduction_matrix`); configurations stored
on branches are always full ``2n`` vectors.  Distances between points ``(q, s)``
use the plain Euclidean norm of the full coordinates together with ``s``.
"""

from __future__ import annotations

import enum
import logging
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Union

import numpy as np
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve

from . import core
from .collinear import ordering_of, solve_collinear_cc
from .core import (
    balance_residual,
    notify_solution,
    reduced_indices,
    reduction_matrix,
    residual_jacobian,
    weighted_moment,
)
from .spectral import (
    InertiaIndices,
    b_spectrum,
    bifurcation_values,
    constrained_hessian_spectrum,
)

log = logging.getLogger(__name__)

HALF_PI = 0.5 * np.pi


class NewtonFailure(RuntimeError):
    pass


class DegenerateSecant(ValueError):
    pass


class KernelDimensionUnsupported(ValueError):
    pass


class FellBackToTrivial(RuntimeError):
    pass


@dataclass
class ContinuationSettings:
    delta: float = 1e-3            # initial arclength step
    delta_s: float = -1e-4         # parameter displacement used when seeding from a known solution
    newton_tol: float = 1e-12
    max_newton_iters: int = 50
    max_steps: int = 200_000
    s_min: float = 1.0 + 1e-6
    s_max: float = 100.0
    shrink: float = 0.5
    grow: float = 1.3
    grow_after: int = 5
    delta_min: float = 1e-6
    delta_max: float = 1e-2
    s_weight: float = 1.0          # weight of s in the arclength norm
    singular_pivot: float = 1e-14
    seed_eps: float = 1e-3         # kernel amplitude of the first off-branch point
    probe_eps: tuple = (1e-3, 1e-2)
    n_random_probes: int = 64
    probe_ds: float = 2e-2         # |s - s_turn| at which probes are solved
    probe_radius: float = 0.5      # probes converging farther away are not local branches
    asymptotic_ratio: float = 1.5
    asymptotic_tol: float = 1e-6
    turning_tol: float = 1e-8
    detect_arrival: bool = True

    def __post_init__(self):
        for name in ("delta", "newton_tol", "delta_min", "delta_max", "singular_pivot",
                     "seed_eps", "probe_ds", "asymptotic_tol", "turning_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.s_min < self.s_max:
            raise ValueError("s_min must be below s_max")
        if not self.delta_min <= self.delta <= self.delta_max:
            raise ValueError("delta must lie in [delta_min, delta_max]")


@dataclass
class BranchPoint:
    q: np.ndarray
    s: float
    indices: InertiaIndices
    residual_norm: float
    moment_error: float
    arclength: float
    step: float = 0.0  # augmented distance to the previous point


@dataclass(frozen=True)
class BifurcationSeed:
    s_tilde: float
    kernel_sign: int
    ordering: tuple


@dataclass(frozen=True)
class TurningPointSeed:
    s_turn: float
    s_direction: int


@dataclass(frozen=True)
class UserSeed:
    pass


Seed = Union[BifurcationSeed, TurningPointSeed, UserSeed]


class Termination(enum.Enum):
    REACHED_S_MIN = "ReachedSMin"
    REACHED_S_MAX = "ReachedSMax"
    ARRIVED_AT_COLLINEAR = "ArrivedAtCollinear"
    ASYMPTOTIC = "AsymptoticConfiguration"
    MAX_STEPS = "MaxSteps"
    NEWTON_FAILURE = "NewtonFailure"


class SeedPair(NamedTuple):
    first: tuple
    second: tuple
    seed: Seed


@dataclass
class TurningPoint:
    index: int                 # branch point closest to the fold, before refinement
    s_turn: float
    q: np.ndarray
    sigma_min: float           # smallest singular value of dF/dq (reduced)
    sigma_scale: float         # largest singular value of dF/dq (reduced)
    tangent_s: float           # s-component of the unit tangent at the refined point
    indices: InertiaIndices
    method: str = "tangent"    # "tangent" (bisection) or "quadratic" (fit of s along the chord)


@dataclass
class Branch:
    masses: np.ndarray
    points: list = field(default_factory=list)
    seed: Seed = field(default_factory=UserSeed)
    termination: Optional[Termination] = None
    arrived_ordering: Optional[tuple] = None
    arrival_distance: Optional[float] = None   # max-norm distance of the last point to the 1-CSBC
    arrival_s_tilde: Optional[float] = None
    turning_points: list = field(default_factory=list)
    asymptote: Optional[np.ndarray] = None
    asymptotic_history: list = field(default_factory=list)

    @property
    def s(self) -> np.ndarray:
        return np.array([p.s for p in self.points])

    @property
    def configurations(self) -> np.ndarray:
        return np.array([p.q for p in self.points])

    @property
    def morse_indices(self) -> np.ndarray:
        return np.array([p.indices.minus for p in self.points])


# -- Newton solvers -----------------------------------------------------------

def _augmented_distance(dq: np.ndarray, ds: float, w: float) -> float:
    return float(np.sqrt(dq @ dq + (w * ds) ** 2))


def _lu(J: np.ndarray, pivot_tol: float):
    with warnings.catch_warnings():
        # exact singularity is caught by the pivot test below
        warnings.simplefilter("ignore", LinAlgWarning)
        lu, piv = lu_factor(J, check_finite=False)
    d = np.abs(np.diag(lu))
    if d.min() <= pivot_tol * d.max():
        raise NewtonFailure("singular Jacobian")
    return lu, piv


def _finish(q: np.ndarray, m: np.ndarray, s: float) -> np.ndarray:
    notify_solution(q, m, s)
    return q


def solve_fixed_s(guess: np.ndarray, s: float, m: np.ndarray,
                  settings: ContinuationSettings | None = None,
                  damped: bool = False) -> np.ndarray:
    """Newton's method for ``F(., s) = 0`` at fixed ``s`` from ``guess``."""
    st = settings or ContinuationSettings()
    P = reduction_matrix(m)
    red = reduced_indices(m)
    r = np.asarray(guess, dtype=float)[red].copy()
    q = P @ r
    try:
        F = balance_residual(q, m, s)
        for _ in range(st.max_newton_iters):
            if np.max(np.abs(F)) <= st.newton_tol:
                return _finish(q, m, s)
            J = residual_jacobian(q, m, s)[0][red] @ P
            # minimum-norm step: at s = 1 rotations leave F invariant and J is singular
            step = np.linalg.lstsq(J, -F[red], rcond=1e-12)[0]
            t = 1.0
            while True:
                qn = P @ (r + t * step)
                try:
                    Fn = balance_residual(qn, m, s)
                except core.CollisionError:
                    Fn = None
                if not damped:
                    if Fn is None:
                        raise NewtonFailure("Newton step ran into a collision")
                    break
                if Fn is not None and np.sum(Fn[red] ** 2) <= (1 - 1e-4 * t) * np.sum(F[red] ** 2):
                    break
                t *= 0.5
                if t < 1e-8:
                    raise NewtonFailure("line search failed")
            r = r + t * step
            q, F = qn, Fn
            if not np.all(np.isfinite(F)):
                raise NewtonFailure("non-finite residual")
    except core.CollisionError as exc:
        raise NewtonFailure(str(exc)) from exc
    if np.max(np.abs(F)) <= st.newton_tol:
        return _finish(q, m, s)
    raise NewtonFailure(f"no convergence at fixed s={s} (residual {np.max(np.abs(F)):.2e})")


def _bordered_newton(r0, s0, m, settings, constraint):
    """Newton on ``{F(q, s) = 0, c(q, s) = 0}`` in reduced coordinates.

    ``constraint(q, s)`` returns the scalar value of ``c`` and its gradient with
    respect to ``(q_full, s)``.
    """
    P = reduction_matrix(m)
    red = reduced_indices(m)
    r, s = np.array(r0, dtype=float), float(s0)
    nr = r.size
    try:
        for it in range(settings.max_newton_iters + 1):
            q = P @ r
            F = balance_residual(q, m, s)
            c, (cq, cs) = constraint(q, s)
            if np.max(np.abs(F)) <= settings.newton_tol and abs(c) <= settings.newton_tol:
                return q, s, it
            if it == settings.max_newton_iters:
                break
            Jq, Fs = residual_jacobian(q, m, s)
            A = np.empty((nr + 1, nr + 1))
            A[:nr, :nr] = Jq[red] @ P
            A[:nr, nr] = Fs[red]
            A[nr, :nr] = cq @ P
            A[nr, nr] = cs
            d = lu_solve(_lu(A, settings.singular_pivot), -np.append(F[red], c))
            r = r + d[:nr]
            s = s + d[nr]
            if not (np.all(np.isfinite(r)) and np.isfinite(s)):
                break
    except core.CollisionError as exc:
        raise NewtonFailure(str(exc)) from exc
    raise NewtonFailure("bordered Newton did not converge")


def newton_correct(guess, anchor, delta: float, m: np.ndarray,
                   settings: ContinuationSettings | None = None):
    """Solve ``F(q, s) = 0`` together with ``|(q, s) - anchor| = delta``.

    Returns ``(q, s, iterations)``.
    """
    st = settings or ContinuationSettings()
    qa, sa = np.asarray(anchor[0], dtype=float), float(anchor[1])
    w2 = st.s_weight ** 2

    def arclength(q, s):
        dq, ds = q - qa, s - sa
        # scaled so that its value approximates |(q, s) - anchor| - delta
        return (dq @ dq + w2 * ds * ds - delta * delta) / (2 * delta), (dq / delta, w2 * ds / delta)

    q, s, it = _bordered_newton(np.asarray(guess[0], dtype=float)[reduced_indices(m)],
                                guess[1], m, st, arclength)
    return _finish(q, m, s), s, it


def predict_tangent(current, previous, delta: float, s_weight: float = 1.0):
    """Secant predictor ``current + gamma (current - previous)`` with
    ``gamma = delta / |current - previous|``."""
    qc, sc = np.asarray(current[0], dtype=float), float(current[1])
    qp, sp = np.asarray(previous[0], dtype=float), float(previous[1])
    length = _augmented_distance(qc - qp, sc - sp, s_weight)
    if length < 1e-15:
        raise DegenerateSecant("consecutive points coincide")
    gamma = delta / length
    return qc + gamma * (qc - qp), sc + gamma * (sc - sp)


def reduced_jacobian(q: np.ndarray, m: np.ndarray, s: float) -> tuple[np.ndarray, np.ndarray]:
    """``dF/dq`` (square) and ``dF/ds`` restricted to reduced coordinates."""
    Jq, Fs = residual_jacobian(q, m, s)
    red = reduced_indices(m)
    return Jq[red] @ reduction_matrix(m), Fs[red]


def branch_tangent(q: np.ndarray, s: float, m: np.ndarray, s_weight: float = 1.0):
    """Unit tangent ``(dq, ds)`` of the solution curve at a regular point,
    with unspecified orientation."""
    Jq, Fs = reduced_jacobian(q, m, s)
    _, _, vt = np.linalg.svd(np.column_stack([Jq, Fs]))
    v = vt[-1]
    dq = reduction_matrix(m) @ v[:-1]
    ds = v[-1]
    nrm = _augmented_distance(dq, ds, s_weight)
    return dq / nrm, ds / nrm


def kernel_direction(q: np.ndarray, s: float, m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Right singular vector of the smallest singular value of ``dF/dq``, mapped
    to full coordinates and normalized; also returns all singular values."""
    Jq, _ = reduced_jacobian(q, m, s)
    _, sv, vt = np.linalg.svd(Jq)
    v = reduction_matrix(m) @ vt[-1]
    v /= np.linalg.norm(v)
    # fix the sign deterministically
    k = int(np.argmax(np.abs(v)))
    return (v if v[k] > 0 else -v), sv


# -- Branch points ------------------------------------------------------------

def make_point(q: np.ndarray, s: float, m: np.ndarray, arclength: float = 0.0,
               step: float = 0.0) -> BranchPoint:
    idx, _ = constrained_hessian_spectrum(q, m, s, check_critical=False)
    return BranchPoint(
        q=np.array(q, dtype=float),
        s=float(s),
        indices=idx,
        residual_norm=float(np.max(np.abs(balance_residual(q, m, s)))),
        moment_error=abs(weighted_moment(q, m, s) - 1.0),
        arclength=float(arclength),
        step=float(step),
    )


def is_y_collinear(q: np.ndarray, tol: float = 1e-6) -> bool:
    """All bodies on a vertical line (angle tolerance ``tol``)."""
    return core.min_pair_angle(q) >= HALF_PI - tol


# -- Seeding from the trivial branch ------------------------------------------

def seed_secondary_solution(q_hat: np.ndarray, s_tilde: float, m: np.ndarray,
                            settings: ContinuationSettings | None = None,
                            sign: int = 1) -> SeedPair:
    """Two consecutive solutions on the branch bifurcating from the 1-CSBC
    ``q_hat`` at ``s_tilde``.

    ``q_hat`` is displaced along the kernel of ``dF/dq``; the kernel amplitude is
    pinned to ``eps`` and ``2 eps`` while ``s`` is solved for, so the points land
    on the non-trivial branch even when it is tangent to ``s = s_tilde``.  The
    opposite ``sign`` yields the mirror branch.
    """
    st = settings or ContinuationSettings()
    idx, _ = constrained_hessian_spectrum(q_hat, m, s_tilde, check_critical=False)
    if idx.zero > 1:
        raise KernelDimensionUnsupported(f"kernel of dimension {idx.zero} at s={s_tilde}")
    if idx.zero == 0:
        raise ValueError(f"s={s_tilde} is not a bifurcation value of this configuration")
    v, _ = kernel_direction(q_hat, s_tilde, m)
    v = sign * v
    points = []
    for eps in (st.seed_eps, 2 * st.seed_eps):
        def pinned(q, s, eps=eps):
            return v @ (q - q_hat) - eps, (v, 0.0)

        q, s, _ = _bordered_newton((q_hat + eps * v)[reduced_indices(m)], s_tilde, m, st, pinned)
        if is_y_collinear(q):
            raise FellBackToTrivial("seed converged to a collinear configuration")
        points.append((_finish(q, m, s), s))
    return SeedPair(points[0], points[1], BifurcationSeed(float(s_tilde), int(sign), ordering_of(q_hat)))


# -- Branch following ---------------------------------------------------------

def _fold_by_quadratic_fit(solve, center: float, L: float, n_samples: int = 21):
    """Vertex of a least-squares parabola ``s(ell)`` sampled around ``center``.

    Used when the tangent is too ill-conditioned for bisection, which happens
    when another branch crosses at the fold.  Samples that jumped to a
    different branch are dropped as outliers.  Returns ``(q, s)`` or ``None``.
    """
    half = 0.25 * L
    ells = np.clip(center + np.linspace(-half, half, n_samples), 1e-3 * L, L)
    rows = []
    for ell in np.unique(ells):
        try:
            q, s = solve(ell)
        except NewtonFailure:
            continue
        rows.append((ell, s, q))
    if len(rows) < 5:
        return None
    ell = np.array([r[0] for r in rows])
    s = np.array([r[1] for r in rows])
    Q = np.array([r[2] for r in rows])
    keep = np.ones(ell.size, dtype=bool)
    for _ in range(3):
        coef = np.polyfit(ell[keep], s[keep], 2)
        dev = np.abs(np.polyval(coef, ell) - s)
        new_keep = dev <= max(10 * np.median(dev[keep]), 1e-12)
        if np.array_equal(new_keep, keep) or new_keep.sum() < 5:
            break
        keep = new_keep
    if coef[0] == 0:
        return None
    star = -coef[1] / (2 * coef[0])
    if not ell[keep].min() <= star <= ell[keep].max():
        return None
    # a guess interpolated from neighbouring solutions keeps Newton on this branch
    qcoef = np.polyfit(ell[keep], Q[keep], 2)
    guess_q = np.array([np.polyval(qcoef[:, j], star) for j in range(Q.shape[1])])
    try:
        q, s_star = solve(star, guess_q, np.polyval(coef, star))
    except NewtonFailure:
        return None
    # s is flat to roundoff here; only a jump to another branch is rejected
    if abs(s_star - np.polyval(coef, star)) > 1e-6:
        return None
    return q, s_star


def _refine_turning_point(branch: Branch, k: int, m: np.ndarray, st: ContinuationSettings) -> TurningPoint:
    """Locate the fold between points ``k-2`` and ``k`` by bisection on the
    s-component of the tangent, falling back to a quadratic fit of ``s`` along
    the chord when the tangent is dominated by roundoff."""
    a, b = branch.points[k - 2], branch.points[k]
    chord_q, chord_s = b.q - a.q, b.s - a.s
    L = _augmented_distance(chord_q, chord_s, st.s_weight)
    ref_dir = np.append(chord_q, chord_s)
    sign_a = np.sign(branch.points[k - 1].s - a.s)

    def solve(ell, guess_q=None, guess_s=None):
        if guess_q is None:
            guess_q = a.q + (ell / L) * chord_q
        if guess_s is None:
            guess_s = a.s + (ell / L) * chord_s
        q, s, _ = newton_correct((guess_q, guess_s), (a.q, a.s), ell, m, st)
        return q, s

    def tangent_s(q, s):
        tq, ts = branch_tangent(q, s, m, st.s_weight)
        return -ts if np.append(tq, ts) @ ref_dir < 0 else ts

    lo, hi = 0.0, L
    best = (b.q, b.s, np.inf, L)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        try:
            q, s = solve(mid)
        except NewtonFailure:
            break
        ts = tangent_s(q, s)
        best = (q, s, ts, mid)
        if abs(ts) <= st.turning_tol:
            break
        if np.sign(ts) == sign_a:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-14:
            break
    q, s, ts, ell = best
    method = "tangent"
    if not abs(ts) <= st.turning_tol:
        fit = _fold_by_quadratic_fit(solve, ell, L)
        if fit is not None:
            q, s = fit
            ts = tangent_s(q, s)
            method = "quadratic"
    _, sv = kernel_direction(q, s, m)
    idx, _ = constrained_hessian_spectrum(q, m, s, check_critical=False)
    return TurningPoint(k - 1, float(s), q, float(sv[-1]), float(sv[0]), float(ts), idx, method)


def _refine_arrival(q: np.ndarray, s: float, m: np.ndarray, st: ContinuationSettings,
                    min_amplitude: float = 1e-8):
    """Walk down the branch toward the 1-CSBC it is crossing.

    The kernel amplitude relative to the 1-CSBC with the ordering of ``q`` is
    pinned to geometrically shrinking values (bordered Newton in ``(q, s)``), so
    every point stays on the non-trivial branch.  Returns ``(q, s, q_hat,
    s_tilde)`` for the last converged point.
    """
    q_hat = solve_collinear_cc(m, ordering_of(q))
    values = bifurcation_values(b_spectrum(q_hat, m))
    s_tilde = min(values, key=lambda v: abs(v - s))
    v, _ = kernel_direction(q_hat, s_tilde, m)
    eps = float(v @ (q - q_hat))
    best = (q, s)
    while abs(eps) > min_amplitude:
        eps *= 0.1

        def pinned(qq, ss, eps=eps):
            return v @ (qq - q_hat) - eps, (v, 0.0)

        try:
            qq, ss, _ = _bordered_newton(best[0][reduced_indices(m)], best[1], m, st, pinned)
        except NewtonFailure:
            break
        best = (_finish(qq, m, ss), ss)
    return best[0], best[1], q_hat, s_tilde


def follow_branch(seed_pair: SeedPair, m, settings: ContinuationSettings | None = None) -> Branch:
    """Pseudo-arclength continuation from two consecutive solutions."""
    st = settings or ContinuationSettings()
    m = core.as_masses(m)
    branch = Branch(masses=m, seed=seed_pair.seed)
    (q0, s0), (q1, s1) = seed_pair.first, seed_pair.second
    p0 = make_point(q0, s0, m)
    d01 = _augmented_distance(q1 - q0, s1 - s0, st.s_weight)
    branch.points = [p0, make_point(q1, s1, m, arclength=d01, step=d01)]
    delta = min(max(st.delta, st.delta_min), st.delta_max)
    streak = 0
    asym_anchor = None

    def finish(term):
        branch.termination = term
        return branch

    for _ in range(st.max_steps):
        prev, cur = branch.points[-2], branch.points[-1]
        try:
            guess = predict_tangent((cur.q, cur.s), (prev.q, prev.s), delta, st.s_weight)
            q, s, _ = newton_correct(guess, (cur.q, cur.s), delta, m, st)
            forward = np.append(q - cur.q, st.s_weight * (s - cur.s)) @ np.append(
                cur.q - prev.q, st.s_weight * (cur.s - prev.s))
            if forward <= 0:
                raise NewtonFailure("corrector went backwards")
        except (NewtonFailure, DegenerateSecant) as exc:
            delta *= st.shrink
            streak = 0
            if delta < st.delta_min:
                log.info("step size exhausted at s=%.6g: %s", cur.s, exc)
                return finish(Termination.NEWTON_FAILURE)
            continue

        # parameter window: land exactly on the boundary
        if s < st.s_min or s > st.s_max:
            s_end = st.s_min if s < st.s_min else st.s_max
            t = (s_end - cur.s) / (s - cur.s)
            try:
                q_end = solve_fixed_s(cur.q + t * (q - cur.q), s_end, m, st)
            except NewtonFailure:
                return finish(Termination.NEWTON_FAILURE)
            step = _augmented_distance(q_end - cur.q, s_end - cur.s, st.s_weight)
            branch.points.append(make_point(q_end, s_end, m, cur.arclength + step, step))
            return finish(Termination.REACHED_S_MIN if s < st.s_min else Termination.REACHED_S_MAX)

        # arrival on the y-axis: the x-coordinates flip sign across the trivial branch
        if st.detect_arrival and (q[0::2] @ cur.q[0::2]) < 0:
            # continue from whichever side is closer to the axis
            near_q, near_s = (q, s) if np.abs(q[0::2]).max() < np.abs(cur.q[0::2]).max() else (cur.q, cur.s)
            qa, sa, q_hat, s_tilde = _refine_arrival(near_q, near_s, m, st)
            dist = float(np.max(np.abs(qa - q_hat)))
            if dist < 1e-6:
                step = _augmented_distance(qa - cur.q, sa - cur.s, st.s_weight)
                branch.points.append(make_point(qa, sa, m, cur.arclength + step, step))
                branch.arrived_ordering = ordering_of(q_hat)
                branch.arrival_distance = dist
                branch.arrival_s_tilde = s_tilde
                return finish(Termination.ARRIVED_AT_COLLINEAR)

        step = _augmented_distance(q - cur.q, s - cur.s, st.s_weight)
        branch.points.append(make_point(q, s, m, cur.arclength + step, step))

        tp = detect_turning_point(branch, m, st)
        if tp is not None:
            branch.turning_points.append(tp)
            asym_anchor = None

        # asymptotic configuration while s grows
        if s > cur.s:
            if asym_anchor is None:
                asym_anchor = (s, q)
            elif s >= st.asymptotic_ratio * asym_anchor[0]:
                s_target = st.asymptotic_ratio * asym_anchor[0]
                t = (s_target - cur.s) / (s - cur.s)
                q_target = cur.q + t * (q - cur.q)
                diff = float(np.max(np.abs(q_target - asym_anchor[1])))
                branch.asymptotic_history.append((asym_anchor[0], s_target, diff))
                if diff < st.asymptotic_tol:
                    branch.asymptote = q_target
                    return finish(Termination.ASYMPTOTIC)
                asym_anchor = (s_target, q_target)
        else:
            asym_anchor = None

        streak += 1
        if streak >= st.grow_after:
            delta = min(delta * st.grow, st.delta_max)
            streak = 0
    return finish(Termination.MAX_STEPS)


def detect_turning_point(branch: Branch, m: np.ndarray,
                         settings: ContinuationSettings | None = None) -> Optional[TurningPoint]:
    """Check the last three points for a reversal of the s-direction and refine
    the fold location if one is found."""
    st = settings or ContinuationSettings()
    pts = branch.points
    if len(pts) < 3:
        return None
    k = len(pts) - 1
    ds_a = pts[k - 1].s - pts[k - 2].s
    ds_b = pts[k].s - pts[k - 1].s
    if ds_a * ds_b >= 0:
        return None
    return _refine_turning_point(branch, k, m, st)


def find_turning_points(branch: Branch, m: np.ndarray,
                        settings: ContinuationSettings | None = None) -> list[TurningPoint]:
    """Scan a finished branch for folds (same test as during continuation)."""
    st = settings or ContinuationSettings()
    found = []
    for k in range(2, len(branch.points)):
        ds_a = branch.points[k - 1].s - branch.points[k - 2].s
        ds_b = branch.points[k].s - branch.points[k - 1].s
        if ds_a * ds_b < 0:
            found.append(_refine_turning_point(branch, k, m, st))
    return found


# -- Secondary branches -------------------------------------------------------

def _segment_distance(p, a, b) -> float:
    ab = b - a
    denom = ab @ ab
    t = 0.0 if denom == 0 else float(np.clip((p - a) @ ab / denom, 0.0, 1.0))
    return float(np.linalg.norm(p - (a + t * ab)))


def distance_to_branch(q: np.ndarray, s: float, branch: Branch, s_weight: float = 1.0) -> float:
    """Distance from ``(q, s)`` to the polyline through the branch points."""
    pts = np.array([np.append(p.q, s_weight * p.s) for p in branch.points])
    x = np.append(q, s_weight * s)
    if len(pts) == 1:
        return float(np.linalg.norm(x - pts[0]))
    # nearest vertex first, then the two adjacent segments
    i = int(np.argmin(np.linalg.norm(pts - x, axis=1)))
    best = float(np.linalg.norm(x - pts[i]))
    if i > 0:
        best = min(best, _segment_distance(x, pts[i - 1], pts[i]))
    if i + 1 < len(pts):
        best = min(best, _segment_distance(x, pts[i], pts[i + 1]))
    return best


def _same_up_to_symmetry(q1, s1, q2, s2, tol) -> bool:
    if abs(s1 - s2) > tol:
        return False
    return any(np.max(np.abs(img - q2)) <= tol for img in core.symmetry_images(q1))


def probe_secondary_branches(point: TurningPoint | BranchPoint, branch: Branch, m,
                             settings: ContinuationSettings | None = None,
                             rng_seed: int = 0) -> list[SeedPair]:
    """Newton probes around a singular branch point.

    Probes are solved at ``s_turn +/- probe_ds`` from the turning configuration
    displaced along the kernel of ``dF/dq`` (both signs, each ``probe_eps``) and
    along ``n_random_probes`` random per-body unit directions.  Converged
    solutions that are local (within ``probe_radius``), not on ``branch``
    (distance above ``10 delta``) and distinct up to reflections become seeds.
    """
    st = settings or ContinuationSettings()
    m = core.as_masses(m)
    n = m.size
    rng = np.random.default_rng(rng_seed)
    s_turn = point.s_turn if isinstance(point, TurningPoint) else point.s
    v, _ = kernel_direction(point.q, s_turn, m)
    displacements = [sgn * eps * v for eps in st.probe_eps for sgn in (1, -1)]
    for k in range(st.n_random_probes):
        ang = rng.uniform(0.0, 2 * np.pi, n)
        d = np.column_stack([np.cos(ang), np.sin(ang)])
        d -= (m @ d) / m.sum()
        eps = st.probe_eps[k % len(st.probe_eps)]
        displacements.append(eps * d.ravel())

    candidates = []
    for direction in (-1, 1):
        s_probe = s_turn + direction * st.probe_ds
        if not (st.s_min <= s_probe <= st.s_max):
            continue
        for d in displacements:
            try:
                q = solve_fixed_s(point.q + d, s_probe, m, st)
            except NewtonFailure:
                continue
            if np.linalg.norm(q - point.q) > st.probe_radius:
                continue
            if distance_to_branch(q, s_probe, branch, st.s_weight) <= 10 * st.delta:
                continue
            candidates.append((direction, s_probe, q))

    # deterministic merge: sort, then drop symmetric duplicates
    candidates.sort(key=lambda c: (c[1], tuple(np.round(c[2], 12))))
    unique = []
    for c in candidates:
        if not any(_same_up_to_symmetry(c[2], c[1], u[2], u[1], 1e-6) for u in unique):
            unique.append(c)

    seeds = []
    for direction, s_probe, q in unique:
        s2 = s_probe + direction * abs(st.delta_s)
        try:
            q2 = solve_fixed_s(q, s2, m, st)
        except NewtonFailure:
            continue
        seeds.append(SeedPair((q, s_probe), (q2, s2), TurningPointSeed(s_turn, direction)))
    return seeds


# -- Trivial-branch driver ----------------------------------------------------

def follow_bifurcations(m, ordering=None, settings: ContinuationSettings | None = None,
                        signs=(1, -1)) -> list[Branch]:
    """Follow the branches leaving every bifurcation instant of the 1-CSBC with
    the given ordering."""
    st = settings or ContinuationSettings()
    m = core.as_masses(m)
    q_hat = solve_collinear_cc(m, ordering)
    spec = b_spectrum(q_hat, m)
    branches = []
    for s_tilde, alpha in zip(bifurcation_values(spec), spec.alphas[1:]):
        if alpha > 1:
            log.warning("skipping s=%.6g: kernel dimension %d", s_tilde, alpha)
            continue
        for sign in signs:
            branches.append(follow_branch(seed_secondary_solution(q_hat, s_tilde, m, st, sign), m, st))
    return branches


# -- Multistart ---------------------------------------------------------------

@dataclass
class MultistartSolution:
    q: np.ndarray
    collinear: bool
    indices: InertiaIndices
    orbit_size: int  # number of distinct images under reflections


def random_configuration(m: np.ndarray, s: float, rng: np.random.Generator) -> np.ndarray:
    Q = rng.normal(size=(m.size, 2))
    Q -= (m @ Q) / m.sum()
    return core.normalize(Q.ravel(), m, s)


def is_collinear(q: np.ndarray, tol: float = 1e-8) -> bool:
    """All bodies on one straight line (relative tolerance on the second
    singular value of the centered coordinates)."""
    Q = np.reshape(q, (-1, 2))
    sv = np.linalg.svd(Q - Q.mean(axis=0), compute_uv=False)
    return bool(sv[1] <= tol * sv[0])


def multistart_search(m, s: float, n_starts: int, rng_seed: int = 0,
                      settings: ContinuationSettings | None = None,
                      tol: float = 1e-6) -> list[MultistartSolution]:
    """Damped Newton from random normalized configurations; returns zeros of
    ``F(., s)`` deduplicated up to reflections."""
    st = settings or ContinuationSettings(newton_tol=1e-11)
    m = core.as_masses(m)
    rng = np.random.default_rng(rng_seed)
    found = []
    for _ in range(n_starts):
        q0 = random_configuration(m, s, rng)
        try:
            q = solve_fixed_s(q0, s, m, st, damped=True)
            core.collinearity_angle(q)  # rejects near-collisions
        except (NewtonFailure, core.CollisionError):
            continue
        found.append(q)
    found.sort(key=lambda q: tuple(np.round(q, 8)))
    classes = []
    for q in found:
        if any(_same_up_to_symmetry(q, s, c, s, tol) for c in classes):
            continue
        classes.append(q)
    out = []
    for q in classes:
        images = []
        for img in core.symmetry_images(q):
            if not any(np.max(np.abs(img - o)) <= tol for o in images):
                images.append(img)
        idx, _ = constrained_hessian_spectrum(q, m, s, check_critical=False)
        out.append(MultistartSolution(q, is_collinear(q), idx, len(images)))
    return out
