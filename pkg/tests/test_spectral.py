import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sbalanced import core
from sbalanced.collinear import make_s_csbc, solve_collinear_cc
from sbalanced.spectral import (
    DegenerateSpectrum,
    InertiaIndices,
    NotAdmissible,
    NotCollinear,
    SpectrumInfo,
    b_matrix,
    b_spectrum,
    bifurcation_values,
    constrained_hessian_spectrum,
    count_inertia,
    csbc_indices_closed_form,
    spectral_flow_trivial_branch,
)

A = 1 / np.sqrt(2)
UNIT3 = np.ones(3)


def unit_csbc():
    q = np.zeros(6)
    q[1::2] = [-A, 0, A]
    return q


def random_csbc(seed, n):
    rng = np.random.default_rng(seed)
    m = rng.uniform(0.1, 2.0, n)
    order = tuple(int(i) for i in rng.permutation(n))
    return solve_collinear_cc(m, order), m


# -- constrained Hessian ------------------------------------------------------

def test_indices_of_unit_mass_configurations():
    q = unit_csbc()
    assert constrained_hessian_spectrum(q, UNIT3, 1.5)[0] == (1, 0, 2)
    assert constrained_hessian_spectrum(q, UNIT3, 3.0)[0] == (0, 0, 3)
    assert constrained_hessian_spectrum(q, UNIT3, 2.4)[0] == (0, 1, 2)
    assert constrained_hessian_spectrum(make_s_csbc(q, 2.0), UNIT3, 2.0)[0] == (2, 0, 1)


def test_equilateral_is_a_minimum_up_to_rotation():
    h = np.sqrt(3) / 2
    q = core.normalize(core.make_configuration([(-0.5, 0), (0.5, 0), (0, h)], UNIT3), UNIT3, 1.0)
    # at s = 1 the rotation is a kernel direction
    assert constrained_hessian_spectrum(q, UNIT3, 1.0)[0] == (0, 1, 2)


def test_noncritical_point_warns():
    q = 1.3 * unit_csbc()
    with pytest.warns(UserWarning, match="not a zero"):
        constrained_hessian_spectrum(q, UNIT3, 2.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        constrained_hessian_spectrum(q, UNIT3, 2.0, check_critical=False)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.integers(3, 5), st.floats(1.0, 30.0))
def test_sum_rule(seed, n, s):
    q, m = random_csbc(seed, n)
    idx, ev = constrained_hessian_spectrum(q, m, s)
    assert idx.dim == 2 * n - 3 == ev.size


def test_count_inertia_threshold_is_relative():
    assert count_inertia(np.array([-1.0, 1e-9, 2.0])) == (1, 1, 1)
    assert count_inertia(np.array([-1e-6, 1e-15, 2e-6])) == (1, 1, 1)
    assert count_inertia(np.array([])) == (0, 0, 0)


# -- B matrix and its spectrum ------------------------------------------------

def test_b_matrix_examples():
    B = b_matrix(unit_csbc(), UNIT3)
    assert B[0, 1] == pytest.approx(2 * np.sqrt(2), rel=1e-14)
    assert B[1, 2] == pytest.approx(2 * np.sqrt(2), rel=1e-14)
    assert B[0, 2] == pytest.approx(np.sqrt(2) / 4, rel=1e-14)
    B2 = b_matrix(np.array([0, -0.5, 0, 0.5]), np.ones(2))
    assert np.allclose(B2, [[-1, 1], [1, -1]], atol=1e-15)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.integers(2, 6))
def test_b_rows_sum_to_zero(seed, n):
    q, m = random_csbc(seed, n)
    B = b_matrix(q, m)
    assert np.abs((B / m[:, None]).sum(axis=1)).max() <= 1e-12 * np.abs(B).max()


def test_b_matrix_accepts_x_axis_and_rejects_planar():
    q = make_s_csbc(unit_csbc(), 1.0)
    assert np.allclose(b_matrix(q, UNIT3), b_matrix(unit_csbc(), UNIT3))
    with pytest.raises(NotCollinear):
        b_matrix(np.array([0, 0, 1, 0, 0, 1.0]), UNIT3)


def test_unit_mass_spectrum():
    spec = b_spectrum(unit_csbc(), UNIT3)
    assert spec.alphas == (1, 1)
    assert spec.etas[0] == pytest.approx(-5 / np.sqrt(2), rel=1e-13)
    assert spec.etas[1] == pytest.approx(-6 * np.sqrt(2), rel=1e-13)
    assert spec.u_value == pytest.approx(5 / np.sqrt(2), rel=1e-14)
    # eigenvectors of the explicit 3x3 matrix
    B = b_matrix(unit_csbc(), UNIT3)
    for v, eta in (([1, 0, -1], spec.etas[0]), ([1, -2, 1], spec.etas[1])):
        assert np.allclose(B @ v, eta * np.array(v, float), atol=1e-12)


def test_two_body_spectrum():
    spec = b_spectrum(np.array([0, -0.5, 0, 0.5]), np.ones(2))
    assert spec.etas == pytest.approx((-2.0,)) and spec.alphas == (1,)
    # distance 1 gives U = 1; the pair is not normalized, so eta_0 != -U here
    assert spec.u_value == pytest.approx(1.0)
    assert bifurcation_values(spec) == []
    normalized = b_spectrum(np.array([0, -A, 0, A]), np.ones(2))
    assert normalized.etas[0] == pytest.approx(-normalized.u_value, rel=1e-14)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.integers(2, 6))
def test_spectrum_anchor(seed, n):
    q, m = random_csbc(seed, n)
    spec = b_spectrum(q, m)
    assert spec.alphas[0] == 1
    assert abs(spec.etas[0] + spec.u_value) <= 1e-10 * spec.u_value
    assert sum(spec.alphas) == n - 1
    assert all(np.diff(spec.etas) < 0)
    vals = bifurcation_values(spec)
    assert all(v > 1 for v in vals) and all(np.diff(vals) > 0)


def test_ambiguous_clustering_raises():
    q = unit_csbc()
    # a gap of about 0.17 relative sits right at a tolerance of 0.1
    with pytest.raises(DegenerateSpectrum):
        b_spectrum(q, UNIT3, cluster_tol=0.1)


def test_four_equal_masses_spectrum_accounts_for_every_mode():
    q, m = solve_collinear_cc(np.ones(4)), np.ones(4)
    spec = b_spectrum(q, m)
    assert sum(spec.alphas) == 3


# -- closed-form indices ------------------------------------------------------

def test_closed_form_unit_masses():
    spec = b_spectrum(unit_csbc(), UNIT3)
    assert csbc_indices_closed_form(spec, 2.0, 3) == (1, 0, 2)
    assert csbc_indices_closed_form(spec, 2.4, 3) == (0, 1, 2)
    assert csbc_indices_closed_form(spec, 10.0, 3) == (0, 0, 3)
    assert csbc_indices_closed_form(spec, 1.0, 3) == (1, 1, 1)


def test_closed_form_with_multiplicity():
    spec = SpectrumInfo(etas=(-1.0, -2.0, -4.0), alphas=(1, 2, 1), u_value=1.0)
    n = 5
    assert csbc_indices_closed_form(spec, 1.5, n) == (3, 0, 4)
    assert csbc_indices_closed_form(spec, 2.0, n) == (1, 2, 4)
    assert csbc_indices_closed_form(spec, 3.0, n) == (1, 0, 6)
    assert csbc_indices_closed_form(spec, 4.0, n) == (0, 1, 6)
    assert csbc_indices_closed_form(spec, 5.0, n) == (0, 0, 7)


def _kernel_scan(q, m, lo, hi):
    """Bisection on the Morse index of the constrained Hessian between two
    parameters where it differs by one."""
    i_lo = constrained_hessian_spectrum(q, m, lo)[0].minus
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if constrained_hessian_spectrum(q, m, mid, check_critical=False)[0].minus == i_lo:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def test_bifurcation_value_for_small_outer_mass_matches_kernel_scan():
    m = np.array([1.0, 1.0, 0.01])
    q = solve_collinear_cc(m, (0, 1, 2))
    vals = bifurcation_values(b_spectrum(q, m))
    assert len(vals) == 1 and vals[0] > 1
    # scan the index over a grid, then refine the jump
    grid = np.linspace(1.01, 5.0, 60)
    minus = [constrained_hessian_spectrum(q, m, s)[0].minus for s in grid]
    k = int(np.flatnonzero(np.diff(minus))[0])
    s_star = _kernel_scan(q, m, grid[k], grid[k + 1])
    assert abs(s_star - vals[0]) <= 1e-6
    idx, _ = constrained_hessian_spectrum(q, m, vals[0])
    assert idx.zero == 1


def test_big_outer_mass_has_one_bifurcation():
    m = np.array([1.0, 0.5, 0.5])
    vals = bifurcation_values(b_spectrum(solve_collinear_cc(m, (0, 1, 2)), m))
    assert len(vals) == 1 and vals[0] > 1


# -- spectral flow ------------------------------------------------------------

def test_flow_unit_masses():
    rep = spectral_flow_trivial_branch(unit_csbc(), UNIT3, 1.1, 10.0)
    assert rep.flow == 1
    assert len(rep.crossings) == 1
    assert rep.crossings[0][0] == pytest.approx(2.4, abs=1e-12) and rep.crossings[0][1] == 1
    empty = spectral_flow_trivial_branch(unit_csbc(), UNIT3, 3.0, 10.0)
    assert empty.flow == 0 and empty.crossings == ()


def test_flow_rejects_degenerate_endpoint():
    with pytest.raises(NotAdmissible):
        spectral_flow_trivial_branch(unit_csbc(), UNIT3, 1.1, 2.4)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.integers(3, 5), st.floats(0.05, 0.95))
def test_flow_additivity(seed, n, frac):
    q, m = random_csbc(seed, n)
    vals = bifurcation_values(b_spectrum(q, m))
    s1, s2 = 1.1, 2 * max(vals)
    mid = s1 + frac * (s2 - s1)
    if any(abs(mid - v) < 1e-6 * v for v in vals) or any(abs(s1 - v) < 1e-6 for v in vals):
        return
    whole = spectral_flow_trivial_branch(q, m, s1, s2)
    parts = (spectral_flow_trivial_branch(q, m, s1, mid).flow
             + spectral_flow_trivial_branch(q, m, mid, s2).flow)
    assert whole.flow == parts
    assert abs(whole.flow) <= sum(a for _, a in whole.crossings)
    assert list(whole.crossings) == sorted(whole.crossings)


def test_inertia_indices_dim():
    assert InertiaIndices(1, 2, 3).dim == 6
