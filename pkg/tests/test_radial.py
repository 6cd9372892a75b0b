import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp

from jostkit import radial
from jostkit.errors import AtPole, ValidationError
from jostkit.expansion import evolve_spectral
from jostkit.model import EnergyPoint, PiecewiseConstantPotential
from jostkit.numerics import derivative

real_q = st.floats(0.05, 30.0)
complex_q = st.complex_numbers(min_magnitude=0.05, max_magnitude=12.0, allow_nan=False, allow_infinity=False)


def _ode_chi(q, r, pot, consts):
    """chi(r; q) from an explicit ODE solve, layer by layer."""
    edges = [0.0] + list(pot.boundaries)
    y = np.array([0.0, q], dtype=complex)
    out = np.empty(len(r), dtype=complex)
    for j, v in enumerate(pot.heights):
        lo = edges[j]
        hi = edges[j + 1] if j + 1 < len(edges) else max(r.max(), lo) + 1e-9
        k2 = q * q - consts.scale * v
        mask = (r >= lo) & (r < hi)
        sol = solve_ivp(lambda x, u: [u[1], -k2 * u[0]], (lo, hi), y, method="DOP853", rtol=1e-13,
                        atol=1e-14, dense_output=True)
        if mask.any():
            out[mask] = sol.sol(r[mask])[0]
        y = sol.y[:, -1]
    return out


# -- Jost functions ----------------------------------------------------------------

def test_free_jost_is_one(free, consts):
    q = np.array([0.3, 2.0, 7.5 - 0.4j])
    assert np.allclose(radial.jplus(q, free, consts), 1.0, atol=1e-15)
    assert np.allclose(radial.jminus(q, free, consts), 1.0, atol=1e-15)


def test_first_layer_amplitudes(shell, consts):
    q = 2.0 + 0.3j
    reg = radial.regular_solution(q, shell, consts)
    k0 = reg.kappa[0]
    assert abs(reg.c_plus[0] - q / (2j * k0)) < 1e-14
    assert abs(reg.c_minus[0] + q / (2j * k0)) < 1e-14


@given(real_q)
@settings(max_examples=30, deadline=None)
def test_regular_solution_is_odd_in_q(q):
    pot, c = PiecewiseConstantPotential.shell(), radial.PhysConsts()
    r = np.linspace(0.0, 4.0, 17)
    a = radial.regular_solution(q, pot, c).chi(r)
    b = radial.regular_solution(-q, pot, c).chi(r)
    assert np.max(np.abs(a + b)) <= 1e-12 * max(1.0, np.max(np.abs(a)))


@pytest.mark.parametrize("q", [0.7, 2.319, 4.5])
def test_regular_solution_matches_ode(q, shell, consts):
    r = np.linspace(0.0, 3.5, 50)
    got = radial.regular_solution(q, shell, consts).chi(r)
    ref = _ode_chi(q, r, shell, consts)
    assert np.max(np.abs(got - ref)) < 1e-8 * max(1.0, np.max(np.abs(ref)))


@pytest.mark.parametrize("q", [1.0, 2.3 - 0.01j, 5.1 - 0.45j, 3.0 + 0.5j])
def test_jplus_derivative_matches_finite_difference(q, shell, consts):
    fd = derivative(lambda z: radial.jplus(z, shell, consts), q)
    assert abs(radial.djplus(np.array(q), shell, consts) - fd) < 1e-8 * max(1.0, abs(fd))


@given(real_q)
@settings(max_examples=100, deadline=None)
def test_unitarity_on_real_axis(q):
    s = radial.smatrix(q, PiecewiseConstantPotential.shell(), radial.PhysConsts())
    assert abs(abs(s) - 1.0) < 1e-12


@given(complex_q)
@settings(max_examples=100, deadline=None)
def test_schwarz_reflection(q):
    pot, c = PiecewiseConstantPotential.shell(), radial.PhysConsts()
    a = radial.jplus(np.array(q), pot, c)
    b = np.conj(radial.jplus(np.array(-np.conj(q)), pot, c))
    assert abs(a - b) <= 1e-12 * max(1.0, abs(a))


@given(complex_q)
@settings(max_examples=100, deadline=None)
def test_branch_flip(q):
    pot, c = PiecewiseConstantPotential.shell(), radial.PhysConsts()
    jp, jm, _ = radial.jost_arrays(np.array([q, -q]), pot, c, derivs=False)
    assert abs(jm[0] - jp[1]) <= 1e-12 * max(1.0, abs(jm[0]))


def test_smatrix_from_energy_points(shell, consts):
    s1 = radial.smatrix(EnergyPoint(4.0, "I"), shell, consts)
    s2 = radial.smatrix(EnergyPoint(4.0, "II"), shell, consts)
    assert abs(s1 * s2 - 1.0) < 1e-12


def test_smatrix_at_pole_raises(poles, shell, consts):
    with pytest.raises(AtPole):
        radial.smatrix(poles[0].k, shell, consts)
    with pytest.raises(AtPole):
        radial.ls_eigenfunction(np.array([0.5]), poles[0].k, "+", "k", shell, consts)


def test_scan_rejects_bad_grids(shell, consts):
    with pytest.raises(ValidationError):
        radial.smatrix_scan([1.0, 0.5], shell, consts)
    with pytest.raises(ValidationError):
        radial.smatrix_scan([-1.0, 2.0], shell, consts)


def test_phase_shift_jumps_by_pi_across_narrow_resonance(poles, shell, consts):
    k1 = poles[0].k
    k = np.linspace(k1.real - 0.15, k1.real + 0.15, 3001)
    _, delta = radial.smatrix_scan(k ** 2, shell, consts)
    # smooth background slope, estimated well away from the resonance
    side = np.array([k1.real - 0.45, k1.real - 0.44, k1.real + 0.44, k1.real + 0.45])
    _, d_side = radial.smatrix_scan(side ** 2, shell, consts)
    slope = 0.5 * ((d_side[1] - d_side[0]) + (d_side[3] - d_side[2])) / 0.01
    jump = delta[-1] - delta[0] - slope * (k[-1] - k[0])
    assert abs(jump - math.pi) < 0.2
    # the steepest rise sits on the resonance
    assert abs(k[np.argmax(np.diff(delta))] - k1.real) < 2 * abs(k1.imag)


def test_inverse_jost_peaks_at_resonance(poles, shell, consts):
    k1 = poles[0].k
    k = np.linspace(0.5, 3.5, 30001)
    inv = 1.0 / np.abs(radial.jplus(k, shell, consts))
    assert abs(k[np.argmax(inv)] - k1.real) < abs(k1.imag)
    assert inv.max() > 5 * np.median(inv)


# -- eigenfunctions ---------------------------------------------------------------

def test_free_eigenfunction_is_a_sine(free, consts):
    r = np.linspace(0.0, 10.0, 41)
    for sign in "+-":
        got = radial.ls_eigenfunction(r, 1.7, sign, "k", free, consts)
        assert np.max(np.abs(got - math.sqrt(2 / math.pi) * np.sin(1.7 * r))) < 1e-14


@pytest.mark.parametrize("q", [0.8, 2.319, 4.4])
def test_exterior_form(q, shell, consts):
    r = np.linspace(2.0, 9.0, 29)
    s = radial.smatrix(q, shell, consts)
    got = radial.ls_eigenfunction(r, q, "+", "k", shell, consts)
    ref = math.sqrt(2 / math.pi) * 0.5j * (np.exp(-1j * q * r) - s * np.exp(1j * q * r))
    assert np.max(np.abs(got - ref)) < 1e-12


def test_energy_normalisation_bridge(shell, consts):
    r = np.linspace(0.0, 4.0, 9)
    q = 2.7
    k = radial.ls_eigenfunction(r, q, "+", "k", shell, consts)
    e = radial.ls_eigenfunction(r, q, "+", "E", shell, consts)
    assert np.allclose(e * math.sqrt(consts.dE_dq(q)), k, atol=1e-14)


def test_norm_and_sign_validation(shell, consts):
    with pytest.raises(ValidationError):
        radial.ls_eigenfunction(np.array([1.0]), 2.0, "+", "x", shell, consts)
    with pytest.raises(ValidationError):
        radial.ls_eigenfunction(np.array([1.0]), 2.0, "*", "k", shell, consts)


# -- pairings -----------------------------------------------------------------------

@pytest.mark.parametrize("q", [1.1, 2.319, 3.6])
def test_bra_is_conjugate_ket_on_real_axis(q, tfs, shell, consts):
    for tf in tfs:
        for sign in "+-":
            bra = radial.ls_pairing(tf, q, sign, "bra", shell, consts)
            ket = radial.ls_pairing(tf, q, sign, "ket", shell, consts)
            assert abs(bra - np.conj(ket)) < 1e-12 * max(1.0, abs(ket))


@pytest.mark.parametrize("q", [1.3, 2.319, 4.2 - 0.2j])
def test_hamiltonian_sandwich(q, tfs, shell, consts):
    e = consts.energy(q)
    for tf in tfs:
        p0 = radial.ls_pairing(tf, q, "+", "bra", shell, consts)
        p1 = radial.ls_pairing(tf, q, "+", "bra", shell, consts, times=1)
        p2 = radial.ls_pairing(tf, q, "+", "bra", shell, consts, times=2)
        assert abs(p1 - e * p0) < 1e-9 * abs(e * p0) + 1e-12
        assert abs(p2 - e * e * p0) < 1e-9 * abs(e * e * p0) + 1e-12


def test_bulk_integrals_match_adaptive_pairings(tfs, shell, consts):
    q = np.array([0.9, 2.319, 5.0])
    b = radial.regular_integrals(tfs[0], q, shell, consts, conjugate=False)
    bulk = radial.SQRT_2_OVER_PI * b / radial.jminus(q, shell, consts)
    single = [radial.ls_pairing(tfs[0], x, "+", "bra", shell, consts) for x in q]
    assert np.allclose(bulk, single, rtol=1e-11, atol=1e-14)


def test_growth_bound(shell, consts):
    rep = radial.growth_bound_check(3.0 - 0.4j, np.linspace(0.1, 12.0, 60), shell, consts)
    assert rep.ok and rep.violating_radius is None
    assert math.isfinite(rep.inv_jplus_max)


def test_time_evolution_sandwich(tfs, shell, consts):
    # <+q| e^{-iHt} phi> = e^{-iEt} <+q|phi>, with e^{-iHt} phi built on a radial grid
    tf, t, big_r = tfs[0], 0.05, 30.0
    xg, wg = np.polynomial.legendre.leggauss(24)
    e = np.linspace(0.0, big_r, 121)
    mid, half = 0.5 * (e[1:] + e[:-1]), 0.5 * (e[1:] - e[:-1])
    r = (mid[:, None] + half[:, None] * xg).ravel()
    w = (half[:, None] * wg).ravel()
    psi = evolve_spectral(tf, t, r, shell, consts)
    assert np.max(np.abs(psi[-48:])) < 1e-12
    for q in (1.0, 2.3191, 4.0):
        chim = radial.ls_eigenfunction(r, q, "-", "k", shell, consts)
        lhs = np.sum(w * psi * chim)
        rhs = np.exp(-1j * consts.energy(q) * t / consts.hbar) * radial.ls_pairing(tf, q, "+", "bra", shell, consts)
        assert abs(lhs - rhs) < 1e-6 * max(1.0, abs(rhs))


def test_spectral_evolution_at_time_zero(tfs, shell, consts):
    r = np.linspace(0.0, 1.2, 25)
    for tf in tfs:
        assert np.max(np.abs(evolve_spectral(tf, 0.0, r, shell, consts) - tf(r))) < 1e-10 * tf.max_abs
