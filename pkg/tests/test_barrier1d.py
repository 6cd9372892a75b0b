import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from jostkit import barrier1d, oracles
from jostkit.errors import ValidationError
from jostkit.model import PhysConsts, PiecewiseConstantPotential, make_test_function


def _square_barrier_t(k, v0, a, consts):
    """Textbook transmission amplitude through one rectangular layer on [0, a]."""
    kap = cmath.sqrt(k * k - consts.scale * v0)
    if kap == 0:
        return cmath.exp(-1j * k * a) / (1 - 0.5j * k * a)
    return cmath.exp(-1j * k * a) / (cmath.cos(kap * a) - 0.5j * (k * k + kap * kap) / (k * kap) * cmath.sin(kap * a))


def test_free_line_is_transparent(consts):
    free = PiecewiseConstantPotential.free("line")
    c = barrier1d.barrier_coefficients(1.3, free, consts)
    assert (c.T, c.R_l, c.R_r) == (1, 0, 0)


@pytest.mark.parametrize("k", [0.3, 1.5, math.sqrt(5.0), 2.5, 9.0])
def test_square_barrier_closed_form(k, barrier, consts):
    got = barrier1d.barrier_coefficients(k, barrier, consts)
    ref = _square_barrier_t(k, 5.0, 1.0, consts)
    assert abs(got.T - ref) < 1e-12
    assert abs(got.T_r - ref) < 1e-12


@given(st.floats(0.01, 60.0))
@settings(max_examples=100, deadline=None)
def test_unitarity_and_reciprocity(k):
    pot = PiecewiseConstantPotential((-0.5, 0.2, 1.0), (0.0, 7.0, -3.0, 0.0), "line")
    c = barrier1d.barrier_coefficients(k, pot, PhysConsts())
    assert max(c.unitarity_defect()) < 1e-10
    assert abs(c.T - c.T_r) < 1e-12
    # |R_l| = |R_r| and the phase relation R_r T* + R_l* T = 0
    assert abs(c.R_r * np.conj(c.T) + np.conj(c.R_l) * c.T) < 1e-10


@pytest.mark.parametrize("k", [0.2, 1.0, 3.0, 12.0])
def test_matches_ode_oracle(k, consts):
    pot = PiecewiseConstantPotential((-0.5, 0.2, 1.0), (0.0, 7.0, -3.0, 0.0), "line")
    ref = oracles.shoot_barrier(k, pot, consts)
    got = barrier1d.barrier_coefficients(k, pot, consts)
    for name in ("T", "R_l", "R_r", "T_r"):
        assert abs(getattr(got, name) - ref[name]) < 1e-8


def test_eigenfunctions_are_smooth_solutions(barrier, consts):
    e = 3.2
    for side in ("left", "right"):
        for b in barrier.boundaries:
            lo, hi = np.array([b - 1e-10]), np.array([b + 1e-10])
            f = lambda x: barrier1d.eigenfunction_1d(x, e, side, barrier, consts)
            assert abs(f(lo)[0] - f(hi)[0]) < 1e-8
            d = lambda x: barrier1d.eigenfunction_derivative_1d(x, e, side, barrier, consts)
            assert abs(d(lo - 1e-5)[0] - d(hi + 1e-5)[0]) < 1e-3
        # the Schrodinger equation holds inside and outside the barrier
        x = np.array([-1.3, 0.4, 1.7])
        h = 1e-4
        f = lambda y: barrier1d.eigenfunction_1d(y, e, side, barrier, consts)
        d2 = (f(x + h) - 2 * f(x) + f(x - h)) / h ** 2
        resid = -consts.kinetic * d2 + barrier(x) * f(x) - e * f(x)
        assert np.max(np.abs(resid)) < 1e-5 * np.max(np.abs(e * f(x)))


def test_left_incidence_asymptotics(barrier, consts):
    k = 2.0
    c = barrier1d.barrier_coefficients(k, barrier, consts)
    x = np.array([-3.0, -1.0])
    pre = math.sqrt(consts.mass / (2 * math.pi * k * consts.hbar ** 2))
    got = barrier1d.eigenfunction_1d(x, k * k, "left", barrier, consts)
    assert np.allclose(got, pre * (np.exp(1j * k * x) + c.R_l * np.exp(-1j * k * x)), atol=1e-14)


def test_completeness(line_tfs, barrier, consts):
    e_max = barrier1d.energy_cutoff(line_tfs, consts)
    for a in line_tfs:
        for b in line_tfs:
            assert abs(barrier1d.completeness_defect_1d(a, b, e_max, barrier, consts)) < 1e-6


def test_free_parseval(consts):
    free = PiecewiseConstantPotential.free("line")
    g = make_test_function(0, 0.0, 0.3, free)
    assert abs(barrier1d.completeness_defect_1d(g, g, barrier1d.energy_cutoff([g], consts), free, consts)) < 1e-6


def test_truncation_shows_in_defect(line_tfs, barrier, consts):
    ev = line_tfs[0]
    d = abs(barrier1d.completeness_defect_1d(ev, ev, 0.01 * barrier1d.energy_cutoff([ev], consts), barrier, consts))
    assert d > 1e-3


def test_canonical_commutator(line_tfs, consts):
    for tf in line_tfs:
        d = barrier1d.commutator_check(tf, consts, detail=True)
        assert d["residual"] < 1e-10
        assert abs(d["expectation"] - 1j * consts.hbar) < 1e-10
        assert d["uncertainty_product"] >= 0.5 * consts.hbar - 1e-12


def test_gaussian_saturates_uncertainty(consts):
    g = make_test_function(0, 0.0, 0.3, PiecewiseConstantPotential.free("line"))
    assert abs(barrier1d.uncertainty_product(g, consts) - 0.5) < 1e-10


def test_delta_normalisation_smoke():
    errs = [e for _, e in barrier1d.delta_smoke_test(0.3)]
    assert max(errs) < 1e-6
    assert errs[-1] <= errs[0]


def test_validation(barrier, shell, consts):
    with pytest.raises(ValidationError):
        barrier1d.barrier_coefficients(0.0, barrier, consts)
    with pytest.raises(ValidationError):
        barrier1d.eigenfunction_1d(np.array([0.0]), -1.0, "left", barrier, consts)
    with pytest.raises(ValidationError):
        barrier1d.eigenfunction_1d(np.array([0.0]), 1.0, "up", barrier, consts)
    g = make_test_function(1, 0.5, 0.085, shell)
    with pytest.raises(ValidationError):
        barrier1d.spectral_overlap_1d(g, g, 10.0, shell, consts)
