"""Resonance poles, residues, Gamow states and decay amplitudes.

Poles of S are zeros of J+ in the lower half q-plane. They come in pairs
k_n, -conj(k_n); the member with Re k > 0 is the resonance (index n > 0),
its mirror the anti-resonance (index -n).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import radial
from .defaults import RESIDUE_NODES, RESIDUE_RADIUS
from .errors import MultiplePole, NonResonantZero, ValidationError
from .model import PhysConsts, PiecewiseConstantPotential, TestFunction, layer_kappas
from .numerics import (QuadratureSettings, Region, find_zeros, quad_interval, refine_zero,
                       trapezoid_circle)

# use the scaled Jost function when the last barrier attenuates by more than e^-8
SCALED_POLISH_MIN = 8.0
NEWTON_TOL = 1e-13
JPLUS_TOL = 1e-10


@dataclass(frozen=True)
class Resonance:
    n: int
    k: complex
    z: complex
    res_S: complex
    N_sq: complex
    jplus_abs: float = 0.0
    dJplus: complex = 0j
    res_S_contour: complex | None = None

    @property
    def E(self) -> float:
        return self.z.real

    @property
    def gamma(self) -> float:
        return -2.0 * self.z.imag

    @property
    def N(self) -> complex:
        """Principal square root of N_sq."""
        return complex(np.sqrt(self.N_sq))

    def energy_norm_sq(self, consts: PhysConsts) -> complex:
        """Normalisation squared in the energy variable: N_sq * dz/dq."""
        return self.N_sq * complex(consts.dE_dq(self.k))

    def to_dict(self) -> dict:
        return {"n": self.n, "k_re": self.k.real, "k_im": self.k.imag,
                "E": self.E, "Gamma": self.gamma,
                "res_S_re": self.res_S.real, "res_S_im": self.res_S.imag,
                "N_sq_re": self.N_sq.real, "N_sq_im": self.N_sq.imag,
                "jplus_abs": self.jplus_abs}


# ---------------------------------------------------------------------------
# Jost-function handles
# ---------------------------------------------------------------------------

def _fj(pot, consts):
    return (lambda q: radial.jplus(q, pot, consts),
            lambda q: radial.djplus(q, pot, consts))


def _scaled_parts(q, pot: PiecewiseConstantPotential, consts: PhysConsts):
    """(bracket, growth factor s, J+, J-, J+') for an array of q; J+ = s * bracket."""
    if pot.nlayers < 2:
        raise ValidationError("scaled Jost function needs an interior layer")
    q = np.asarray(q, dtype=complex)
    sw = radial._sweep(q, pot, consts)
    j = pot.nlayers - 2
    k = layer_kappas(q, pot, consts)[..., j]
    k = np.where(k.imag < 0, -k, k)          # the root that decays across the layer
    edges = radial._edges(pot)
    d = edges[j + 1] - edges[j]
    ph, dph = sw.phi[..., j], sw.dphi[..., j]
    a_amp = 0.5 * (ph + dph / (1j * k))
    b_amp = 0.5 * (ph - dph / (1j * k))
    val = a_amp * np.exp(2j * k * d) * (k - q) / (k + q) - b_amp
    s = 1j * np.exp(1j * q * pot.range) * np.exp(-1j * k * d) * (k + q)
    jp, jm, djp = radial.jost_arrays(q, pot, consts)
    dk = q / k
    dlog_s = 1j * pot.range - 1j * dk * d + (dk + 1.0) / (k + q)
    dval = djp / s - val * dlog_s
    return val, dval, s, jm


def scaled_jplus(q: complex, pot: PiecewiseConstantPotential, consts: PhysConsts):
    """J+ divided by the growth factor of the last interior layer, with its derivative.

    Writing the solution in that layer (left edge r_l, width d) as
    A e^{i kappa x} + B e^{-i kappa x},
    ``J+ = i e^{iqb} e^{-i kappa d} (kappa + q) [A e^{2 i kappa d} (kappa - q)/(kappa + q) - B]``.
    The bracket keeps its imaginary part to full relative precision when
    the layer is a thick barrier, which is what pins down tiny widths.
    """
    val, dval, _, _ = _scaled_parts(np.array(complex(q)), pot, consts)
    return complex(val), complex(dval)


def _polish(q: complex, pot, consts, max_iter: int = 30) -> complex:
    """Newton on the scaled Jost function; resolves Im k far below eps * Re k."""
    for _ in range(max_iter):
        val, dval = scaled_jplus(q, pot, consts)
        step = val / dval
        q = q - step
        if abs(step.real) <= 4e-16 * abs(q) and abs(step.imag) <= 1e-10 * abs(q.imag) + 1e-300:
            break
    return q


def _needs_scaling(q: complex, pot, consts) -> bool:
    if pot.nlayers < 2:
        return False
    kap = layer_kappas(complex(q), pot, consts)
    edges = radial._edges(pot)
    j = pot.nlayers - 2
    return abs(complex(kap[j]).imag) * (edges[j + 1] - edges[j]) > SCALED_POLISH_MIN


# ---------------------------------------------------------------------------
# residues
# ---------------------------------------------------------------------------

def residue_smatrix(res: Resonance, pot: PiecewiseConstantPotential, consts: PhysConsts,
                    check: bool = True) -> complex:
    """Residue of S at k_n as J-(k_n)/J+'(k_n), cross-checked on a small circle."""
    if res.k.imag >= 0:
        raise ValidationError(f"{res.k} is not a resonance pole (Im k must be negative)")
    jp = complex(radial.jplus(np.array(res.k), pot, consts))
    djp = complex(radial.djplus(np.array(res.k), pot, consts))
    if abs(jp) > 1e3 * jplus_tolerance(res.k, djp):
        raise ValidationError(f"J+ does not vanish at {res.k} (|J+| = {abs(jp):.3e})")
    return _make_resonance(res.n, res.k, pot, consts, check).res_S


def residue_contour(k: complex, pot, consts, radius: float = RESIDUE_RADIUS,
                    nodes: int = RESIDUE_NODES) -> complex:
    """(1/2 pi i) times the circle integral of S around k."""
    return trapezoid_circle(_s_function(k, pot, consts), k, radius, nodes) / (2j * math.pi)


def _s_function(k: complex, pot, consts):
    if _needs_scaling(k, pot, consts):
        def s(q):
            val, _, scale, jm = _scaled_parts(q, pot, consts)
            return jm / (scale * val)
        return s
    return lambda q: radial.jminus(q, pot, consts) / radial.jplus(q, pot, consts)


# ---------------------------------------------------------------------------
# pole search
# ---------------------------------------------------------------------------

def _scaled_residue(k: complex, pot, consts) -> tuple[complex, complex]:
    """Residue of S and J+' at a zero inside a thick barrier.

    At the zero the bracket of the scaled Jost function vanishes, which
    fixes B in terms of A and gives J- without the cancellation that ruins
    the direct evaluation.
    """
    q = np.array(complex(k))
    sw = radial._sweep(q, pot, consts)
    j = pot.nlayers - 2
    kap = complex(layer_kappas(q, pot, consts)[..., j])
    if kap.imag < 0:
        kap = -kap
    d = radial._edges(pot)[j + 1] - radial._edges(pot)[j]
    a_amp = 0.5 * (complex(sw.phi[..., j]) + complex(sw.dphi[..., j]) / (1j * kap))
    _, dval, scale, _ = _scaled_parts(q, pot, consts)
    k = complex(k)
    jm = np.exp(-1j * k * pot.range) * a_amp * np.exp(1j * kap * d) * 4j * k * kap / (kap + k)
    djp = complex(scale) * complex(dval)
    return complex(jm / djp), djp


def _make_resonance(n: int, k: complex, pot, consts, check: bool = True) -> Resonance:
    jp, jm, djp = (complex(x) for x in radial.jost_arrays(np.array(k), pot, consts))
    if _needs_scaling(k, pot, consts):
        r, djp = _scaled_residue(k, pot, consts)
    else:
        r = jm / djp
    if djp == 0:
        raise MultiplePole(f"J+' vanishes at {k}")
    contour = None
    if check:
        contour, noise = _contour_with_noise(k, pot, consts)
        if abs(contour - r) > 1e-4 * abs(r) + noise:
            raise MultiplePole(f"analytic residue {r} disagrees with contour residue {contour} at {k}")
    return Resonance(n, k, complex(consts.energy(k)), r, 1j * r, abs(jp), djp, contour)


def _contour_with_noise(k: complex, pot, consts, radius: float = RESIDUE_RADIUS,
                        nodes: int = RESIDUE_NODES) -> tuple[complex, float]:
    """Contour residue and its rounding floor (residues below it are unresolvable)."""
    theta = 2.0 * math.pi * np.arange(nodes) / nodes
    smax = float(np.max(np.abs(_s_function(k, pot, consts)(k + radius * np.exp(1j * theta)))))
    noise = 64.0 * np.finfo(float).eps * radius * smax
    return residue_contour(k, pot, consts, radius, nodes), noise


def _label(zeros: list[complex]) -> list[tuple[int, complex]]:
    right = sorted([z for z in zeros if z.real >= 0], key=lambda z: (z.real, z.imag))
    left = [z for z in zeros if z.real < 0]
    out = [(i + 1, z) for i, z in enumerate(right)]
    used = set()
    next_free = len(right) + 1
    for z in sorted(left, key=lambda z: (-z.real, z.imag)):
        mirror = -z.conjugate()
        match = [i for i, w in enumerate(right) if abs(w - mirror) <= 1e-8 * (1 + abs(w)) and i not in used]
        if match:
            used.add(match[0])
            out.append((-(match[0] + 1), z))
        else:
            out.append((-next_free, z))
            next_free += 1
    return out


def jplus_tolerance(k: complex, djp: complex) -> float:
    """|J+| acceptance level at a refined zero.

    Absolute 1e-10 unless the derivative is so large that one rounding
    unit in k already moves J+ past it; then the level scales with J+'.
    """
    return max(JPLUS_TOL, 64.0 * np.finfo(float).eps * abs(djp) * (1.0 + abs(k)))


def find_resonances(region: Region, pot: PiecewiseConstantPotential, consts: PhysConsts,
                    check_residues: bool = True,
                    settings: QuadratureSettings | None = None) -> list[Resonance]:
    """All zeros of J+ in ``region``, refined and certified by the argument principle."""
    radial._check_radial(pot)
    if pot.is_free:
        return []
    f, fp = _fj(pot, consts)
    # the stopping level in J+ is tied to J+' so thick barriers still converge
    scale = float(np.median(np.abs(fp(np.array(region.corners)))))
    ftol = max(JPLUS_TOL, 64.0 * np.finfo(float).eps * scale * (1.0 + abs(region.center)))
    search = find_zeros(f, fp, region, tol=NEWTON_TOL, ftol=ftol, settings=settings)
    zeros = []
    for z in search.zeros:
        if _needs_scaling(z, pot, consts):
            z = _polish(z, pot, consts)
        zeros.append(z)
    bound = [z for z in zeros if z.imag >= 0]
    if bound:
        raise NonResonantZero(f"J+ has zeros off the lower half plane: {bound}", zeros=bound)
    out = [_make_resonance(n, z, pot, consts, check_residues) for n, z in _label(zeros)]
    return sorted(out, key=lambda r: (r.k.real, r.k.imag))


def resonance_by_index(resonances: list[Resonance], n: int) -> Resonance:
    for r in resonances:
        if r.n == n:
            return r
    raise ValidationError(f"no resonance with index {n}")


def partner(res: Resonance, pot, consts) -> Resonance:
    """Anti-resonance at -conj(k_n), refined from the mirrored guess."""
    f, fp = _fj(pot, consts)
    guess = -res.k.conjugate()
    z = refine_zero(f, fp, guess, NEWTON_TOL, ftol=jplus_tolerance(guess, res.dJplus))
    if _needs_scaling(z, pot, consts):
        z = _polish(z, pot, consts)
    return _make_resonance(-res.n, z, pot, consts)


# ---------------------------------------------------------------------------
# Gamow states
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GamowState:
    """u(r) = N chi(r; k_n)/J3 inside, exactly N e^{i k_n r} outside.

    ``coeffs[j] = (a_j, b_j)`` multiply exp(+i Q_j r) and exp(-i Q_j r) in
    layer j (Q_j the layer wave number at k_n); the exterior pair is (N, 0).
    """

    resonance: Resonance
    N: complex
    Q: tuple[complex, ...]
    coeffs: tuple[tuple[complex, complex], ...]
    reg: radial.RegularCoeffs = field(repr=False)

    @property
    def exterior(self) -> complex:
        return self.coeffs[-1][0]

    def _scale(self) -> complex:
        return self.N / self.reg.J3

    def _split(self, r):
        r = np.asarray(r, dtype=float)
        return r, r >= self.reg.edges[-1]

    def u(self, r) -> np.ndarray:
        r, out = self._split(r)
        inner = self._scale() * self.reg.chi(r)
        return np.where(out, self.N * np.exp(1j * self.resonance.k * r), inner)

    def du(self, r) -> np.ndarray:
        r, out = self._split(r)
        k = self.resonance.k
        inner = self._scale() * self.reg.dchi(r)
        return np.where(out, 1j * k * self.N * np.exp(1j * k * r), inner)

    def d2u(self, r) -> np.ndarray:
        r, out = self._split(r)
        k = self.resonance.k
        inner = self._scale() * self.reg.d2chi(r)
        return np.where(out, -k * k * self.N * np.exp(1j * k * r), inner)


def gamow_state(res: Resonance, pot: PiecewiseConstantPotential, consts: PhysConsts,
                sign: int = 1) -> GamowState:
    """Gamow state of ``res``; ``sign=-1`` takes the other root of N_sq."""
    reg = radial.regular_solution(res.k, pot, consts)
    n = sign * res.N
    scale = n / reg.J3
    coeffs = [(scale * cp, scale * cm) for cp, cm in zip(reg.c_plus[:-1], reg.c_minus[:-1])]
    coeffs.append((n, 0j))
    return GamowState(res, n, reg.kappa, tuple(coeffs), reg)


def schrodinger_residual(state: GamowState, r, pot, consts) -> np.ndarray:
    """|-(hbar^2/2m) u'' + V u - z u| / |z u| at the sample radii."""
    r = np.asarray(r, dtype=float)
    u = state.u(r)
    lhs = -consts.kinetic * state.d2u(r) + pot(r) * u - state.resonance.z * u
    return np.abs(lhs) / np.abs(state.resonance.z * u)


def residue_relation_defect(res: Resonance, r_samples, pot: PiecewiseConstantPotential,
                            consts: PhysConsts, detail: bool = False):
    """Worst relative defect of the two Gamow/residue identities.

    u(r) = i sqrt(2 pi) N chi^-(r; k_n) is checked directly; u(r) equal to
    -(sqrt(2 pi)/N) times the residue of chi^+(r; q) at k_n is checked with a
    64-node circle of radius 1e-3.
    """
    r = np.asarray(r_samples, dtype=float)
    state = gamow_state(res, pot, consts)
    u = state.u(r)
    n = state.N
    root2pi = math.sqrt(2.0 * math.pi)
    chim = radial.ls_eigenfunction(r, res.k, "-", "k", pot, consts)
    d_value = np.abs(u - 1j * root2pi * n * chim) / np.abs(u)

    def chip(qs):
        qs = np.asarray(qs, dtype=complex)
        chi = radial.chi_grid(r, qs, pot, consts)          # (nodes, radii)
        jp = radial.jplus(qs, pot, consts)
        return radial.SQRT_2_OVER_PI * chi / jp[:, None]

    theta = 2.0 * math.pi * np.arange(RESIDUE_NODES) / RESIDUE_NODES
    zc = res.k + RESIDUE_RADIUS * np.exp(1j * theta)
    dz = 1j * RESIDUE_RADIUS * np.exp(1j * theta)
    residue = (chip(zc) * dz[:, None]).sum(axis=0) * (2.0 * math.pi / RESIDUE_NODES) / (2j * math.pi)
    d_res = np.abs(u + root2pi / n * residue) / np.abs(u)
    if detail:
        return {"value_relation": float(d_value.max()), "residue_relation": float(d_res.max())}
    return float(max(d_value.max(), d_res.max()))


# ---------------------------------------------------------------------------
# pairings and decay amplitudes
# ---------------------------------------------------------------------------

_PAIR_SETTINGS = QuadratureSettings(abs_tol=1e-15, rel_tol=1e-13, max_subdivisions=4000)


def gamow_pairing(tf: TestFunction, res: Resonance, role: str, pot: PiecewiseConstantPotential,
                  consts: PhysConsts, times: int = 0, state: GamowState | None = None) -> complex:
    """<phi|z_n> = int conj(phi) u (ket) or <z_n|phi> = int phi u (bra); u is never conjugated."""
    if role not in ("bra", "ket"):
        raise ValidationError("role must be 'bra' or 'ket'")
    state = state or gamow_state(res, pot, consts)
    lo, hi = tf.integration_window(abs(res.k.imag))
    w = radial._weight(tf, times, pot, consts)
    if role == "ket":
        f = lambda x: np.conj(w(x)) * state.u(x)
    else:
        f = lambda x: w(x) * state.u(x)
    brk = [b for b in pot.boundaries if lo < b < hi] + [tf.peak]
    return quad_interval(f, lo, hi, _PAIR_SETTINGS, breakpoints=brk)


def decay_amplitude_bw(E, res: Resonance, consts: PhysConsts) -> np.ndarray:
    """Breit-Wigner amplitude -(calN/sqrt(2 pi)) / (E - z_n) with the energy-plane normalisation."""
    if res.n <= 0:
        raise ValidationError("Breit-Wigner amplitude needs a resonance (n > 0)")
    big_n = np.sqrt(res.energy_norm_sq(consts))
    return -(big_n / math.sqrt(2.0 * math.pi)) / (np.asarray(E, dtype=float) - res.z)


def complex_delta_pairing(f: Callable[[complex], complex], res: Resonance) -> complex:
    """int dE f(E) delta(E - z_n) = f(z_n)."""
    return complex(f(res.z))


def complex_delta_kernel(E, z: complex) -> np.ndarray:
    """Real-line kernel whose lower-half-plane closure reproduces f(z): (i/2pi)/(E - z)."""
    return (1j / (2.0 * math.pi)) / (np.asarray(E) - z)


def complex_delta_contour_check(f: Callable[[np.ndarray], np.ndarray], z: complex,
                                half_width: float = 400.0,
                                settings: QuadratureSettings | None = None) -> complex:
    """Real-line integral of f(E) times the complex-delta kernel.

    Equals f(z) when f is analytic and decays in the lower half plane.
    """
    g = lambda e: f(e) * complex_delta_kernel(e, z)
    st = settings or QuadratureSettings(abs_tol=1e-12, rel_tol=1e-12, max_subdivisions=20000)
    brk = np.linspace(-half_width, half_width, 401)[1:-1]
    return quad_interval(g, -half_width, half_width, st, breakpoints=brk)
