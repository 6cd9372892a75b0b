"""Regular solution, Jost functions, S-matrix and Lippmann-Schwinger states for l = 0.

Conventions, with phi the solution of unit slope at the origin:

* regular solution ``chi(r; q) = q phi(r)``, so chi ~ sin(q r) near r = 0
* beyond the last boundary b, ``chi = J3 e^{iqr} + J4 e^{-iqr}``
* ``J+ = -2i J4 = e^{iqb} (phi'(b) - i q phi(b))``,
  ``J- = 2i J3 = e^{-iqb} (phi'(b) + i q phi(b))``, ``S = J-/J+``

J+ and J- are entire in q, J-(q) = J+(-q), and everything is evaluated
for numpy arrays of q at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import _layers
from .defaults import POLE_PROXIMITY, THRESHOLD_Q
from .errors import AtPole, ValidationError
from .model import (EnergyPoint, PhysConsts, PiecewiseConstantPotential, TestFunction,
                    apply_hamiltonian, kappa_squared, layer_kappas, wavenumber_of_energy)
from .numerics import QuadratureSettings, quad_interval

SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)


def _check_radial(pot: PiecewiseConstantPotential) -> None:
    if pot.geometry != "radial":
        raise ValidationError("this operation needs a radial potential")


def _edges(pot: PiecewiseConstantPotential) -> np.ndarray:
    return np.concatenate([[0.0], np.asarray(pot.boundaries, dtype=float)])


# ---------------------------------------------------------------------------
# propagation
# ---------------------------------------------------------------------------

@dataclass
class _Sweep:
    q: np.ndarray
    k2: np.ndarray          # (..., L)
    phi: np.ndarray         # (..., L) unit-slope solution at each layer's left edge
    dphi: np.ndarray
    phi_q: np.ndarray | None = None
    dphi_q: np.ndarray | None = None


def _sweep(q, pot: PiecewiseConstantPotential, consts: PhysConsts, derivs: bool = False,
           flip_interior: bool = False) -> _Sweep:
    q = np.asarray(q, dtype=complex)
    k2 = kappa_squared(q, pot, consts)
    kap = layer_kappas(q, pot, consts)
    if flip_interior:
        kap = kap.copy()
        kap[..., :-1] *= -1.0
    edges = _edges(pot)
    L = pot.nlayers
    phi = np.zeros(q.shape + (L,), dtype=complex)
    dphi = np.zeros_like(phi)
    dphi[..., 0] = 1.0
    if derivs:
        phi_q = np.zeros_like(phi)
        dphi_q = np.zeros_like(phi)
    for j in range(L - 1):
        width = edges[j + 1] - edges[j]
        if derivs:
            out = _layers.step_with_derivative(phi[..., j], dphi[..., j], phi_q[..., j], dphi_q[..., j],
                                               q, k2[..., j], width, kap[..., j])
            phi[..., j + 1], dphi[..., j + 1], phi_q[..., j + 1], dphi_q[..., j + 1] = out
        else:
            phi[..., j + 1], dphi[..., j + 1] = _layers.step(phi[..., j], dphi[..., j], k2[..., j],
                                                             width, kap[..., j])
    if derivs:
        return _Sweep(q, k2, phi, dphi, phi_q, dphi_q)
    return _Sweep(q, k2, phi, dphi)


def jminus_at_edge(q, b: float, phi_b, dphi_b):
    """J- = e^{-iqb} (phi'(b) + i q phi(b)) from the unit-slope solution at the last boundary."""
    return np.exp(-1j * q * b) * (dphi_b + 1j * q * phi_b)


def jost_arrays(q, pot: PiecewiseConstantPotential, consts: PhysConsts, derivs: bool = True,
                flip_interior: bool = False):
    """(J+, J-, dJ+/dq) for an array of wave numbers."""
    _check_radial(pot)
    q = np.asarray(q, dtype=complex)
    sw = _sweep(q, pot, consts, derivs, flip_interior)
    b = pot.range
    ph, dph = sw.phi[..., -1], sw.dphi[..., -1]
    ep = np.exp(1j * q * b)
    jp = ep * (dph - 1j * q * ph)
    jm = jminus_at_edge(q, b, ph, dph)
    if not derivs:
        return jp, jm, None
    djp = 1j * b * jp + ep * (sw.dphi_q[..., -1] - 1j * ph - 1j * q * sw.phi_q[..., -1])
    return jp, jm, djp


def jplus(q, pot: PiecewiseConstantPotential, consts: PhysConsts) -> np.ndarray:
    return jost_arrays(q, pot, consts, derivs=False)[0]


def jminus(q, pot: PiecewiseConstantPotential, consts: PhysConsts) -> np.ndarray:
    return jost_arrays(q, pot, consts, derivs=False)[1]


def djplus(q, pot: PiecewiseConstantPotential, consts: PhysConsts) -> np.ndarray:
    return jost_arrays(q, pot, consts)[2]


# ---------------------------------------------------------------------------
# regular solution
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RegularCoeffs:
    """Layer data of the regular solution at one wave number.

    ``c_plus[j]``, ``c_minus[j]`` are the amplitudes of exp(+-i kappa_j r)
    (measured from r = 0) in layer j; the exterior pair is (J3, J4).
    """

    q: complex
    kappa: tuple[complex, ...]
    edges: tuple[float, ...]
    phi: tuple[complex, ...]      # unit-slope solution at left edges
    dphi: tuple[complex, ...]
    threshold: bool = False
    pot: PiecewiseConstantPotential | None = None
    consts: PhysConsts | None = None

    @property
    def c_plus(self) -> tuple[complex, ...]:
        out = []
        for k, r0, f, df in zip(self.kappa, self.edges, self.phi, self.dphi):
            out.append(complex(self.q * 0.5 * (f + df / (1j * k)) * np.exp(-1j * k * r0)))
        return tuple(out)

    @property
    def c_minus(self) -> tuple[complex, ...]:
        out = []
        for k, r0, f, df in zip(self.kappa, self.edges, self.phi, self.dphi):
            out.append(complex(self.q * 0.5 * (f - df / (1j * k)) * np.exp(1j * k * r0)))
        return tuple(out)

    @property
    def J3(self) -> complex:
        b, q = self.edges[-1], self.q
        return complex(np.exp(-1j * q * b) * (q * self.phi[-1] - 1j * self.dphi[-1]) / 2)

    @property
    def J4(self) -> complex:
        b, q = self.edges[-1], self.q
        return complex(np.exp(1j * q * b) * (q * self.phi[-1] + 1j * self.dphi[-1]) / 2)

    def _locate(self, r):
        r = np.asarray(r, dtype=float)
        if np.any(r < 0):
            raise ValidationError("radii must be non-negative")
        j = np.searchsorted(np.asarray(self.edges), r, side="right") - 1
        return r, j

    def unit(self, r, order: int = 0) -> np.ndarray:
        """Unit-slope solution (order 0) or its r-derivative (order 1)."""
        r, j = self._locate(r)
        k2 = np.asarray(self.kappa, dtype=complex) ** 2
        x = r - np.asarray(self.edges)[j]
        c, sn = _layers.cos_sinc(k2[j], x)
        f0, d0 = np.asarray(self.phi)[j], np.asarray(self.dphi)[j]
        if order == 0:
            return c * f0 + sn * d0
        return -k2[j] * sn * f0 + c * d0

    def chi(self, r) -> np.ndarray:
        return self.q * self.unit(r)

    def dchi(self, r) -> np.ndarray:
        return self.q * self.unit(r, 1)

    def d2chi(self, r) -> np.ndarray:
        r, j = self._locate(r)
        k2 = np.asarray(self.kappa, dtype=complex) ** 2
        return -k2[j] * self.chi(r)


def regular_solution(q: complex, pot: PiecewiseConstantPotential, consts: PhysConsts,
                     flip_interior: bool = False) -> RegularCoeffs:
    """Layer amplitudes of chi(r; q), the solution with chi(0) = 0, chi'(0) = q."""
    _check_radial(pot)
    q = complex(q)
    sw = _sweep(np.array(q), pot, consts, flip_interior=flip_interior)
    kap = layer_kappas(q, pot, consts)
    if flip_interior:
        kap = kap.copy()
        kap[:-1] *= -1.0
    return RegularCoeffs(q, tuple(complex(k) for k in kap), tuple(_edges(pot)[: pot.nlayers]),
                         tuple(complex(x) for x in sw.phi), tuple(complex(x) for x in sw.dphi),
                         abs(q) < THRESHOLD_Q, pot, consts)


def chi_grid(r, q, pot: PiecewiseConstantPotential, consts: PhysConsts) -> np.ndarray:
    """chi(r; q) for every pair: result has shape q.shape + r.shape."""
    _check_radial(pot)
    q = np.asarray(q, dtype=complex)
    r = np.asarray(r, dtype=float)
    sw = _sweep(q, pot, consts)
    edges = _edges(pot)
    j = np.searchsorted(edges, r, side="right") - 1
    x = r - edges[j]
    k2 = sw.k2[..., j]                    # q.shape + r.shape
    c, sn = _layers.cos_sinc(k2, x)
    qb = q.reshape(q.shape + (1,) * r.ndim)
    return qb * (c * sw.phi[..., j] + sn * sw.dphi[..., j])


# ---------------------------------------------------------------------------
# Jost data and S-matrix
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class JostData:
    q: complex
    J3: complex
    J4: complex
    Jplus: complex
    Jminus: complex
    S: complex
    dJplus: complex
    threshold: bool = False


def jost(q: complex, pot: PiecewiseConstantPotential, consts: PhysConsts) -> JostData:
    q = complex(q)
    jp, jm, djp = (complex(x) for x in jost_arrays(np.array(q), pot, consts))
    s = jm / jp if jp != 0 else complex("nan")
    return JostData(q, jm / 2j, 1j * jp / 2, jp, jm, s, djp, abs(q) < THRESHOLD_Q)


def _as_wavenumber(e, consts: PhysConsts) -> complex:
    if isinstance(e, EnergyPoint):
        return wavenumber_of_energy(e, consts)
    return complex(e)


def smatrix(e, pot: PiecewiseConstantPotential, consts: PhysConsts) -> complex:
    """S at an EnergyPoint or at a wave number."""
    q = _as_wavenumber(e, consts)
    jp, jm, _ = jost_arrays(np.array(q), pot, consts, derivs=False)
    jp, jm = complex(jp), complex(jm)
    if abs(jp) <= POLE_PROXIMITY * max(1.0, abs(jm)):
        raise AtPole(f"|J+({q})| = {abs(jp):.3e} is at the pole-proximity floor")
    return jm / jp


def smatrix_scan(energies, pot: PiecewiseConstantPotential, consts: PhysConsts):
    """S(E) and the continuously unwrapped phase shift along increasing real energies."""
    e = np.asarray(energies, dtype=float)
    if np.any(e <= 0):
        raise ValidationError("scan energies must be positive")
    if np.any(np.diff(e) <= 0):
        raise ValidationError("scan energies must be increasing")
    k = np.sqrt(consts.scale * e)
    jp, jm, _ = jost_arrays(k.astype(complex), pot, consts, derivs=False)
    s = jm / jp
    delta = 0.5 * np.unwrap(np.angle(s))
    return s, delta


# ---------------------------------------------------------------------------
# Lippmann-Schwinger eigenfunctions and pairings
# ---------------------------------------------------------------------------

def _norm_factor(q, norm: str, consts: PhysConsts):
    if norm == "k":
        return SQRT_2_OVER_PI
    if norm == "E":
        return SQRT_2_OVER_PI / np.sqrt(consts.dE_dq(np.asarray(q, dtype=complex)))
    raise ValidationError("norm must be 'k' or 'E'")


def _check_sign(sign: str) -> None:
    if sign not in ("+", "-"):
        raise ValidationError("sign must be '+' or '-'")


def ls_eigenfunction(r, e, sign: str, norm: str, pot: PiecewiseConstantPotential,
                     consts: PhysConsts) -> np.ndarray:
    """chi^{+-}(r) = factor * chi(r; q) / J_{+-}(q); factor sqrt(2/pi) for k-normalisation."""
    _check_sign(sign)
    q = _as_wavenumber(e, consts)
    jp, jm = (complex(x) for x in jost_arrays(np.array(q), pot, consts, derivs=False)[:2])
    j = jp if sign == "+" else jm
    if abs(j) <= POLE_PROXIMITY * max(1.0, abs(jp), abs(jm)):
        raise AtPole(f"J{sign}({q}) vanishes")
    reg = regular_solution(q, pot, consts)
    return complex(_norm_factor(q, norm, consts)) * reg.chi(r) / j


_PAIR_SETTINGS = QuadratureSettings(abs_tol=1e-15, rel_tol=1e-13, max_subdivisions=4000)


def _weight(tf: TestFunction, times: int, pot, consts) -> Callable[[np.ndarray], np.ndarray]:
    if times == 0:
        return tf
    return lambda x: apply_hamiltonian(tf, pot, consts, times, x)


def ls_pairing(tf: TestFunction, q, sign: str, role: str, pot: PiecewiseConstantPotential,
               consts: PhysConsts, norm: str = "k", times: int = 0,
               settings: QuadratureSettings | None = None) -> complex:
    """Ket <phi|q+-> = int conj(phi) chi^{+-} or bra <+-q|phi> = int phi chi^{-+}.

    ``times`` applies H to phi first (0, 1 or 2). The integral is cut where
    the Gaussian tail times exp(|Im q| r) drops below the tail level.
    """
    _check_sign(sign)
    if role not in ("bra", "ket"):
        raise ValidationError("role must be 'bra' or 'ket'")
    q = _as_wavenumber(q, consts)
    jp, jm = (complex(x) for x in jost_arrays(np.array(q), pot, consts, derivs=False)[:2])
    use_plus = (sign == "+") == (role == "ket")
    j = jp if use_plus else jm
    if abs(j) <= POLE_PROXIMITY * max(1.0, abs(jp), abs(jm)):
        raise AtPole(f"Jost function vanishes at q={q}")
    lo, hi = tf.integration_window(abs(q.imag))
    reg = regular_solution(q, pot, consts)
    w = _weight(tf, times, pot, consts)
    if role == "ket":
        f = lambda x: np.conj(w(x)) * reg.chi(x)
    else:
        f = lambda x: w(x) * reg.chi(x)
    brk = [b for b in pot.boundaries if lo < b < hi] + [tf.peak]
    val = quad_interval(f, lo, hi, settings or _PAIR_SETTINGS, breakpoints=brk)
    return complex(_norm_factor(q, norm, consts)) * val / j


# fixed composite rule for many wave numbers at once
_GL_N = 20
_GL_X, _GL_W = np.polynomial.legendre.leggauss(_GL_N)


def pairing_nodes(tf: TestFunction, pot: PiecewiseConstantPotential, gamma: float,
                  qmax: float) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes and weights covering the pairing window."""
    lo, hi = tf.integration_window(gamma)
    cuts = [lo] + [b for b in pot.boundaries if lo < b < hi] + [hi]
    h = min(tf.sigma / 2.0, 3.0 / max(qmax, 1.0))
    xs, ws = [], []
    for a, b in zip(cuts[:-1], cuts[1:]):
        n = max(1, int(math.ceil((b - a) / h)))
        e = np.linspace(a, b, n + 1)
        mid = 0.5 * (e[1:] + e[:-1])
        half = 0.5 * (e[1:] - e[:-1])
        xs.append((mid[:, None] + half[:, None] * _GL_X).ravel())
        ws.append((half[:, None] * _GL_W).ravel())
    return np.concatenate(xs), np.concatenate(ws)


def regular_integrals(tf: TestFunction, q, pot: PiecewiseConstantPotential, consts: PhysConsts,
                      conjugate: bool, times: int = 0) -> np.ndarray:
    """int w(r) chi(r; q) dr for an array of q, with w = phi or conj(phi) (or H^times phi)."""
    q = np.asarray(q, dtype=complex)
    gamma = float(np.max(np.abs(q.imag))) if q.size else 0.0
    qmax = float(np.max(np.abs(np.sqrt(kappa_squared(q, pot, consts))))) if q.size else 1.0
    x, w = pairing_nodes(tf, pot, gamma, qmax)
    f = _weight(tf, times, pot, consts)(x)
    if conjugate:
        f = np.conj(f)
    out = np.empty(q.shape, dtype=complex)
    flat_q = q.ravel()
    flat = out.ravel()
    block = max(1, 400000 // len(x))
    for s in range(0, len(flat_q), block):
        chi = chi_grid(x, flat_q[s:s + block], pot, consts)
        flat[s:s + block] = chi @ (w * f)
    return flat.reshape(q.shape)


# ---------------------------------------------------------------------------
# growth bounds
# ---------------------------------------------------------------------------

@dataclass
class GrowthReport:
    ok: bool
    constant: float                      # fitted C in |chi| <= C |q|r/(1+|q|r) e^{|Im q| r}
    margin: float                        # C_allowed / C_fitted for a second sample set
    violating_radius: float | None
    inv_jplus_max: float                 # max 1/|J+| on the upper-half-plane grid
    inv_jplus_argmax: complex


def growth_bound_check(q: complex, r_samples, pot: PiecewiseConstantPotential, consts: PhysConsts,
                       uhp_re: float = 5.0, uhp_im: float = 3.0, n_grid: int = 61) -> GrowthReport:
    """Fit C in |chi(r;q)| <= C (|q| r/(1+|q| r)) e^{|Im q| r} and bound 1/|J+| in Im q >= 0.

    The constant is fitted on the even-indexed samples and checked on the
    odd-indexed ones (with a factor 2 slack); the whole-set fit is reported.
    """
    q = complex(q)
    r = np.sort(np.asarray(r_samples, dtype=float))
    if r.size < 2 or np.any(r <= 0):
        raise ValidationError("growth check needs at least two positive radii")
    reg = regular_solution(q, pot, consts)
    ratio = np.abs(reg.chi(r)) / ((abs(q) * r / (1 + abs(q) * r)) * np.exp(abs(q.imag) * r))
    c_fit = float(ratio[::2].max())
    bad = np.nonzero(ratio[1::2] > 2.0 * c_fit)[0]
    violating = float(r[1::2][bad[0]]) if bad.size else None
    margin = float(2.0 * c_fit / ratio[1::2].max()) if ratio[1::2].max() > 0 else math.inf
    xs = np.linspace(-uhp_re, uhp_re, n_grid)
    ys = np.linspace(0.0, uhp_im, n_grid)
    grid = xs[None, :] + 1j * ys[:, None]
    inv = 1.0 / np.abs(jplus(grid, pot, consts))
    i = np.unravel_index(np.argmax(inv), inv.shape)
    inv_max = float(inv[i])
    ok = violating is None and math.isfinite(inv_max)
    return GrowthReport(ok, float(ratio.max()), margin, violating, inv_max, complex(grid[i]))
