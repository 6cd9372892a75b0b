"""Scattering on the full line through a layered barrier.

Left incidence:  e^{ikx} + R_l e^{-ikx} on the left, T e^{ikx} on the right.
Right incidence: e^{-ikx} + R_r e^{ikx} on the right, T e^{-ikx} on the left.
Matching uses the C/Sn layer propagator, which stays exact at E = V_j
(kappa -> 0 gives the linear solution 1, x with no special casing).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _layers
from .defaults import LOG_TAIL
from .errors import ValidationError
from .model import PhysConsts, PiecewiseConstantPotential, TestFunction, kappa_squared
from .numerics import QuadratureSettings, quad_interval


def _check_line(pot: PiecewiseConstantPotential) -> None:
    if pot.geometry != "line":
        raise ValidationError("this operation needs a full-line potential")


@dataclass(frozen=True)
class BarrierCoefficients:
    """Transmission/reflection amplitudes and interior layer amplitudes.

    ``layers_l[j]``/``layers_r[j]`` hold (A, B), the amplitudes of
    exp(+i kappa_j x) and exp(-i kappa_j x) in interior layer j for left and
    right incidence; A_l, B_l, A_r, B_r refer to the first interior layer.
    """

    k: float
    T: complex
    R_l: complex
    R_r: complex
    T_r: complex
    layers_l: tuple[tuple[complex, complex], ...]
    layers_r: tuple[tuple[complex, complex], ...]

    @property
    def A_l(self) -> complex:
        return self.layers_l[0][0] if self.layers_l else 0j

    @property
    def B_l(self) -> complex:
        return self.layers_l[0][1] if self.layers_l else 0j

    @property
    def A_r(self) -> complex:
        return self.layers_r[0][0] if self.layers_r else 0j

    @property
    def B_r(self) -> complex:
        return self.layers_r[0][1] if self.layers_r else 0j

    def unitarity_defect(self) -> tuple[float, float]:
        t2 = abs(self.T) ** 2
        return abs(t2 + abs(self.R_l) ** 2 - 1.0), abs(abs(self.T_r) ** 2 + abs(self.R_r) ** 2 - 1.0)


@dataclass
class _Sweep1D:
    k: np.ndarray
    T: np.ndarray
    R_l: np.ndarray
    T_r: np.ndarray
    R_r: np.ndarray
    # value and slope at each boundary, per incidence (..., M)
    psi_l: np.ndarray
    dpsi_l: np.ndarray
    psi_r: np.ndarray
    dpsi_r: np.ndarray


def _sweep(k, pot: PiecewiseConstantPotential, consts: PhysConsts) -> _Sweep1D:
    _check_line(pot)
    k = np.asarray(k, dtype=complex)
    xs = np.asarray(pot.boundaries, dtype=float)
    m = len(xs)
    k2 = kappa_squared(k, pot, consts)
    shape = k.shape + (max(m, 1),)
    if m == 0:
        one = np.ones(k.shape, dtype=complex)
        z = np.zeros(shape, dtype=complex)
        return _Sweep1D(k, one, 0 * one, one, 0 * one, z, z, z, z)
    # left incidence: start on the right with T = 1 and walk left
    psi_l = np.zeros(shape, dtype=complex)
    dpsi_l = np.zeros(shape, dtype=complex)
    f = np.exp(1j * k * xs[-1])
    df = 1j * k * f
    psi_l[..., -1], dpsi_l[..., -1] = f, df
    for j in range(m - 1, 0, -1):
        f, df = _layers.step(f, df, k2[..., j], xs[j - 1] - xs[j])
        psi_l[..., j - 1], dpsi_l[..., j - 1] = f, df
    x1 = xs[0]
    alpha = np.exp(-1j * k * x1) * 0.5 * (f + df / (1j * k))
    beta = np.exp(1j * k * x1) * 0.5 * (f - df / (1j * k))
    t_l = 1.0 / alpha
    psi_l *= t_l[..., None]
    dpsi_l *= t_l[..., None]
    # right incidence: start on the left with T = 1 and walk right
    psi_r = np.zeros(shape, dtype=complex)
    dpsi_r = np.zeros(shape, dtype=complex)
    f = np.exp(-1j * k * xs[0])
    df = -1j * k * f
    psi_r[..., 0], dpsi_r[..., 0] = f, df
    for j in range(1, m):
        f, df = _layers.step(f, df, k2[..., j], xs[j] - xs[j - 1])
        psi_r[..., j], dpsi_r[..., j] = f, df
    xm = xs[-1]
    gamma = np.exp(1j * k * xm) * 0.5 * (f - df / (1j * k))
    delta = np.exp(-1j * k * xm) * 0.5 * (f + df / (1j * k))
    t_r = 1.0 / gamma
    psi_r *= t_r[..., None]
    dpsi_r *= t_r[..., None]
    return _Sweep1D(k, t_l, beta * t_l, t_r, delta * t_r, psi_l, dpsi_l, psi_r, dpsi_r)


def barrier_coefficients(k: float, pot: PiecewiseConstantPotential, consts: PhysConsts) -> BarrierCoefficients:
    """T, R_l, R_r and interior amplitudes at real k > 0."""
    if not (k > 0 and math.isfinite(k)):
        raise ValidationError("k must be positive")
    sw = _sweep(np.array(complex(k)), pot, consts)
    xs = np.asarray(pot.boundaries, dtype=float)
    kap = np.sqrt(kappa_squared(complex(k), pot, consts))
    layers_l, layers_r = [], []
    for j in range(len(xs) - 1):
        kj = complex(kap[j + 1])
        for psi, dpsi, out in ((sw.psi_l, sw.dpsi_l, layers_l), (sw.psi_r, sw.dpsi_r, layers_r)):
            f, df = complex(psi[j]), complex(dpsi[j])
            if kj == 0:
                out.append((complex("nan"), complex("nan")))
                continue
            a = 0.5 * (f + df / (1j * kj)) * np.exp(-1j * kj * xs[j])
            b = 0.5 * (f - df / (1j * kj)) * np.exp(1j * kj * xs[j])
            out.append((complex(a), complex(b)))
    return BarrierCoefficients(float(k), complex(sw.T), complex(sw.R_l), complex(sw.R_r), complex(sw.T_r),
                               tuple(layers_l), tuple(layers_r))


def _prefactor(k, consts: PhysConsts):
    """(m / (2 pi k hbar^2))^{1/2}, the energy delta-normalisation."""
    return np.sqrt(consts.mass / (2.0 * math.pi * np.asarray(k) * consts.hbar ** 2))


def _waves(x, sw: _Sweep1D, side: str, pot: PiecewiseConstantPotential, consts: PhysConsts) -> np.ndarray:
    """Unnormalised scattering solution on the grid x for each k in the sweep."""
    x = np.asarray(x, dtype=float)
    k = sw.k[..., None]
    xs = np.asarray(pot.boundaries, dtype=float)
    if len(xs) == 0:
        return np.exp(1j * k * x) if side == "left" else np.exp(-1j * k * x)
    j = np.searchsorted(xs, x, side="right")              # layer index 0..M
    out = np.empty(sw.k.shape + x.shape, dtype=complex)
    if side == "left":
        inc, refl, tr = np.exp(1j * k * x), sw.R_l[..., None] * np.exp(-1j * k * x), sw.T[..., None] * np.exp(1j * k * x)
        left_part, right_part = inc + refl, tr
        psi, dpsi = sw.psi_l, sw.dpsi_l
    elif side == "right":
        inc, refl, tr = np.exp(-1j * k * x), sw.R_r[..., None] * np.exp(1j * k * x), sw.T_r[..., None] * np.exp(-1j * k * x)
        left_part, right_part = tr, inc + refl
        psi, dpsi = sw.psi_r, sw.dpsi_r
    else:
        raise ValidationError("side must be 'left' or 'right'")
    m = len(xs)
    out[...] = np.where(j == 0, left_part, right_part)
    inner = (j > 0) & (j < m)
    if np.any(inner):
        ji = j[inner]
        xi = x[inner]
        k2 = kappa_squared(sw.k, pot, consts)[..., ji]
        c, sn = _layers.cos_sinc(k2, xi - xs[ji - 1])
        out[..., inner] = c * psi[..., ji - 1] + sn * dpsi[..., ji - 1]
    return out


def eigenfunction_1d(x, E: float, side: str, pot: PiecewiseConstantPotential, consts: PhysConsts) -> np.ndarray:
    """<x|E+> for left or right incidence, delta-normalised in energy."""
    if not E > 0:
        raise ValidationError("E must be positive")
    k = math.sqrt(consts.scale * E)
    sw = _sweep(np.array([complex(k)]), pot, consts)
    return (_prefactor(k, consts) * _waves(x, sw, side, pot, consts))[0]


def eigenfunction_derivative_1d(x, E: float, side: str, pot, consts, h: float = 1e-6) -> np.ndarray:
    """Centered difference of eigenfunction_1d, used for matching diagnostics."""
    x = np.asarray(x, dtype=float)
    return (eigenfunction_1d(x + h, E, side, pot, consts) - eigenfunction_1d(x - h, E, side, pot, consts)) / (2 * h)


# ---------------------------------------------------------------------------
# completeness
# ---------------------------------------------------------------------------

_GL_N = 20
_GL_X, _GL_W = np.polynomial.legendre.leggauss(_GL_N)


def _nodes(tfs, pot: PiecewiseConstantPotential, kmax: float):
    lo = min(tf.window[0] for tf in tfs)
    hi = max(tf.window[1] for tf in tfs)
    cuts = sorted({lo, hi, *[b for b in pot.boundaries if lo < b < hi]})
    h = min(min(tf.sigma for tf in tfs) / 2.0, 3.0 / max(kmax, 1.0))
    xs, ws = [], []
    for a, b in zip(cuts[:-1], cuts[1:]):
        n = max(1, int(math.ceil((b - a) / h)))
        e = np.linspace(a, b, n + 1)
        mid, half = 0.5 * (e[1:] + e[:-1]), 0.5 * (e[1:] - e[:-1])
        xs.append((mid[:, None] + half[:, None] * _GL_X).ravel())
        ws.append((half[:, None] * _GL_W).ravel())
    return np.concatenate(xs), np.concatenate(ws)


def wavenumber_cutoff(tfs, extra: float = 0.0) -> float:
    """k beyond which the Gaussian momentum content of every test function is negligible."""
    return max((math.sqrt(2.0 * LOG_TAIL) + 2.0 + tf.p) / tf.sigma for tf in tfs) + extra


def energy_cutoff(tfs, consts: PhysConsts) -> float:
    return consts.kinetic * wavenumber_cutoff(tfs) ** 2


def spectral_overlap_1d(phi: TestFunction, psi: TestFunction, e_max: float,
                        pot: PiecewiseConstantPotential, consts: PhysConsts,
                        settings: QuadratureSettings | None = None) -> complex:
    """sum over sides of int_0^{e_max} dE <phi|E+>_s <+E|psi>_s, integrated in k."""
    _check_line(pot)
    kmax = math.sqrt(consts.scale * e_max)
    x, w = _nodes((phi, psi), pot, kmax)
    fphi = np.conj(phi(x)) * w
    fpsi = np.conj(psi(x)) * w

    def integrand(k):
        k = np.asarray(k, dtype=float)
        kc = k.astype(complex)
        sw = _sweep(kc, pot, consts)
        total = np.zeros(k.shape, dtype=complex)
        for side in ("left", "right"):
            wv = _waves(x, sw, side, pot, consts)
            a = wv @ fphi                      # <phi|E+> without prefactor
            b = np.conj(wv @ fpsi)             # <+E|psi>
            total += a * b
        # prefactor^2 dE/dk = (m/(2 pi k hbar^2)) (hbar^2 k/m) = 1/(2 pi)
        return total / (2.0 * math.pi)

    st = settings or QuadratureSettings(abs_tol=1e-13, rel_tol=1e-12, max_subdivisions=4000)
    return quad_interval(integrand, 0.0, kmax, st)


def completeness_defect_1d(phi: TestFunction, psi: TestFunction, e_max: float,
                           pot: PiecewiseConstantPotential, consts: PhysConsts,
                           settings: QuadratureSettings | None = None) -> complex:
    """(phi, psi) minus the truncated spectral sum over both incidence sides."""
    lo = min(phi.window[0], psi.window[0])
    hi = max(phi.window[1], psi.window[1])
    inner = quad_interval(lambda x: np.conj(phi(x)) * psi(x), lo, hi,
                          QuadratureSettings(abs_tol=1e-15, rel_tol=1e-13))
    return inner - spectral_overlap_1d(phi, psi, e_max, pot, consts, settings)


# ---------------------------------------------------------------------------
# canonical commutator and uncertainty
# ---------------------------------------------------------------------------

def _grid(tf: TestFunction, n: int = 4001) -> np.ndarray:
    lo, hi = tf.window
    return np.linspace(lo, hi, n)


def _inner(f, g, tf: TestFunction) -> complex:
    lo, hi = tf.window
    return quad_interval(lambda x: np.conj(f(x)) * g(x), lo, hi,
                         QuadratureSettings(abs_tol=1e-15, rel_tol=1e-13), breakpoints=[tf.peak])


def commutator_check(phi: TestFunction, consts: PhysConsts, detail: bool = False):
    """||(QP - PQ) phi - i hbar phi|| / ||phi|| with exact derivatives.

    With ``detail`` also returns <phi,(QP-PQ)phi>/<phi,phi> and the
    uncertainty product Delta Q * Delta P.
    """
    hb = consts.hbar
    qp = lambda x: -1j * hb * x * phi.deriv(x, 1)
    pq = lambda x: -1j * hb * (phi(x) + x * phi.deriv(x, 1))
    comm = lambda x: qp(x) - pq(x)
    resid = lambda x: comm(x) - 1j * hb * phi(x)
    norm2 = _inner(phi, phi, phi).real
    r = math.sqrt(abs(_inner(resid, resid, phi).real) / norm2)
    if not detail:
        return r
    expect = _inner(phi, comm, phi) / norm2
    return {"residual": r, "expectation": expect, "uncertainty_product": uncertainty_product(phi, consts)}


def uncertainty_product(phi: TestFunction, consts: PhysConsts) -> float:
    """Delta Q * Delta P for phi (normalised internally)."""
    hb = consts.hbar
    n2 = _inner(phi, phi, phi).real
    mq = _inner(phi, lambda x: x * phi(x), phi).real / n2
    mq2 = _inner(phi, lambda x: x * x * phi(x), phi).real / n2
    mp = (_inner(phi, lambda x: -1j * hb * phi.deriv(x, 1), phi) / n2)
    mp2 = (hb ** 2 * _inner(lambda x: phi.deriv(x, 1), lambda x: phi.deriv(x, 1), phi).real) / n2
    dq = math.sqrt(max(mq2 - mq * mq, 0.0))
    dp = math.sqrt(max(mp2 - abs(mp) ** 2, 0.0))
    return dq * dp


# ---------------------------------------------------------------------------
# delta normalisation of momentum eigenfunctions
# ---------------------------------------------------------------------------

def delta_smoke_test(p: float, half_widths=(10.0, 20.0, 40.0), hbar: float = 1.0,
                     width: float = 1.0, center: float = 0.0) -> list[tuple[float, float]]:
    """Errors of the smeared overlap int dp' w(p') delta_L(p - p') against w(p).

    delta_L(p - p') = (1/2 pi hbar) int_{-L}^{L} dx e^{i(p-p')x/hbar}; the
    x-integral is done by quadrature, the p'-integral by adaptive quadrature
    over the support of the Gaussian weight w.
    """
    w = lambda s: np.exp(-((s - center) / width) ** 2)
    out = []
    for L in half_widths:
        xg, wg = np.polynomial.legendre.leggauss(200)
        n_pan = max(1, int(math.ceil(2.0 * L * (abs(p - center) + 12 * width) / hbar / 20.0)))
        edges = np.linspace(-L, L, n_pan + 1)
        mid, half = 0.5 * (edges[1:] + edges[:-1]), 0.5 * (edges[1:] - edges[:-1])
        xs = (mid[:, None] + half[:, None] * xg).ravel()
        ws = (half[:, None] * wg).ravel()

        def delta_l(pp):
            pp = np.asarray(pp, dtype=float)
            ph = np.exp(1j * np.outer(p - pp, xs) / hbar)
            return (ph @ ws) / (2.0 * math.pi * hbar)

        lo, hi = center - 12 * width, center + 12 * width
        brk = np.linspace(lo, hi, 2 * int(L) + 3)[1:-1]
        val = quad_interval(lambda pp: w(pp) * delta_l(pp), lo, hi,
                            QuadratureSettings(abs_tol=1e-12, rel_tol=1e-10, max_subdivisions=20000),
                            breakpoints=brk)
        out.append((L, abs(val - w(p))))
    return out
