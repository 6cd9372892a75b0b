"""Spectral completeness, direct transition amplitudes and regulated resonance expansions.

In the wave-number variable the transition amplitude is

    A(t) = int_0^inf F(k) dk,
    F(k) = (2/pi) e^{-i hbar k^2 t / 2m} a(k) b(k) / (J+(k) J-(k)),

with a = int conj(phi-) chi and b = int phi+ chi. F is meromorphic with
poles at the zeros of J+ in the lower half plane. Rotating the path onto
the ray k = tau e^{i theta} (-pi/2 < theta < 0), where the time factor
decays like a Gaussian, picks up -2 pi i Res F at every pole swept over;
that residue equals e^{-i z_n t/hbar} <phi-|z_n><z_n|phi+>.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import radial
from .barrier1d import wavenumber_cutoff
from .defaults import DOMINANCE, RAY_ANGLE, TAIL_LEVEL
from .errors import TruncationFailure, TZeroRejected, ValidationError
from .model import PhysConsts, PiecewiseConstantPotential, TestFunction
from .numerics import (LegendrePanels, QuadratureSettings, Region, legendre_panels, quad_interval,
                       quad_interval_err)
from .resonance import Resonance, find_resonances, gamow_pairing, gamow_state

TWO_OVER_PI = 2.0 / math.pi

# pole search box for expansions: poles beyond it contribute below e^-40 at t >= 1
EXPANSION_REGION = Region(1e-3, 25.0, -3.0, -1e-8)


@dataclass(frozen=True)
class BackgroundContour:
    """Ray q = tau e^{i ray_angle}, 0 <= tau <= t_max, in the lower half q-plane.

    ``t_max`` is the truncation of tau; None picks it from the Gaussian
    decay of the integrand at the requested time.
    """

    ray_angle: float = RAY_ANGLE
    t_max: float | None = None
    settings: QuadratureSettings = field(
        default_factory=lambda: QuadratureSettings(abs_tol=1e-14, rel_tol=1e-12, max_subdivisions=4000))
    tail_level: float = TAIL_LEVEL

    def __post_init__(self):
        if not (-math.pi / 2 < self.ray_angle < 0):
            raise ValidationError("ray_angle must lie strictly between -pi/2 and 0")
        if self.t_max is not None and not self.t_max > 0:
            raise ValidationError("t_max must be positive")

    @property
    def direction(self) -> complex:
        return complex(math.cos(self.ray_angle), math.sin(self.ray_angle))


@dataclass
class ExpansionReport:
    t: float
    resonance_terms: list[tuple[int, complex]]
    background: complex
    total: complex
    direct: complex
    defect: float
    background_error: float = 0.0
    ray_angle: float = RAY_ANGLE
    t_max: float = 0.0

    def to_dict(self) -> dict:
        return {"t": self.t,
                "resonance_terms": [{"n": n, "re": v.real, "im": v.imag} for n, v in self.resonance_terms],
                "background": {"re": self.background.real, "im": self.background.imag},
                "total": {"re": self.total.real, "im": self.total.imag},
                "direct": {"re": self.direct.real, "im": self.direct.imag},
                "defect": self.defect, "background_error": self.background_error,
                "ray_angle": self.ray_angle, "t_max": self.t_max}


@dataclass
class DecaySeries:
    times: np.ndarray
    survival: np.ndarray
    fitted_gamma: float | None
    fit_window: tuple[float, float] | None
    dominance: np.ndarray | None = None       # |term_1| / |everything else|
    fit_error: str | None = None


# ---------------------------------------------------------------------------
# spectral data for a pair of test functions
# ---------------------------------------------------------------------------

class SpectralPair:
    """Cached spectral quantities for <phi-| e^{-iHt/hbar} |phi+>."""

    def __init__(self, phi_minus: TestFunction, phi_plus: TestFunction,
                 pot: PiecewiseConstantPotential, consts: PhysConsts,
                 panel_tol: float = 1e-13):
        radial._check_radial(pot)
        self.phi_minus = phi_minus
        self.phi_plus = phi_plus
        self.pot = pot
        self.consts = consts
        self.panel_tol = panel_tol
        self._gamow: dict[tuple[int, complex], tuple[complex, complex]] = {}

    # F without its time factor --------------------------------------------
    def g_k(self, k) -> np.ndarray:
        """(2/pi) a(k) b(k) / (J+(k) J-(k)) for an array of wave numbers."""
        k = np.asarray(k, dtype=complex)
        a = radial.regular_integrals(self.phi_minus, k, self.pot, self.consts, conjugate=True)
        b = radial.regular_integrals(self.phi_plus, k, self.pot, self.consts, conjugate=False)
        jp, jm, _ = radial.jost_arrays(k, self.pot, self.consts, derivs=False)
        return TWO_OVER_PI * a * b / (jp * jm)

    def h_e(self, e) -> np.ndarray:
        """Energy density <phi-|E-> S(E) <+E|phi+> on the positive axis."""
        e = np.asarray(e, dtype=float)
        k = np.sqrt(self.consts.scale * e)
        with np.errstate(invalid="ignore", divide="ignore"):
            out = self.g_k(k) / self.consts.dE_dq(k)
        return np.where(e > 0, out, 0.0)

    @cached_property
    def k_max(self) -> float:
        return wavenumber_cutoff((self.phi_minus, self.phi_plus))

    @cached_property
    def e_max(self) -> float:
        return self.consts.kinetic * self.k_max ** 2

    @cached_property
    def panels(self) -> LegendrePanels:
        """Piecewise-Legendre model of h(E) on [0, e_max]; reused for every t."""
        return legendre_panels(self.h_e, 0.0, self.e_max, tol=self.panel_tol)

    # amplitudes ---------------------------------------------------------------
    def direct(self, t) -> np.ndarray:
        """int_0^{e_max} dE e^{-iEt/hbar} h(E) for each t (exact per panel)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return self.panels.fourier(t / self.consts.hbar)

    def ray_envelope_tmax(self, t: float, contour: BackgroundContour) -> float:
        """tau where the time factor times the pairing growth falls below the tail level."""
        s = math.sin(-2.0 * contour.ray_angle)
        alpha = self.consts.hbar * t / (2.0 * self.consts.mass) * s
        sin_t = abs(math.sin(contour.ray_angle))
        growth2 = 0.25 * (self.phi_minus.sigma ** 2 + self.phi_plus.sigma ** 2) * sin_t ** 2
        growth1 = (self.phi_minus.window[1] + self.phi_plus.window[1]) * sin_t
        quad = alpha - growth2
        if quad <= 0:
            raise TruncationFailure(
                f"time factor does not dominate the pairing growth on the ray at t={t} "
                f"(angle {contour.ray_angle:.3f}); no truncation exists")
        drop = -math.log(contour.tail_level) + 10.0
        return (growth1 + math.sqrt(growth1 ** 2 + 4 * quad * drop)) / (2 * quad)

    def ray_integral(self, t: float, contour: BackgroundContour) -> tuple[complex, float, float]:
        """(integral along the ray, error estimate, tau truncation)."""
        w = contour.direction
        tau_max = contour.t_max if contour.t_max is not None else self.ray_envelope_tmax(t, contour)
        c = self.consts.hbar * t / (2.0 * self.consts.mass)

        def f(tau):
            q = tau * w
            return self.g_k(q) * np.exp(-1j * c * q * q) * w

        brk = _ray_breaks(tau_max, c, contour.ray_angle)
        val, err = quad_interval_err(f, 0.0, tau_max, contour.settings, brk)
        return val, err, tau_max

    def gamow_product(self, res: Resonance) -> complex:
        """<phi-|z_n><z_n|phi+> (time independent, cached)."""
        key = (res.n, res.k)
        if key not in self._gamow:
            st = gamow_state(res, self.pot, self.consts)
            ket = gamow_pairing(self.phi_minus, res, "ket", self.pot, self.consts, state=st)
            bra = gamow_pairing(self.phi_plus, res, "bra", self.pot, self.consts, state=st)
            self._gamow[key] = (ket, bra)
        ket, bra = self._gamow[key]
        return ket * bra

    def resonance_term(self, res: Resonance, t: float) -> complex:
        return complex(np.exp(-1j * res.z * t / self.consts.hbar)) * self.gamow_product(res)


def _ray_breaks(tau_max: float, c: float, angle: float) -> list[float]:
    # the time factor has width ~ 1/sqrt(c sin 2|angle|); split there so GK sees its scale
    width = 1.0 / math.sqrt(max(c * math.sin(-2.0 * angle), 1e-300))
    return [x for x in (width * np.array([0.25, 0.5, 1.0, 2.0, 4.0])) if 0 < x < tau_max]


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------

def completeness_defect_radial(phi: TestFunction, psi: TestFunction, e_max: float | None,
                               pot: PiecewiseConstantPotential, consts: PhysConsts,
                               settings: QuadratureSettings | None = None) -> complex:
    """(phi, psi) - int_0^{e_max} dE <phi|E+><+E|psi>, integrated adaptively in k."""
    radial._check_radial(pot)
    if e_max is None:
        e_max = consts.kinetic * wavenumber_cutoff((phi, psi)) ** 2
    kmax = math.sqrt(consts.scale * e_max)

    def integrand(k):
        k = np.asarray(k, dtype=complex)
        a = radial.regular_integrals(phi, k, pot, consts, conjugate=True)
        b = radial.regular_integrals(psi, k, pot, consts, conjugate=True)
        jp = radial.jplus(k, pot, consts)
        # <phi|k+> <+k|psi> with <+k|psi> = conj(<psi|k+>) on the real axis
        return TWO_OVER_PI * (a / jp) * np.conj(b / jp)

    st = settings or QuadratureSettings(abs_tol=1e-13, rel_tol=1e-12, max_subdivisions=4000)
    spectral = quad_interval(integrand, 0.0, kmax, st, breakpoints=_resonance_breaks(pot, consts, kmax))
    lo = min(phi.window[0], psi.window[0])
    hi = max(phi.window[1], psi.window[1])
    inner = quad_interval(lambda x: np.conj(phi(x)) * psi(x), lo, hi,
                          QuadratureSettings(abs_tol=1e-15, rel_tol=1e-13), breakpoints=[phi.peak, psi.peak])
    return inner - spectral


def _resonance_breaks(pot, consts, kmax: float) -> list[float]:
    """Real parts of narrow poles, so adaptive quadrature starts with them as nodes."""
    if pot.is_free:
        return []
    try:
        res = find_resonances(Region(1e-3, min(kmax, 12.0), -0.2, -1e-8), pot, consts, check_residues=False)
    except Exception:          # breakpoints are only a hint
        return []
    return [r.k.real for r in res if 0 < r.k.real < kmax]


def transition_amplitude_direct(phi_minus: TestFunction, phi_plus: TestFunction, t,
                                pot: PiecewiseConstantPotential, consts: PhysConsts,
                                pair: SpectralPair | None = None):
    """int_0^inf dE e^{-iEt/hbar} <phi-|E-> S(E) <+E|phi+>; scalar t gives a complex."""
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(ts < 0):
        raise ValidationError("t must be non-negative")
    pair = pair or SpectralPair(phi_minus, phi_plus, pot, consts)
    out = pair.direct(ts)
    return complex(out[0]) if np.ndim(t) == 0 else out


def expansion_resonances(pot, consts, region: Region = EXPANSION_REGION) -> list[Resonance]:
    return [r for r in find_resonances(region, pot, consts) if r.n > 0]


def resonance_expansion(phi_minus: TestFunction, phi_plus: TestFunction, t: float, n_res: int | None,
                        contour: BackgroundContour, pot: PiecewiseConstantPotential, consts: PhysConsts,
                        resonances: list[Resonance] | None = None,
                        pair: SpectralPair | None = None) -> ExpansionReport:
    """Resonance sum over the poles swept by the ray plus the ray (background) integral."""
    if not t > 0:
        raise TZeroRejected("the regulated expansion holds for t > 0 only")
    pair = pair or SpectralPair(phi_minus, phi_plus, pot, consts)
    if resonances is None:
        resonances = [] if pot.is_free else expansion_resonances(pot, consts)
    swept = sorted((r for r in resonances if r.n > 0 and math.atan2(r.k.imag, r.k.real) > contour.ray_angle),
                   key=lambda r: r.n)
    if n_res is not None:
        if n_res > len(swept):
            raise ValidationError(f"n_res={n_res} exceeds the {len(swept)} poles swept by the ray")
        swept = swept[:n_res]
    for r in resonances:
        gap = abs(math.atan2(r.k.imag, r.k.real) - contour.ray_angle) * abs(r.k)
        if r.n > 0 and gap < 1e-6:
            raise ValidationError(f"pole {r.k} lies on the background ray")
    terms = [(r.n, pair.resonance_term(r, t)) for r in swept]
    bg, bg_err, tau_max = pair.ray_integral(t, contour)
    total = sum((v for _, v in terms), 0j) + bg
    direct = complex(pair.direct(t)[0])
    return ExpansionReport(float(t), terms, bg, total, direct, abs(total - direct), bg_err,
                           contour.ray_angle, tau_max)


def refinement_ladder(phi_minus: TestFunction, phi_plus: TestFunction, t: float,
                      pot: PiecewiseConstantPotential, consts: PhysConsts,
                      levels=((1e-3, 1e-5), (1e-6, 1e-8), (TAIL_LEVEL, 1e-12)),
                      resonances: list[Resonance] | None = None,
                      pair: SpectralPair | None = None) -> list[ExpansionReport]:
    """Expansion reports with growing ray truncation and tightening tolerances."""
    pair = pair or SpectralPair(phi_minus, phi_plus, pot, consts)
    out = []
    for tail, tol in levels:
        st = QuadratureSettings(abs_tol=tol * 1e-2, rel_tol=tol, max_subdivisions=4000)
        base = BackgroundContour(RAY_ANGLE, None, st, tail)
        tau = pair.ray_envelope_tmax(t, base) if tail == TAIL_LEVEL else _tau_for_level(pair, t, base)
        out.append(resonance_expansion(phi_minus, phi_plus, t, None, BackgroundContour(RAY_ANGLE, tau, st),
                                       pot, consts, resonances, pair))
    return out


def _poles_between(resonances, a: float, b: float) -> list[Resonance]:
    lo, hi = min(a, b), max(a, b)
    return [r for r in resonances if r.n > 0 and lo < math.atan2(r.k.imag, r.k.real) < hi]


def rotation_defect(phi_minus: TestFunction, phi_plus: TestFunction, t: float, angles: tuple[float, float],
                    pot: PiecewiseConstantPotential, consts: PhysConsts,
                    resonances: list[Resonance] | None = None, pair: SpectralPair | None = None) -> float:
    """|total(angle_a) - total(angle_b)| for two rays with no pole between them."""
    pair = pair or SpectralPair(phi_minus, phi_plus, pot, consts)
    if resonances is None:
        resonances = [] if pot.is_free else expansion_resonances(pot, consts)
    if _poles_between(resonances, *angles):
        raise ValidationError("a pole lies between the two ray angles")
    a, b = (resonance_expansion(phi_minus, phi_plus, t, None, BackgroundContour(x), pot, consts, resonances, pair)
            for x in angles)
    return abs(a.total - b.total)


def pole_crossing_defect(phi_minus: TestFunction, phi_plus: TestFunction, t: float, angles: tuple[float, float],
                         pot: PiecewiseConstantPotential, consts: PhysConsts,
                         resonances: list[Resonance] | None = None,
                         pair: SpectralPair | None = None) -> tuple[float, list[int]]:
    """Change of background between two rays plus the terms of the poles crossed.

    Returns the absolute mismatch and the indices of the crossed poles.
    """
    pair = pair or SpectralPair(phi_minus, phi_plus, pot, consts)
    if resonances is None:
        resonances = [] if pot.is_free else expansion_resonances(pot, consts)
    shallow, steep = max(angles), min(angles)
    crossed = _poles_between(resonances, shallow, steep)
    a = resonance_expansion(phi_minus, phi_plus, t, None, BackgroundContour(shallow), pot, consts, resonances, pair)
    b = resonance_expansion(phi_minus, phi_plus, t, None, BackgroundContour(steep), pot, consts, resonances, pair)
    terms = dict(b.resonance_terms)
    swept = sum((terms[r.n] for r in crossed), 0j)
    return abs((b.background - a.background) + swept), sorted(r.n for r in crossed)


def _tau_for_level(pair: SpectralPair, t: float, contour: BackgroundContour) -> float:
    """tau where the Gaussian time factor alone drops to the contour's tail level."""
    c = pair.consts.hbar * t / (2.0 * pair.consts.mass) * math.sin(-2.0 * contour.ray_angle)
    return math.sqrt(-math.log(contour.tail_level) / c)


# ---------------------------------------------------------------------------
# decay
# ---------------------------------------------------------------------------

def survival_series(phi: TestFunction, times, pot: PiecewiseConstantPotential, consts: PhysConsts,
                    resonances: list[Resonance] | None = None,
                    contour: BackgroundContour | None = None,
                    dominance: float = DOMINANCE,
                    pair: SpectralPair | None = None) -> DecaySeries:
    """Survival amplitude (phi, e^{-iHt/hbar} phi) and the decay rate on the dominance window.

    The window is the longest run of grid times t > 0 where the leading
    resonance term exceeds ``dominance`` times the sum of all other terms
    and the background.
    """
    times = np.asarray(times, dtype=float)
    if np.any(times < 0):
        raise ValidationError("times must be non-negative")
    pair = pair or SpectralPair(phi, phi, pot, consts)
    surv = pair.direct(times)
    contour = contour or BackgroundContour()
    if resonances is None:
        resonances = [] if pot.is_free else expansion_resonances(pot, consts)
    if not resonances:
        return DecaySeries(times, surv, None, None, None, "FitWindowEmpty: no resonances")
    lead = min((r for r in resonances if r.n > 0), key=lambda r: r.n)
    ratio = np.full(times.shape, np.nan)
    for i, t in enumerate(times):
        if t <= 0:
            continue
        rep = resonance_expansion(phi, phi, float(t), None, contour, pot, consts, resonances, pair)
        lead_term = dict(rep.resonance_terms).get(lead.n, 0j)
        rest = rep.total - lead_term
        ratio[i] = abs(lead_term) / max(abs(rest), 1e-300)
    ok = np.nan_to_num(ratio, nan=0.0) >= dominance
    best, start = (0, 0), None
    for i, flag in enumerate(np.append(ok, False)):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            if i - start > best[1] - best[0]:
                best = (start, i)
            start = None
    if best[1] - best[0] < 3:
        return DecaySeries(times, surv, None, None, ratio, "FitWindowEmpty: no resonance dominates")
    sel = slice(best[0], best[1])
    slope = np.polyfit(times[sel], np.log(np.abs(surv[sel])), 1)[0]
    return DecaySeries(times, surv, float(-2.0 * slope), (float(times[best[0]]), float(times[best[1] - 1])),
                       ratio)


def deviation_beyond_window(series: DecaySeries) -> float:
    """Largest |log|survival| - line| / |line| at times after the fit window.

    ``line`` is the regression of log|survival| on the window.
    """
    if series.fit_window is None:
        return 0.0
    lo, hi = series.fit_window
    inside = (series.times >= lo) & (series.times <= hi)
    logs = np.log(np.abs(series.survival))
    c1, c0 = np.polyfit(series.times[inside], logs[inside], 1)
    beyond = series.times > hi
    if not np.any(beyond):
        return 0.0
    line = c1 * series.times[beyond] + c0
    return float(np.max(np.abs(logs[beyond] - line) / np.abs(line)))


# ---------------------------------------------------------------------------
# spectral time evolution in position space
# ---------------------------------------------------------------------------

def evolve_spectral(phi: TestFunction, t: float, r, pot: PiecewiseConstantPotential, consts: PhysConsts,
                    tol: float = 1e-12, block: int = 400) -> np.ndarray:
    """(e^{-iHt/hbar} phi)(r) from the expansion in k-normalised in-states.

    psi_t(r) = int_0^kmax dk e^{-iE_k t/hbar} chi^+(r;k) <+k|phi>. The k panels
    come from an adaptive fit of the spectral density |<+k|phi>|^2 and are
    then split until the phase k r + E_k t/hbar changes by at most ~12 rad
    per 24-point panel.
    """
    r = np.asarray(r, dtype=float)
    kmax = wavenumber_cutoff((phi,))

    def coef(k):
        kc = np.asarray(k, dtype=complex)
        b = radial.regular_integrals(phi, kc, pot, consts, conjugate=False)
        return radial.SQRT_2_OVER_PI * b / radial.jminus(kc, pot, consts)    # <+k|phi> = int phi chi^-

    dens = legendre_panels(lambda k: np.abs(coef(k)) ** 2, 0.0, kmax, tol=tol)
    rate = float(np.max(np.abs(r))) + consts.hbar * abs(t) / consts.mass * kmax
    width = 12.0 / max(rate, 1e-12)
    lo, hi = [], []
    for a, b in zip(dens.lo, dens.hi):
        n = max(1, int(math.ceil((b - a) / width)))
        e = np.linspace(a, b, n + 1)
        lo.append(e[:-1])
        hi.append(e[1:])
    lo, hi = np.concatenate(lo), np.concatenate(hi)
    xg, wg = np.polynomial.legendre.leggauss(24)
    mid, half = 0.5 * (hi + lo), 0.5 * (hi - lo)
    k = (mid[:, None] + half[:, None] * xg).ravel()
    w = (half[:, None] * wg).ravel()
    kc = k.astype(complex)
    weights = w * np.exp(-1j * consts.energy(k) * t / consts.hbar) * coef(k) * radial.SQRT_2_OVER_PI \
        / radial.jplus(kc, pot, consts)
    out = np.zeros(r.shape, dtype=complex)
    for s in range(0, len(k), block):
        chi = radial.chi_grid(r, kc[s:s + block], pot, consts)        # (block,) + r.shape
        out += np.tensordot(weights[s:s + block], chi, axes=1)
    return out
