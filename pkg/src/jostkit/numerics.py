"""Complex-plane numerical kernel.

Adaptive Gauss-Kronrod quadrature on real intervals and parametrised
contours, argument-principle zero counting, subdivision + Newton zero
finding, Richardson differentiation, and a panel-wise Legendre
representation that integrates ``g(x) exp(-i w x)`` exactly for every
frequency ``w`` once ``g`` has been sampled.

All integrands are expected to be vectorised: they receive a 1-D numpy
array and return an array of the same length.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import spherical_jn

from .defaults import DEFAULTS
from .errors import (
    BoundaryZero,
    DerivativeVanishes,
    Inconclusive,
    MultiplePole,
    NoConvergence,
    NonConvergence,
    ValidationError,
)

ComplexFn = Callable[[np.ndarray], np.ndarray]

_EPS = np.finfo(float).eps


# ---------------------------------------------------------------------------
# settings and domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuadratureSettings:
    abs_tol: float = DEFAULTS["quad"]["abs_tol"]
    rel_tol: float = DEFAULTS["quad"]["rel_tol"]
    max_subdivisions: int = DEFAULTS["quad"]["max_subdiv"]
    oscillation_splitting: bool = False

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValidationError("quadrature tolerances must be positive")
        if self.max_subdivisions < 1:
            raise ValidationError("max_subdivisions must be >= 1")

    def replace(self, **kw) -> "QuadratureSettings":
        d = dict(self.__dict__)
        d.update(kw)
        return QuadratureSettings(**d)


@dataclass(frozen=True)
class Region:
    """Axis-aligned rectangle in the wave-number plane."""

    re_min: float
    re_max: float
    im_min: float
    im_max: float

    def __post_init__(self):
        vals = (self.re_min, self.re_max, self.im_min, self.im_max)
        if not all(math.isfinite(v) for v in vals):
            raise ValidationError("region bounds must be finite")
        if not (self.re_min < self.re_max and self.im_min < self.im_max):
            raise ValidationError("region requires re_min < re_max and im_min < im_max")

    @property
    def corners(self) -> tuple[complex, complex, complex, complex]:
        return (complex(self.re_min, self.im_min), complex(self.re_max, self.im_min),
                complex(self.re_max, self.im_max), complex(self.re_min, self.im_max))

    @property
    def center(self) -> complex:
        return complex(0.5 * (self.re_min + self.re_max), 0.5 * (self.im_min + self.im_max))

    @property
    def size(self) -> float:
        return max(self.re_max - self.re_min, self.im_max - self.im_min)

    def contains(self, q: complex, margin: float = 0.0) -> bool:
        return (self.re_min - margin <= q.real <= self.re_max + margin
                and self.im_min - margin <= q.imag <= self.im_max + margin)

    def split(self, fx: float = 0.5, fy: float = 0.5) -> list["Region"]:
        xm = self.re_min + fx * (self.re_max - self.re_min)
        ym = self.im_min + fy * (self.im_max - self.im_min)
        return [Region(self.re_min, xm, self.im_min, ym), Region(xm, self.re_max, self.im_min, ym),
                Region(self.re_min, xm, ym, self.im_max), Region(xm, self.re_max, ym, self.im_max)]

    def to_dict(self) -> dict:
        return {"re_min": self.re_min, "re_max": self.re_max,
                "im_min": self.im_min, "im_max": self.im_max}


# ---------------------------------------------------------------------------
# contours
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Piece:
    kind: str            # "line" or "arc"
    s0: float
    s1: float
    a: complex           # line start / arc center
    b: complex           # line end / (radius, 0)
    t0: float = 0.0      # arc start angle
    t1: float = 0.0      # arc end angle

    def point(self, s: np.ndarray) -> np.ndarray:
        u = (s - self.s0) / (self.s1 - self.s0)
        if self.kind == "line":
            return self.a + (self.b - self.a) * u
        theta = self.t0 + (self.t1 - self.t0) * u
        return self.a + self.b.real * np.exp(1j * theta)

    def tangent(self, s: np.ndarray) -> np.ndarray:
        du = 1.0 / (self.s1 - self.s0)
        if self.kind == "line":
            return np.full(np.shape(s), (self.b - self.a) * du, dtype=complex)
        u = (s - self.s0) * du
        theta = self.t0 + (self.t1 - self.t0) * u
        return 1j * self.b.real * (self.t1 - self.t0) * du * np.exp(1j * theta)

    def clipped(self, lo: float, hi: float) -> "_Piece | None":
        lo, hi = max(lo, self.s0), min(hi, self.s1)
        if hi <= lo:
            return None
        if self.kind == "line":
            za, zb = self.point(np.array([lo, hi]))
            return _Piece("line", lo, hi, complex(za), complex(zb))
        u0 = (lo - self.s0) / (self.s1 - self.s0)
        u1 = (hi - self.s0) / (self.s1 - self.s0)
        dt = self.t1 - self.t0
        return _Piece("arc", lo, hi, self.a, self.b, self.t0 + dt * u0, self.t0 + dt * u1)


@dataclass(frozen=True)
class Contour:
    """Piecewise-smooth path parametrised over s in [0, 1]."""

    pieces: tuple[_Piece, ...]
    orientation: int = 1

    def __call__(self, s) -> np.ndarray:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        out = np.empty(s.shape, dtype=complex)
        for p in self.pieces:
            m = (s >= p.s0) & (s <= p.s1)
            out[m] = p.point(s[m])
        return out

    @property
    def start(self) -> complex:
        return complex(self.pieces[0].point(np.array([self.pieces[0].s0]))[0])

    @property
    def end(self) -> complex:
        return complex(self.pieces[-1].point(np.array([self.pieces[-1].s1]))[0])

    @property
    def is_closed(self) -> bool:
        scale = max(1.0, abs(self.start))
        return abs(self.end - self.start) <= 1e-14 * scale

    def split(self, s: float) -> tuple["Contour", "Contour"]:
        """Cut at parameter ``s``; the two parts keep the original parametrisation."""
        left = tuple(p for p in (q.clipped(0.0, s) for q in self.pieces) if p is not None)
        right = tuple(p for p in (q.clipped(s, 1.0) for q in self.pieces) if p is not None)
        return Contour(left, self.orientation), Contour(right, self.orientation)


def polygon_contour(vertices: Sequence[complex], closed: bool = True, orientation: int = 1) -> Contour:
    pts = [complex(v) for v in vertices]
    if closed:
        pts = pts + [pts[0]]
    n = len(pts) - 1
    pieces = tuple(_Piece("line", i / n, (i + 1) / n, pts[i], pts[i + 1]) for i in range(n))
    return Contour(pieces, orientation)


def rectangle_contour(region: Region) -> Contour:
    """Counter-clockwise boundary of ``region``."""
    return polygon_contour(region.corners)


def circle_contour(center: complex, radius: float, orientation: int = 1) -> Contour:
    piece = _Piece("arc", 0.0, 1.0, complex(center), complex(radius), 0.0, 2.0 * math.pi)
    return Contour((piece,), orientation)


# ---------------------------------------------------------------------------
# Gauss-Kronrod 7/15
# ---------------------------------------------------------------------------

_XGK = np.array([
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0])
_WGK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714])
_WG = np.array([0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                0.381830050505118944950369775488975, 0.417959183673469387755102040816327])

_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])          # 15 nodes, ascending
_WK = np.concatenate([_WGK[:-1], _WGK[::-1]])
_WG15 = np.zeros(15)
_WG15[[1, 3, 5]] = _WG[:3]
_WG15[[13, 11, 9]] = _WG[:3]
_WG15[7] = _WG[3]


def _gk_batch(f: ComplexFn, a: np.ndarray, b: np.ndarray):
    """Kronrod estimates, error estimates and |f| integrals on many intervals."""
    c = 0.5 * (a + b)
    h = 0.5 * (b - a)
    x = (c[:, None] + h[:, None] * _NODES[None, :]).ravel()
    fx = np.asarray(f(x), dtype=complex).reshape(len(a), 15)
    if not np.all(np.isfinite(fx)):
        raise NonConvergence("integrand is not finite on the integration interval")
    rk = fx @ _WK
    rg = fx @ _WG15
    mean = rk / 2.0
    resasc = np.abs(fx - mean[:, None]) @ _WK
    resabs = np.abs(fx) @ _WK
    err = np.abs(rk - rg)
    with np.errstate(divide="ignore", invalid="ignore"):
        scaled = np.where(resasc > 0, resasc * np.minimum(1.0, (200.0 * err / resasc) ** 1.5), err)
    floor = 50.0 * _EPS * resabs
    err = np.maximum(scaled, floor)
    return rk * h, err * np.abs(h), resabs * np.abs(h)


def _oscillation_breaks(f: ComplexFn, a: float, b: float, limit: int) -> np.ndarray:
    x = np.linspace(a, b, 257)
    y = np.asarray(f(x), dtype=complex)
    breaks = []
    for part in (y.real, y.imag):
        s = np.sign(part)
        idx = np.nonzero(s[:-1] * s[1:] < 0)[0]
        for i in idx:
            # linear interpolation of the crossing
            x0, x1, y0, y1 = x[i], x[i + 1], part[i], part[i + 1]
            breaks.append(x0 - y0 * (x1 - x0) / (y1 - y0))
    breaks = np.unique(np.round(np.asarray(breaks, dtype=float), 15))
    if len(breaks) > limit:
        breaks = breaks[np.linspace(0, len(breaks) - 1, limit).astype(int)]
    return breaks


def quad_interval_err(f: ComplexFn, a: float, b: float,
                      settings: QuadratureSettings | None = None,
                      breakpoints: Sequence[float] = ()) -> tuple[complex, float]:
    """Adaptive Gauss-Kronrod integral of ``f`` over [a, b] with error estimate."""
    settings = settings or QuadratureSettings()
    if a == b:
        return 0j, 0.0
    sign = 1.0
    if b < a:
        a, b, sign = b, a, -1.0
    pts = [a]
    inner = [p for p in breakpoints if a < p < b]
    if settings.oscillation_splitting:
        inner += list(_oscillation_breaks(f, a, b, max(1, settings.max_subdivisions // 4)))
    pts += sorted(set(inner))
    pts.append(b)
    lo = np.array(pts[:-1], dtype=float)
    hi = np.array(pts[1:], dtype=float)
    val, err, rabs = _gk_batch(f, lo, hi)
    width = b - a
    nsub = 0
    while True:
        total = val.sum()
        target = max(settings.abs_tol, settings.rel_tol * abs(total))
        total_err = err.sum()
        if total_err <= target:
            break
        share = target * (hi - lo) / width
        tiny = (hi - lo) <= 1e-14 * max(abs(a), abs(b), 1.0)
        floor = 60.0 * _EPS * rabs          # nothing to gain below the rounding floor
        bad = (err > share) & ~tiny & (err > floor)
        if not np.any(bad):
            break
        nsub += int(bad.sum())
        if nsub > settings.max_subdivisions:
            raise NonConvergence(
                f"quadrature on [{a}, {b}] exhausted {settings.max_subdivisions} subdivisions "
                f"(error {total_err:.3e} > {target:.3e})")
        mid = 0.5 * (lo[bad] + hi[bad])
        nlo = np.concatenate([lo[bad], mid])
        nhi = np.concatenate([mid, hi[bad]])
        nval, nerr, nrabs = _gk_batch(f, nlo, nhi)
        keep = ~bad
        lo = np.concatenate([lo[keep], nlo])
        hi = np.concatenate([hi[keep], nhi])
        val = np.concatenate([val[keep], nval])
        err = np.concatenate([err[keep], nerr])
        rabs = np.concatenate([rabs[keep], nrabs])
        order = np.argsort(lo, kind="stable")
        lo, hi, val, err, rabs = lo[order], hi[order], val[order], err[order], rabs[order]
    return complex(sign * val.sum()), float(err.sum())


def quad_interval(f: ComplexFn, a: float, b: float,
                  settings: QuadratureSettings | None = None,
                  breakpoints: Sequence[float] = ()) -> complex:
    """Integral of a complex-valued function of a real variable over [a, b]."""
    return quad_interval_err(f, a, b, settings, breakpoints)[0]


def quad_contour(f: ComplexFn, contour: Contour, settings: QuadratureSettings | None = None) -> complex:
    """Integral of ``f(q) dq`` along ``contour``."""
    settings = settings or QuadratureSettings()
    total = 0j
    for piece in contour.pieces:
        g = (lambda s, p=piece: f(p.point(s)) * p.tangent(s))
        total += quad_interval(g, piece.s0, piece.s1, settings)
    return contour.orientation * total


def trapezoid_circle(f: ComplexFn, center: complex, radius: float, nodes: int = 64) -> complex:
    """Periodic trapezoid rule for the counter-clockwise integral of ``f(q) dq``."""
    theta = 2.0 * math.pi * np.arange(nodes) / nodes
    z = center + radius * np.exp(1j * theta)
    dz = 1j * radius * np.exp(1j * theta)
    return complex(np.sum(f(z) * dz) * 2.0 * math.pi / nodes)


# ---------------------------------------------------------------------------
# zeros
# ---------------------------------------------------------------------------

_COUNT_SETTINGS = QuadratureSettings(abs_tol=1e-10, rel_tol=1e-10, max_subdivisions=4000)
BOUNDARY_FLOOR = 1e-9


def _check_boundary(f: ComplexFn, region: Region, samples: int = 64) -> None:
    contour = rectangle_contour(region)
    s = (np.arange(4 * samples) + 0.5) / (4 * samples)
    z = contour(s)
    vals = np.abs(np.asarray(f(z), dtype=complex))
    corner_vals = np.abs(np.asarray(f(np.array(region.corners)), dtype=complex))
    vals = np.concatenate([vals, corner_vals])
    if not np.all(np.isfinite(vals)):
        raise BoundaryZero(f"non-finite function values on the boundary of {region}")
    if vals.min() < BOUNDARY_FLOOR * vals.max():
        raise BoundaryZero(f"function nearly vanishes on the boundary of {region}")


def winding_integral(f: ComplexFn, f_prime: ComplexFn, region: Region,
                     weight: ComplexFn | None = None,
                     settings: QuadratureSettings | None = None) -> complex:
    """(1/2 pi i) times the boundary integral of weight * f'/f."""
    settings = settings or _COUNT_SETTINGS
    if weight is None:
        g = lambda q: f_prime(q) / f(q)
    else:
        g = lambda q: weight(q) * f_prime(q) / f(q)
    return quad_contour(g, rectangle_contour(region), settings) / (2j * math.pi)


def count_zeros(f: ComplexFn, f_prime: ComplexFn, region: Region,
                settings: QuadratureSettings | None = None) -> int:
    """Number of zeros of an analytic ``f`` inside ``region`` (argument principle)."""
    _check_boundary(f, region)
    try:
        w = winding_integral(f, f_prime, region, settings=settings)
    except NonConvergence as exc:
        raise Inconclusive(f"winding integral did not converge on {region}: {exc}") from exc
    n = round(w.real)
    if abs(w.real - n) >= 0.1 or abs(w.imag) >= 0.1:
        raise Inconclusive(f"winding number {w} on {region} is not near an integer")
    return int(n)


def refine_zero(f: ComplexFn, f_prime: ComplexFn, q0: complex, tol: float = 1e-12,
                max_iter: int = 60, ftol: float | None = None) -> complex:
    """Newton iteration from ``q0`` to a simple zero.

    Stops once ``|f(q)| < ftol`` (default ``tol``) and the last step is
    below ``tol * (1 + |q|)``.
    """
    ftol = tol if ftol is None else ftol
    q = complex(q0)
    tiny = np.finfo(float).tiny
    for _ in range(max_iter):
        fq = complex(np.asarray(f(np.array([q])))[0])
        dq = complex(np.asarray(f_prime(np.array([q])))[0])
        if not (math.isfinite(abs(fq)) and math.isfinite(abs(dq))):
            raise NoConvergence(f"Newton iterate left the domain at q={q}")
        if abs(dq) <= tiny:
            raise DerivativeVanishes(f"derivative vanishes at q={q} (possible multiple zero)")
        step = fq / dq
        q = q - step
        if abs(step) < tol * (1.0 + abs(q)):
            fq = complex(np.asarray(f(np.array([q])))[0])
            if abs(fq) < ftol:
                return q
    raise NoConvergence(f"Newton did not converge from q0={q0} (last q={q})")


def argument_centroid(f: ComplexFn, f_prime: ComplexFn, region: Region) -> complex:
    """Mean of the zeros inside ``region``: (1/2 pi i) ∮ q f'/f dq / count."""
    n = winding_integral(f, f_prime, region)
    s = winding_integral(f, f_prime, region, weight=lambda q: q)
    return s / n


# fractions tried when a cut line runs into a zero
_SPLIT_FRACTIONS = ((0.5, 0.5), (0.4615, 0.5384), (0.5743, 0.4281), (0.3819, 0.6180))


@dataclass
class ZeroSearch:
    zeros: list[complex]
    count: int
    boxes: int = 0
    regions: list[Region] = field(default_factory=list)


def find_zeros(f: ComplexFn, f_prime: ComplexFn, region: Region, tol: float = 1e-12,
               ftol: float | None = None, max_depth: int = 40,
               settings: QuadratureSettings | None = None) -> ZeroSearch:
    """All simple zeros of ``f`` in ``region`` by subdivision and Newton refinement.

    The total count is certified by the argument principle on ``region``
    itself; a mismatch with the number of refined zeros is Inconclusive.
    """
    total = count_zeros(f, f_prime, region, settings)
    result = ZeroSearch([], total)
    if total == 0:
        return result

    def search(box: Region, n: int, depth: int) -> list[complex]:
        result.boxes += 1
        if n == 0:
            return []
        if depth > max_depth:
            raise MultiplePole(f"{n} zeros remain unresolved in {box}")
        if n == 1:
            try:
                guess = argument_centroid(f, f_prime, box)
            except Inconclusive:
                guess = box.center
            try:
                z = refine_zero(f, f_prime, guess, tol, ftol=ftol)
            except NoConvergence:
                z = None
            if z is not None and box.contains(z, margin=tol * (1 + abs(z))):
                result.regions.append(box)
                return [z]
        last_exc = None
        for fx, fy in _SPLIT_FRACTIONS:
            parts = box.split(fx, fy)
            try:
                counts = [count_zeros(f, f_prime, p, settings) for p in parts]
            except Inconclusive as exc:     # includes BoundaryZero
                last_exc = exc
                continue
            if sum(counts) != n:
                last_exc = Inconclusive(f"sub-box counts {counts} do not add to {n} in {box}")
                continue
            out = []
            for p, c in zip(parts, counts):
                out.extend(search(p, c, depth + 1))
            return out
        raise Inconclusive(f"could not subdivide {box}: {last_exc}")

    zeros = search(region, total, 0)
    zeros = sorted(zeros, key=lambda z: (z.real, z.imag))
    if len(zeros) != total:
        raise Inconclusive(f"refined {len(zeros)} zeros but the certified count is {total}")
    result.zeros = zeros
    return result


# ---------------------------------------------------------------------------
# differentiation
# ---------------------------------------------------------------------------

def derivative(f: Callable[[complex], complex], q: complex, h: float = 1e-2, levels: int = 4) -> complex:
    """Richardson-extrapolated central difference of an analytic function."""
    q = complex(q)
    table = []
    for i in range(levels):
        hi = h / 2 ** i
        d = (complex(f(q + hi)) - complex(f(q - hi))) / (2.0 * hi)
        row = [d]
        for j in range(1, i + 1):
            fac = 4.0 ** j
            row.append((fac * row[j - 1] - table[i - 1][j - 1]) / (fac - 1.0))
        table.append(row)
    return table[-1][-1]


# ---------------------------------------------------------------------------
# Legendre panels: exact Fourier integrals of a sampled function
# ---------------------------------------------------------------------------

_PANEL_ORDER = 24
_GL_X, _GL_W = np.polynomial.legendre.leggauss(_PANEL_ORDER)
_LEG_V = np.polynomial.legendre.legvander(_GL_X, _PANEL_ORDER - 1)        # (n, n)
_LEG_FWD = (_LEG_V * _GL_W[:, None]).T * ((2 * np.arange(_PANEL_ORDER) + 1) / 2.0)[:, None]
_J = np.arange(_PANEL_ORDER)
_PHASE = (-1j) ** _J


@dataclass
class LegendrePanels:
    """Piecewise Legendre expansion of a sampled function on [a, b].

    ``coef[p, j]`` is the coefficient of P_j on panel p mapped to [-1, 1];
    ``l1_error`` bounds the integral of |g - approximation| over [a, b],
    which also bounds the error of every oscillatory integral built on it.
    """

    lo: np.ndarray
    hi: np.ndarray
    coef: np.ndarray
    l1_error: float

    @property
    def npanels(self) -> int:
        return len(self.lo)

    def integral(self) -> complex:
        h = 0.5 * (self.hi - self.lo)
        return complex(np.sum(2.0 * h * self.coef[:, 0]))

    def fourier(self, omega: float | np.ndarray) -> np.ndarray:
        """Integral of g(x) exp(-i omega x) dx for each omega."""
        omega = np.atleast_1d(np.asarray(omega, dtype=float))
        h = 0.5 * (self.hi - self.lo)
        mid = 0.5 * (self.hi + self.lo)
        out = np.empty(omega.shape, dtype=complex)
        for i, w in enumerate(omega):
            big = np.abs(w * h)
            jj = spherical_jn(_J[None, :], big[:, None])          # (panels, n)
            mom = 2.0 * _PHASE[None, :] * jj * np.sign(w * h)[:, None] ** _J[None, :]
            panel = np.sum(self.coef * mom, axis=1)
            out[i] = np.sum(h * np.exp(-1j * w * mid) * panel)
        return out

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        idx = np.clip(np.searchsorted(self.hi, x), 0, self.npanels - 1)
        u = (x - 0.5 * (self.lo[idx] + self.hi[idx])) / (0.5 * (self.hi[idx] - self.lo[idx]))
        basis = np.polynomial.legendre.legvander(u, _PANEL_ORDER - 1)
        return np.sum(basis * self.coef[idx], axis=1)


def _panel_fit(g: ComplexFn, lo: np.ndarray, hi: np.ndarray):
    mid = 0.5 * (lo + hi)
    h = 0.5 * (hi - lo)
    x = (mid[:, None] + h[:, None] * _GL_X[None, :]).ravel()
    vals = np.asarray(g(x), dtype=complex).reshape(len(lo), _PANEL_ORDER)
    if not np.all(np.isfinite(vals)):
        raise NonConvergence("sampled function is not finite")
    coef = vals @ _LEG_FWD.T
    tail = np.abs(coef[:, -4:]).sum(axis=1)
    err = 2.0 * h * tail
    # tails at the rounding level of the samples cannot be reduced by splitting
    floor = 2.0 * h * 200.0 * _EPS * np.abs(vals).max(axis=1)
    return coef, err, floor


def legendre_panels(g: ComplexFn, a: float, b: float, tol: float = 1e-13,
                    breakpoints: Sequence[float] = (), max_panels: int = 20000) -> LegendrePanels:
    """Adaptively approximate ``g`` on [a, b] to L1 accuracy ``tol``."""
    pts = sorted({a, b, *[p for p in breakpoints if a < p < b]})
    lo = np.array(pts[:-1])
    hi = np.array(pts[1:])
    coef, err, floor = _panel_fit(g, lo, hi)
    width = b - a
    min_width = 1e-14 * max(width, abs(a), abs(b))
    while True:
        share = tol * (hi - lo) / width
        bad = (err > share) & (err > floor) & ((hi - lo) > min_width)
        if not np.any(bad) or err.sum() <= tol:
            break
        if len(lo) + int(bad.sum()) > max_panels:
            raise NonConvergence(f"panel approximation needs more than {max_panels} panels "
                                 f"(L1 error {err.sum():.3e} > {tol:.3e})")
        mid = 0.5 * (lo[bad] + hi[bad])
        nlo = np.concatenate([lo[bad], mid])
        nhi = np.concatenate([mid, hi[bad]])
        ncoef, nerr, nfloor = _panel_fit(g, nlo, nhi)
        keep = ~bad
        lo = np.concatenate([lo[keep], nlo])
        hi = np.concatenate([hi[keep], nhi])
        coef = np.concatenate([coef[keep], ncoef])
        err = np.concatenate([err[keep], nerr])
        floor = np.concatenate([floor[keep], nfloor])
        order = np.argsort(lo, kind="stable")
        lo, hi, coef, err, floor = lo[order], hi[order], coef[order], err[order], floor[order]
    return LegendrePanels(lo, hi, coef, float(err.sum()))
