"""Physical configuration: constants, layered potentials, wave numbers and test functions."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import Polynomial
from scipy.optimize import brentq

from .defaults import DEFAULTS, NEGLIGIBILITY, TAIL_LEVEL
from .errors import BranchPointError, DomainViolation, TruncationFailure, ValidationError
from .numerics import QuadratureSettings, quad_interval

GEOMETRIES = ("radial", "line")


@dataclass(frozen=True)
class PhysConsts:
    hbar: float = DEFAULTS["hbar"]
    mass: float = DEFAULTS["mass"]

    def __post_init__(self):
        if not (self.hbar > 0 and self.mass > 0 and math.isfinite(self.hbar) and math.isfinite(self.mass)):
            raise ValidationError("hbar and mass must be finite and positive")

    @property
    def scale(self) -> float:
        """2m/hbar^2, converting energies to squared wave numbers."""
        return 2.0 * self.mass / self.hbar ** 2

    @property
    def kinetic(self) -> float:
        """hbar^2/2m, the coefficient of -d^2/dr^2 in H."""
        return self.hbar ** 2 / (2.0 * self.mass)

    def energy(self, q):
        return self.kinetic * np.asarray(q) ** 2

    def dE_dq(self, q):
        return self.hbar ** 2 * np.asarray(q) / self.mass


@dataclass(frozen=True)
class PiecewiseConstantPotential:
    """Layers V_0 on (start, r_1), V_1 on (r_1, r_2), ..., V_M beyond r_M.

    For the radial geometry the first layer starts at r = 0; on the line
    it extends to minus infinity and must be free as well.
    """

    boundaries: tuple[float, ...]
    heights: tuple[float, ...]
    geometry: str = "radial"

    def __post_init__(self):
        b = tuple(float(x) for x in self.boundaries)
        h = tuple(float(x) for x in self.heights)
        object.__setattr__(self, "boundaries", b)
        object.__setattr__(self, "heights", h)
        if self.geometry not in GEOMETRIES:
            raise ValidationError(f"geometry must be one of {GEOMETRIES}, got {self.geometry!r}")
        if len(h) != len(b) + 1:
            raise ValidationError("heights must have exactly one more entry than boundaries")
        if not all(math.isfinite(x) for x in b + h):
            raise ValidationError("boundaries and heights must be finite")
        if any(b2 <= b1 for b1, b2 in zip(b, b[1:])):
            raise ValidationError("boundaries must be strictly increasing")
        if self.geometry == "radial" and b and b[0] <= 0:
            raise ValidationError("boundaries must be positive for the radial geometry")
        if h[-1] != 0.0:
            raise ValidationError("heights: the exterior height must be exactly 0")
        if self.geometry == "line" and h[0] != 0.0:
            raise ValidationError("heights: both exterior heights must be exactly 0 on the line")

    # constructors ----------------------------------------------------------
    @classmethod
    def shell(cls, a: float = 1.0, b: float = 2.0, v0: float = 10.0) -> "PiecewiseConstantPotential":
        return cls((a, b), (0.0, v0, 0.0), "radial")

    @classmethod
    def barrier(cls, a: float = 0.0, b: float = 1.0, v0: float = 5.0) -> "PiecewiseConstantPotential":
        return cls((a, b), (0.0, v0, 0.0), "line")

    @classmethod
    def free(cls, geometry: str = "radial") -> "PiecewiseConstantPotential":
        return cls((), (0.0,), geometry)

    # queries ---------------------------------------------------------------
    @property
    def nlayers(self) -> int:
        return len(self.heights)

    @property
    def range(self) -> float:
        """Outermost discontinuity (0 for the free radial potential)."""
        return self.boundaries[-1] if self.boundaries else 0.0

    @property
    def is_free(self) -> bool:
        return all(v == 0.0 for v in self.heights)

    def __call__(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        idx = np.searchsorted(np.asarray(self.boundaries), r, side="right")
        return np.asarray(self.heights)[idx]

    # serialisation ---------------------------------------------------------
    def to_dict(self) -> dict:
        return {"geometry": self.geometry, "boundaries": list(self.boundaries),
                "heights": list(self.heights)}

    @classmethod
    def from_dict(cls, d: dict) -> "PiecewiseConstantPotential":
        extra = set(d) - {"geometry", "boundaries", "heights"}
        if extra:
            raise ValidationError(f"unknown potential key(s): {sorted(extra)}")
        return cls(tuple(d["boundaries"]), tuple(d["heights"]), d.get("geometry", "radial"))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "PiecewiseConstantPotential":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class LayerWaveNumbers:
    q: complex
    kappa: tuple[complex, ...]


def kappa_squared(q, pot: PiecewiseConstantPotential, consts: PhysConsts) -> np.ndarray:
    """kappa_j^2 = q^2 - (2m/hbar^2) V_j for every layer (last axis)."""
    q = np.asarray(q, dtype=complex)
    v = np.asarray(pot.heights)
    return q[..., None] ** 2 - consts.scale * v


def layer_kappas(q, pot: PiecewiseConstantPotential, consts: PhysConsts) -> np.ndarray:
    """Principal-root layer wave numbers; free layers carry q itself."""
    q = np.asarray(q, dtype=complex)
    k = np.sqrt(kappa_squared(q, pot, consts))
    free = np.asarray(pot.heights) == 0.0
    k[..., free] = q[..., None]
    return k


def layer_wavenumbers(q: complex, pot: PiecewiseConstantPotential, consts: PhysConsts) -> LayerWaveNumbers:
    k = layer_kappas(complex(q), pot, consts)
    return LayerWaveNumbers(complex(q), tuple(complex(x) for x in k))


# ---------------------------------------------------------------------------
# energies and sheets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EnergyPoint:
    z: complex
    sheet: str = "I"

    def __post_init__(self):
        object.__setattr__(self, "z", complex(self.z))
        if self.sheet not in ("I", "II"):
            raise ValidationError("sheet must be 'I' or 'II'")
        if not (math.isfinite(self.z.real) and math.isfinite(self.z.imag)):
            raise ValidationError("energy must be finite")


def wavenumber_of_energy(e: EnergyPoint, consts: PhysConsts) -> complex:
    """Wave number with Im q >= 0 on sheet I and Im q <= 0 on sheet II."""
    if e.sheet == "II" and e.z == 0:
        raise BranchPointError("z = 0 is the branch point; sheet II has no wave number there")
    z = complex(e.z)
    q = complex(np.sqrt(complex(consts.scale * z.real, consts.scale * z.imag)))
    if math.copysign(1.0, q.imag) < 0:      # a signed zero marks the lower lip of the cut
        q = -q
    return q if e.sheet == "I" else -q


def energy_of_wavenumber(q: complex, consts: PhysConsts) -> EnergyPoint:
    """Energy and sheet of q; the side of the cut survives an underflowed Im E as a signed zero."""
    q = complex(q)
    z = complex(q * q)
    z = complex(consts.kinetic * z.real, consts.kinetic * z.imag)
    if q.imag == 0:
        z = complex(z.real, 0.0)
    elif z.imag == 0:
        z = complex(z.real, math.copysign(0.0, q.real * q.imag))
    return EnergyPoint(z, "I" if q.imag > 0 or (q.imag == 0 and q.real >= 0) else "II")


# ---------------------------------------------------------------------------
# test functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TestFunction:
    """phi(x) = C (x - origin)^p exp(-(x - c)^2 / sigma^2).

    Derivatives of every order are exact: the n-th derivative is a
    polynomial times the same Gaussian.
    """

    __test__ = False      # keep pytest from collecting this class

    p: int
    c: float
    sigma: float
    norm: float = 1.0
    origin: float = 0.0
    geometry: str = "radial"
    window: tuple[float, float] = (0.0, 0.0)
    negligibility: tuple[tuple[float, float], ...] = ()
    energy_profile: Callable | None = field(default=None, compare=False, repr=False)

    # evaluation --------------------------------------------------------------
    def _poly(self, n: int) -> Polynomial:
        """Polynomial P_n in (x - c) with phi^(n) = C P_n exp(-(x-c)^2/sigma^2)."""
        y = Polynomial([0.0, 1.0])
        base = Polynomial([self.c - self.origin, 1.0]) ** self.p      # (x - origin)^p
        s2 = self.sigma ** 2
        pn = base
        for _ in range(n):
            pn = pn.deriv() - (2.0 / s2) * y * pn
        return pn

    def deriv(self, x, n: int = 0) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = x - self.c
        # product form for phi itself keeps phi(origin) exactly zero
        poly = (x - self.origin) ** self.p if n == 0 else self._poly(n)(y)
        return self.norm * poly * np.exp(-(y / self.sigma) ** 2)

    def __call__(self, x) -> np.ndarray:
        return self.deriv(x, 0)

    def log_abs(self, x, gamma: float = 0.0) -> np.ndarray:
        """log(|phi(x)| exp(gamma x)), safe far in the tails."""
        x = np.asarray(x, dtype=float)
        out = math.log(abs(self.norm)) - ((x - self.c) / self.sigma) ** 2 + gamma * x
        if self.p:
            with np.errstate(divide="ignore"):
                out = out + self.p * np.log(np.abs(x - self.origin))
        return out

    @property
    def peak(self) -> float:
        """Location of max |phi|."""
        return _peak(self.p, self.c, self.sigma, self.origin, 0.0, self.geometry)

    @property
    def max_abs(self) -> float:
        return float(abs(self(self.peak)))

    def integration_window(self, gamma: float = 0.0, level: float = TAIL_LEVEL) -> tuple[float, float]:
        """Interval outside which |phi| e^{gamma x} < level * its maximum."""
        xm = _peak(self.p, self.c, self.sigma, self.origin, gamma, self.geometry)
        top = float(self.log_abs(xm, gamma))
        if top > 700.0:
            raise TruncationFailure(
                f"|phi| e^(gamma r) peaks at exp({top:.0f}) for gamma={gamma:.3g}; no valid truncation")
        drop = top + math.log(level)
        g = lambda x: self.log_abs(x, gamma) - drop
        half = 12.0 * self.sigma
        for _ in range(60):
            x = np.linspace(xm - half, xm + half, 4001)
            if self.geometry == "radial":
                x = x[x > 0]
            gx = g(x)
            if gx[-1] < 0 and (gx[0] < 0 or self.geometry == "radial"):
                break
            half *= 2.0
        inside = np.nonzero(gx > 0)[0]
        i0, i1 = inside[0], inside[-1]
        hi = brentq(lambda t: float(g(t)), x[i1], x[i1 + 1], xtol=1e-13)
        if i0 == 0:
            lo = 0.0
        else:
            lo = brentq(lambda t: float(g(t)), x[i0 - 1], x[i0], xtol=1e-13)
        return (lo, hi)

    def spec(self) -> dict:
        d = {"p": self.p, "c": self.c, "sigma": self.sigma}
        if self.geometry == "line":
            d["origin"] = self.origin
        return d

    def scaled(self, factor: float) -> "TestFunction":
        return TestFunction(self.p, self.c, self.sigma, self.norm * factor, self.origin,
                            self.geometry, self.window, self.negligibility, self.energy_profile)


def _peak(p: int, c: float, sigma: float, origin: float, gamma: float, geometry: str) -> float:
    """Maximiser of |x - origin|^p exp(-(x-c)^2/sigma^2 + gamma x)."""
    cc = c - origin + 0.5 * gamma * sigma ** 2
    if p == 0:
        return origin + cc
    disc = math.sqrt(cc * cc + 2.0 * p * sigma ** 2)
    roots = [origin + 0.5 * (cc + disc), origin + 0.5 * (cc - disc)]
    if geometry == "radial":
        roots = [r for r in roots if r > 0]

    def val(x):
        return p * math.log(abs(x - origin)) - ((x - c) / sigma) ** 2 + gamma * x
    return max(roots, key=val)


def make_test_function(p: int, c: float, sigma: float, pot: PiecewiseConstantPotential,
                       origin: float = 0.0, energy_profile: Callable | None = None,
                       settings: QuadratureSettings | None = None) -> TestFunction:
    """Normalised Gaussian-falloff test function checked against the potential's discontinuities.

    Radial functions need p >= 1 (so phi(0) = 0) and origin 0. On the line
    p >= 0 and any origin are allowed.
    """
    if isinstance(p, bool) or int(p) != p:
        raise ValidationError("p must be an integer")
    p = int(p)
    if not (sigma > 0 and math.isfinite(sigma) and math.isfinite(c)):
        raise ValidationError("sigma must be positive and c finite")
    if pot.geometry == "radial":
        if p < 1:
            raise ValidationError("radial test functions need p >= 1")
        if origin != 0.0:
            raise ValidationError("radial test functions are anchored at the origin")
    elif p < 0:
        raise ValidationError("p must be non-negative")
    raw = TestFunction(p, float(c), float(sigma), 1.0, float(origin), pot.geometry)
    top = raw.max_abs
    if not top > 0:
        raise DomainViolation("test function vanishes identically")
    ratios = []
    for r in pot.boundaries:
        ratio = float(abs(raw(r))) / top
        ratios.append((r, ratio))
        if ratio >= NEGLIGIBILITY:
            raise DomainViolation(
                f"|phi({r})|/max|phi| = {ratio:.3e} is not below {NEGLIGIBILITY:g} at radius {r}",
                radius=r)
    lo, hi = raw.integration_window()
    settings = settings or QuadratureSettings(abs_tol=1e-15, rel_tol=1e-13)
    n2 = quad_interval(lambda x: raw(x) ** 2, lo, hi, settings, breakpoints=[raw.peak]).real
    norm = 1.0 / math.sqrt(n2)
    return TestFunction(p, float(c), float(sigma), norm, float(origin), pot.geometry,
                        (lo, hi), tuple(ratios), energy_profile)


def falloff_check(tf: TestFunction, n_max: int = 4, points: int = 2001) -> bool:
    """Grid check that (1+|r|)^n phi(r) exp(r^2/(4 sigma^2)) stays bounded for n <= n_max."""
    lo, hi = tf.integration_window()
    span = hi - lo
    x = np.linspace(max(lo - span, 0.0) if tf.geometry == "radial" else lo - span, hi + 3 * span, points)
    for n in range(n_max + 1):
        with np.errstate(divide="ignore"):
            lg = (n * np.log1p(np.abs(x)) + tf.log_abs(x) + x ** 2 / (4.0 * tf.sigma ** 2))
        lg = lg[np.isfinite(lg)]
        # bounded means the tail does not climb back above the bulk
        if lg.size == 0 or lg[-1] > lg.max() or not np.isfinite(lg.max()):
            return False
    return True


# ---------------------------------------------------------------------------
# Hamiltonian action on the symbolic family
# ---------------------------------------------------------------------------

def apply_hamiltonian(tf: TestFunction, pot: PiecewiseConstantPotential, consts: PhysConsts,
                      times: int, grid) -> np.ndarray:
    """H^times phi on ``grid`` with exact derivatives (times in {1, 2}).

    Delta contributions at the discontinuities are dropped; they are
    multiplied by phi and its derivatives, which are negligible there.
    """
    x = np.asarray(grid, dtype=float)
    k = consts.kinetic
    v = pot(x)
    if times == 1:
        return -k * tf.deriv(x, 2) + v * tf(x)
    if times == 2:
        return k * k * tf.deriv(x, 4) - 2.0 * k * v * tf.deriv(x, 2) + v * v * tf(x)
    raise ValidationError("times must be 1 or 2")


def hamiltonian_test_function(tf: TestFunction, pot: PiecewiseConstantPotential,
                              consts: PhysConsts) -> Callable[[np.ndarray], np.ndarray]:
    """H phi as a callable, for use as the function in a pairing."""
    return lambda x: apply_hamiltonian(tf, pot, consts, 1, x)
