"""Independent reference computations used to validate the main code paths.

None of these share numerics with the production routines: poles come
from a dense |J+| grid plus derivative-free descent, solutions from
adaptive ODE integration.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import solve_ivp
from scipy.ndimage import minimum_filter

from .model import PhysConsts, PiecewiseConstantPotential
from .numerics import Region
from . import radial


def _descend(f, q0: complex, h0: float, tol: float = 1e-13, max_iter: int = 4000) -> complex:
    """Compass search on |f|: try the 8 neighbours, halve the step when none improves."""
    q, fq, h = complex(q0), abs(f(q0)), h0
    dirs = np.exp(1j * np.pi / 4 * np.arange(8))
    for _ in range(max_iter):
        cand = q + h * dirs
        vals = np.abs(f(cand))
        i = int(np.argmin(vals))
        if vals[i] < fq:
            q, fq = complex(cand[i]), float(vals[i])
        else:
            h *= 0.5
            if h < tol * (1.0 + abs(q)):
                break
    return q


def grid_scan_poles(region: Region, pot: PiecewiseConstantPotential, consts: PhysConsts,
                    n: int = 400, tol: float = 1e-13) -> list[complex]:
    """Zeros of J+ from local minima of |J+| on an n x n grid followed by descent.

    A minimum is kept when the descended point has |J+| below 1e-6 of the
    grid median (true zeros drive |J+| to rounding level, spurious minima do not).
    """
    x = np.linspace(region.re_min, region.re_max, n)
    y = np.linspace(region.im_min, region.im_max, n)
    grid = x[None, :] + 1j * y[:, None]
    f = lambda q: radial.jplus(np.asarray(q), pot, consts)
    mag = np.abs(f(grid))
    is_min = mag == minimum_filter(mag, size=3, mode="nearest")
    is_min[0, :] = is_min[-1, :] = False
    is_min[:, 0] = is_min[:, -1] = False
    h0 = max(x[1] - x[0], y[1] - y[0])
    scale = float(np.median(mag))
    found: list[complex] = []
    for i, j in np.argwhere(is_min):
        z = _descend(f, complex(grid[i, j]), h0, tol)
        if abs(f(np.array([z]))[0]) > 1e-6 * scale:
            continue
        if not region.contains(z):
            continue
        if all(abs(z - w) > 1e-8 for w in found):
            found.append(z)
    return sorted(found, key=lambda z: (z.real, z.imag))


def _integrate(q: complex, y0, x0: float, x1: float, pot: PiecewiseConstantPotential,
               consts: PhysConsts, t_eval=None, rtol: float = 1e-13, atol: float = 1e-15):
    """Solve y'' = -(q^2 - scale V) y from x0 to x1, restarting at every discontinuity.

    Returns the state at x1 and, if ``t_eval`` is given, y at those points.
    """
    lo, hi = min(x0, x1), max(x0, x1)
    cuts = [x0] + sorted((b for b in pot.boundaries if lo < b < hi), reverse=x1 < x0) + [x1]
    y = np.asarray(y0, dtype=complex)
    samples = None if t_eval is None else np.empty(len(t_eval), dtype=complex)
    for a, b in zip(cuts[:-1], cuts[1:]):
        k2 = q * q - consts.scale * float(pot(0.5 * (a + b)))
        sol = solve_ivp(lambda t, s: [s[1], -k2 * s[0]], (a, b), y, method="DOP853",
                        rtol=rtol, atol=atol, dense_output=t_eval is not None)
        y = sol.y[:, -1]
        if t_eval is not None:
            sel = (t_eval >= min(a, b)) & (t_eval <= max(a, b))
            if sel.any():
                samples[sel] = sol.sol(t_eval[sel])[0]
    return y, samples


def shoot_regular(q: complex, r, pot: PiecewiseConstantPotential, consts: PhysConsts) -> np.ndarray:
    """chi(r; q) from chi(0) = 0, chi'(0) = q by adaptive ODE integration."""
    r = np.asarray(r, dtype=float)
    q = complex(q)
    _, vals = _integrate(q, [0.0, q], 0.0, float(r.max()), pot, consts, t_eval=r)
    return vals


def shoot_barrier(k: float, pot: PiecewiseConstantPotential, consts: PhysConsts) -> dict:
    """T and R for both incidences by integrating across the barrier."""
    a, b = pot.boundaries[0], pot.boundaries[-1]
    # left incidence, unit transmitted wave on the right
    e = np.exp(1j * k * b)
    y, _ = _integrate(k, [e, 1j * k * e], b, a, pot, consts)
    alpha = np.exp(-1j * k * a) * 0.5 * (y[0] + y[1] / (1j * k))
    beta = np.exp(1j * k * a) * 0.5 * (y[0] - y[1] / (1j * k))
    # right incidence, unit transmitted wave on the left
    e = np.exp(-1j * k * a)
    y, _ = _integrate(k, [e, -1j * k * e], a, b, pot, consts)
    gamma = np.exp(1j * k * b) * 0.5 * (y[0] - y[1] / (1j * k))
    delta = np.exp(-1j * k * b) * 0.5 * (y[0] + y[1] / (1j * k))
    return {"T": complex(1 / alpha), "R_l": complex(beta / alpha),
            "T_r": complex(1 / gamma), "R_r": complex(delta / gamma)}


def simpson(f, a: float, b: float, n: int = 1_000_000) -> complex:
    """Composite Simpson rule with n (even) intervals."""
    n += n % 2
    x = np.linspace(a, b, n + 1)
    y = f(x)
    h = (b - a) / n
    return complex(h / 3 * (y[0] + y[-1] + 4 * y[1:-1:2].sum() + 2 * y[2:-1:2].sum()))
