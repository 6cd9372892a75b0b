"""Layer propagators shared by the radial and line solvers.

Inside a layer of constant potential every solution is
``phi(x) = C(x) phi(0) + Sn(x) phi'(0)`` with ``C = cos(kappa x)`` and
``Sn = sin(kappa x)/kappa``. Both are entire in kappa^2, so nothing here
depends on the sign chosen for kappa except the optional exponential-basis
step, which is used deliberately to exercise that independence.
"""

from __future__ import annotations

import numpy as np

# strongly evanescent layers (|Im kappa| * width above this) use the
# exponential basis; oscillatory ones use C/Sn, which keeps small imaginary
# parts of the solution to full relative precision
EXP_BASIS_MIN = 2.0
# series for Sn and g below this |kappa x|
SERIES_MAX = 0.1


def cos_sinc(k2: np.ndarray, x) -> tuple[np.ndarray, np.ndarray]:
    """C = cos(kappa x) and Sn = sin(kappa x)/kappa from kappa^2."""
    k2 = np.asarray(k2, dtype=complex)
    x = np.asarray(x, dtype=float)
    kap = np.sqrt(k2)
    kx = kap * x
    u = k2 * x * x
    with np.errstate(invalid="ignore", divide="ignore"):
        sn_direct = np.sin(kx) / kap
    sn_series = x * (1 - u / 6 * (1 - u / 20 * (1 - u / 42 * (1 - u / 72 * (1 - u / 110)))))
    small = np.abs(kx) < SERIES_MAX
    return np.cos(kx), np.where(small, sn_series, sn_direct)


def g_function(k2: np.ndarray, x, c: np.ndarray, sn: np.ndarray) -> np.ndarray:
    """g = (x C - Sn)/kappa^2, the q-derivative of Sn divided by q."""
    k2 = np.asarray(k2, dtype=complex)
    x = np.asarray(x, dtype=float)
    u = k2 * x * x
    series = x ** 3 * (-1 / 3 + u * (1 / 30 + u * (-1 / 840 + u * (1 / 45360 - u / 3991680))))
    with np.errstate(invalid="ignore", divide="ignore"):
        direct = (x * c - sn) / k2
    return np.where(np.abs(u) < SERIES_MAX ** 2, series, direct)


def step(phi, dphi, k2, width, kappa=None):
    """Carry (phi, phi') across a layer of the given width.

    When ``kappa`` is supplied and the layer is strongly evanescent the
    step uses the exponential basis with that particular root.
    """
    c, sn = cos_sinc(k2, width)
    new_phi = c * phi + sn * dphi
    new_dphi = -k2 * sn * phi + c * dphi
    if kappa is None:
        return new_phi, new_dphi
    kappa = np.asarray(kappa, dtype=complex)
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        a = 0.5 * (phi + dphi / (1j * kappa))
        b = 0.5 * (phi - dphi / (1j * kappa))
        ep = np.exp(1j * kappa * width)
        em = np.exp(-1j * kappa * width)
        ephi = a * ep + b * em
        edphi = 1j * kappa * (a * ep - b * em)
    use = np.abs(kappa.imag) * width >= EXP_BASIS_MIN
    return np.where(use, ephi, new_phi), np.where(use, edphi, new_dphi)


def step_with_derivative(phi, dphi, phi_q, dphi_q, q, k2, width, kappa=None):
    """Carry (phi, phi') and their q-derivatives across a layer."""
    c, sn = cos_sinc(k2, width)
    g = g_function(k2, width, c, sn)
    dc = -q * width * sn
    dsn = q * g
    dm21 = -q * (sn + width * c)
    new_phi_q = c * phi_q + sn * dphi_q + dc * phi + dsn * dphi
    new_dphi_q = -k2 * sn * phi_q + c * dphi_q + dm21 * phi + dc * dphi
    new_phi, new_dphi = step(phi, dphi, k2, width, kappa)
    return new_phi, new_dphi, new_phi_q, new_dphi_q
