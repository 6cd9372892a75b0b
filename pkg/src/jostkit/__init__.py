"""Jost-function toolkit for piecewise-constant potentials.

Scattering matrices, resonance poles, Gamow states, spectral completeness
and regulated resonance expansions of transition amplitudes.
"""

from .errors import JostkitError
from .model import PhysConsts, PiecewiseConstantPotential, TestFunction, make_test_function
from .numerics import QuadratureSettings, Region
from .radial import jost, smatrix
from .resonance import Resonance, find_resonances, gamow_state
from .expansion import (BackgroundContour, resonance_expansion, survival_series,
                        transition_amplitude_direct)

__all__ = [
    "BackgroundContour", "JostkitError", "PhysConsts", "PiecewiseConstantPotential", "QuadratureSettings",
    "Region", "Resonance", "TestFunction", "find_resonances", "gamow_state", "jost", "make_test_function",
    "resonance_expansion", "smatrix", "survival_series", "transition_amplitude_direct",
]
__version__ = "0.1.0"
