"""Single table of physics and numerics defaults.

Every default used by a code path is read from here; nothing numeric is
hard-wired elsewhere except algorithmic constants (quadrature rules).
"""

from __future__ import annotations

import math

DEFAULTS = {
    # units: hbar = 1, mass = 1/2 so that E = k**2
    "hbar": 1.0,
    "mass": 0.5,
    # standard shell: free inside r < 1, V0 = 10 on 1 < r < 2, free outside
    "geometry": "radial",
    "boundaries": [1.0, 2.0],
    "heights": [0.0, 10.0, 0.0],
    # pole search box in the wave-number plane
    "region": {"re_min": 0.05, "re_max": 6.0, "im_min": -1.5, "im_max": -1e-8},
    # adaptive quadrature
    "quad": {"abs_tol": 1e-12, "rel_tol": 1e-10, "max_subdiv": 2000},
    # Gaussian test functions r**p exp(-(r-c)**2/sigma**2)
    "testfn": [
        {"p": 1, "c": 0.5, "sigma": 0.085},
        {"p": 2, "c": 0.45, "sigma": 0.08},
    ],
}

# |phi(r_j)| / max|phi| below this at every discontinuity r_j
NEGLIGIBILITY = 1e-13
# switch a layer to the {1, r} limit when |kappa| * width is below this
DEGENERATE_KAPPA_WIDTH = 1e-6
# wave numbers smaller than this are flagged as threshold evaluations
THRESHOLD_Q = 1e-8
# |J+| relative to its natural scale below which S is treated as at a pole
POLE_PROXIMITY = 1e-12
# relative tail level used to truncate Gaussian-weighted integrals
TAIL_LEVEL = 1e-17
LOG_TAIL = -math.log(TAIL_LEVEL)
# background ray in the q-plane, radians below the positive real axis
RAY_ANGLE = -math.pi / 4
# dominance ratio defining the exponential-decay fit window
DOMINANCE = 10.0
# radius and node count of residue contours
RESIDUE_RADIUS = 1e-3
RESIDUE_NODES = 64
