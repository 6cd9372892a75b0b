"""Deterministic invariant suite behind the ``verify`` subcommand.

Each check measures one quantity, compares it with a threshold and
records the margin. Checks are tagged with the acceptance criterion they
belong to (1-14) or with None for module-level invariants. Random sample
points come from a fixed seed so reports are byte-identical across runs.
"""

from __future__ import annotations

import math
import traceback
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import barrier1d, expansion, oracles, radial, resonance
from .config import RunConfig, parse_config
from .defaults import NEGLIGIBILITY
from .errors import JostkitError, ValidationError
from .model import (EnergyPoint, PhysConsts, PiecewiseConstantPotential, energy_of_wavenumber,
                    make_test_function, wavenumber_of_energy)
from .numerics import QuadratureSettings, Region, circle_contour, count_zeros, quad_contour, quad_interval

SEED = 20240607
CRITERIA = {
    1: "S-matrix unitarity on the real energy axis",
    2: "Schwarz reflection of the Jost functions",
    3: "independence of the interior wave-number branch",
    4: "argument-principle poles equal the grid-scan oracle poles",
    5: "infinite-well limit of the first resonance",
    6: "Gamow-state value and residue identities",
    7: "purely outgoing exterior of Gamow states",
    8: "analytic versus contour residues of S",
    9: "radial, line and free completeness",
    10: "resonance expansion against the direct amplitude",
    11: "exponential decay law and its long-time breakdown",
    12: "line-barrier unitarity, reciprocity and oracle agreement",
    13: "Hamiltonian sandwiches of scattering and Gamow pairings",
    14: "repeatability of the computed quantities",
}
INFINITE_WELL_HEIGHTS = (50.0, 200.0, 800.0)
INFINITE_WELL_REGION = Region(0.05, 6.0, -1.5, 0.5)
LINE_BARRIER = PiecewiseConstantPotential.barrier(0.0, 1.0, 5.0)


@dataclass
class Check:
    name: str
    criterion: int | None
    value: float
    threshold: float
    sense: str = "below"          # value must be below (or above) the threshold
    detail: dict = field(default_factory=dict)
    error: str | None = None

    @property
    def passed(self) -> bool:
        if self.error is not None or not math.isfinite(self.value):
            return False
        return self.value < self.threshold if self.sense == "below" else self.value > self.threshold

    @property
    def margin(self) -> float:
        """threshold/value (below) or value/threshold (above); > 1 means pass."""
        if self.error is not None or not math.isfinite(self.value):
            return 0.0
        num, den = (self.threshold, self.value) if self.sense == "below" else (self.value, self.threshold)
        return math.inf if den == 0 else num / den

    def to_dict(self) -> dict:
        return {"name": self.name, "criterion": self.criterion, "passed": self.passed,
                "value": self.value, "threshold": self.threshold, "sense": self.sense,
                "margin": self.margin if math.isfinite(self.margin) else "inf",
                "detail": self.detail, "error": self.error}


@dataclass
class Report:
    checks: list[Check]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def criteria(self) -> dict[int, bool]:
        out = {}
        for n in CRITERIA:
            mine = [c for c in self.checks if c.criterion == n]
            out[n] = bool(mine) and all(c.passed for c in mine)
        return out

    def failures(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed]

    def to_dict(self) -> dict:
        crit = self.criteria()
        return {"passed": self.passed,
                "criteria": [{"criterion": n, "description": CRITERIA[n], "passed": crit[n]} for n in CRITERIA],
                "failures": self.failures(),
                "checks": [c.to_dict() for c in self.checks]}


class _Context:
    """Shared inputs and cached intermediate results."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.consts: PhysConsts = cfg.consts
        self.pot = cfg.potential if cfg.potential.geometry == "radial" else PiecewiseConstantPotential.shell()
        self.line = cfg.potential if cfg.potential.geometry == "line" else LINE_BARRIER
        if cfg.potential.geometry == "radial":
            self.tfs = list(cfg.test_functions)
        else:
            self.tfs = [make_test_function(1, 0.5, 0.085, self.pot), make_test_function(2, 0.45, 0.08, self.pot)]
        self.region = cfg.search_region
        self.rng = np.random.default_rng(SEED)
        self._cache: dict = {}

    def cached(self, key, fn):
        if key not in self._cache:
            self._cache[key] = fn()
        return self._cache[key]

    @property
    def poles(self) -> list[resonance.Resonance]:
        return self.cached("poles", lambda: resonance.find_resonances(self.region, self.pot, self.consts))

    @property
    def expansion_poles(self) -> list[resonance.Resonance]:
        return self.cached("xpoles", lambda: expansion.expansion_resonances(self.pot, self.consts))

    def pair(self, a: int, b: int) -> expansion.SpectralPair:
        return self.cached(("pair", a, b), lambda: expansion.SpectralPair(self.tfs[a], self.tfs[b],
                                                                           self.pot, self.consts))

    def line_tfs(self):
        return self.cached("line_tfs", lambda: [make_test_function(0, 0.5, 0.085, self.line),
                                                make_test_function(1, 0.5, 0.085, self.line, origin=0.5)])

    def random_q(self, n: int) -> np.ndarray:
        return self.rng.uniform(-8, 8, n) + 1j * self.rng.uniform(-3, 3, n)


def _rel(a, b) -> float:
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-300)))


# ---------------------------------------------------------------------------
# numerics and model
# ---------------------------------------------------------------------------

def _numerics(ctx: _Context) -> list[Check]:
    st = QuadratureSettings(abs_tol=1e-14, rel_tol=1e-13, max_subdivisions=4000)
    val = quad_interval(lambda x: np.sin(50 * x) * np.exp(-x), 0.0, 10.0, st)
    exact = 50 * (1 - math.exp(-10) * (math.cos(500) + math.sin(500) / 50)) / 2501
    loop = quad_contour(lambda z: 1 / z, circle_contour(0j, 1.0), st)
    sq = count_zeros(lambda z: z * z + 1, lambda z: 2 * z, Region(-2, 2, -2, 2))
    return [Check("numerics.oscillatory_quadrature", None, abs(val - exact), 1e-10),
            Check("numerics.closed_contour", None, abs(loop - 2j * math.pi), 1e-10),
            Check("numerics.winding_count", None, abs(sq - 2), 0.5)]


def _model(ctx: _Context) -> list[Check]:
    worst = max(r for tf in ctx.tfs for _, r in tf.negligibility)
    qs = ctx.random_q(50)
    back = [wavenumber_of_energy(energy_of_wavenumber(complex(q), ctx.consts), ctx.consts) for q in qs]
    sheet = [EnergyPoint(complex(e), "II") for e in (1 - 1j, -1 + 0.5j)]
    signs = [wavenumber_of_energy(e, ctx.consts).imag for e in sheet]
    return [Check("model.discontinuity_negligibility", None, worst, NEGLIGIBILITY),
            Check("model.sheet_round_trip", None, _rel(back, qs), 1e-14),
            Check("model.second_sheet_lower_half_plane", None, max(signs), 0.0)]


# ---------------------------------------------------------------------------
# radial
# ---------------------------------------------------------------------------

def _radial(ctx: _Context) -> list[Check]:
    pot, c = ctx.pot, ctx.consts
    energies = np.linspace(0.25, 50.0, 200)
    s, _ = radial.smatrix_scan(energies, pot, c)
    out = [Check("radial.unitarity", 1, float(np.max(np.abs(np.abs(s) - 1))), 1e-10)]

    q = ctx.random_q(100)
    jp_c = radial.jplus(np.conj(q), pot, c)
    jm = radial.jminus(q, pot, c)
    out.append(Check("radial.schwarz_reflection", 2,
                     float(np.max(np.abs(np.conj(jp_c) - jm) / (1 + np.abs(jm)))), 1e-12))

    q = ctx.random_q(50)
    a = radial.jost_arrays(q, pot, c, derivs=False)
    b = radial.jost_arrays(q, pot, c, derivs=False, flip_interior=True)
    out.append(Check("radial.branch_independence", 3, max(_rel(b[0], a[0]), _rel(b[1], a[1])), 1e-12))

    free = PiecewiseConstantPotential.free()
    jf = radial.jost_arrays(ctx.random_q(20), free, c, derivs=False)
    out.append(Check("radial.free_jost_unity", None,
                     float(max(np.max(np.abs(jf[0] - 1)), np.max(np.abs(jf[1] - 1)))), 1e-14))

    r = np.linspace(0.05, 4.0, 40)
    worst = 0.0
    for qq in (1.3, 2.319 - 0.0093j, 4.0 + 0.5j):
        ref = oracles.shoot_regular(qq, r, pot, c)
        mine = radial.regular_solution(qq, pot, c).chi(r)
        worst = max(worst, float(np.max(np.abs(mine - ref)) / np.max(np.abs(ref))))
    out.append(Check("radial.ode_oracle", None, worst, 1e-9))

    g = radial.growth_bound_check(2.0 - 1.0j, np.linspace(0.05, 6.0, 60), pot, c)
    out.append(Check("radial.growth_bound", None, 1.0 / g.margin if g.margin > 0 else math.inf, 1.0,
                     detail={"constant": g.constant, "inv_jplus_max": g.inv_jplus_max}))

    tf = ctx.tfs[0]
    worst_h, worst_conj = 0.0, 0.0
    for k in (0.7, 2.319, 5.0):
        base = radial.ls_pairing(tf, k, "+", "ket", pot, c)
        hphi = radial.ls_pairing(tf, k, "+", "ket", pot, c, times=1)
        worst_h = max(worst_h, abs(hphi - c.energy(k) * base) / abs(c.energy(k) * base))
        bra = radial.ls_pairing(tf, k, "-", "bra", pot, c)
        worst_conj = max(worst_conj, abs(bra - np.conj(radial.ls_pairing(tf, k, "-", "ket", pot, c))) / abs(bra))
    out.append(Check("radial.hamiltonian_sandwich", 13, worst_h, 1e-8))
    out.append(Check("radial.bra_ket_conjugation", None, worst_conj, 1e-12))
    return out


# ---------------------------------------------------------------------------
# resonances
# ---------------------------------------------------------------------------

def _resonance(ctx: _Context) -> list[Check]:
    pot, c = ctx.pot, ctx.consts
    poles = ctx.poles
    out = []
    ks = sorted((r.k for r in poles), key=lambda z: (z.real, z.imag))
    ref = oracles.grid_scan_poles(ctx.region, pot, c)
    certified = count_zeros(lambda q: radial.jplus(q, pot, c), lambda q: radial.djplus(q, pot, c), ctx.region)
    dist = max((abs(a - b) for a, b in zip(ks, ref)), default=0.0) if len(ks) == len(ref) else math.inf
    out.append(Check("resonance.oracle_pole_match", 4, dist, 1e-8,
                     detail={"finder": len(ks), "oracle": len(ref), "certified": certified}))
    out.append(Check("resonance.certified_count", 4, float(abs(certified - len(ks)) + abs(len(ref) - len(ks))),
                     0.5))

    shifts, gammas = [], []
    for v0 in INFINITE_WELL_HEIGHTS:
        res = resonance.find_resonances(INFINITE_WELL_REGION, PiecewiseConstantPotential.shell(1.0, 2.0, v0), c)
        first = min((r for r in res if r.n > 0), key=lambda r: r.n)
        shifts.append(abs(first.z.real - math.pi ** 2))
        gammas.append(first.gamma)
    bad = sum(1 for a, b in zip(shifts, shifts[1:]) if not b < a) + sum(
        1 for a, b in zip(gammas, gammas[1:]) if not (b < a and b > 0))
    out.append(Check("resonance.infinite_well_limit", 5, float(bad), 0.5,
                     detail={"heights": list(INFINITE_WELL_HEIGHTS), "re_shift": shifts, "gamma": gammas}))

    radii = np.linspace(0.1, 3.9, 20)
    ext = np.linspace(pot.range + 0.1, pot.range + 6.0, 20)
    v_rel = r_rel = pobc = resid = schro = partner = jp_rel = 0.0
    for res in poles:
        d = resonance.residue_relation_defect(res, radii, pot, c, detail=True)
        v_rel, r_rel = max(v_rel, d["value_relation"]), max(r_rel, d["residue_relation"])
        st = resonance.gamow_state(res, pot, c)
        ratio = st.u(ext) / np.exp(1j * res.k * ext)
        pobc = max(pobc, float(np.max(np.abs(ratio - ratio[0])) / abs(ratio[0])))
        resid = max(resid, abs(res.res_S - res.res_S_contour) / abs(res.res_S))
        schro = max(schro, float(np.max(resonance.schrodinger_residual(st, radii, pot, c))))
        mirror = resonance.partner(res, pot, c)
        partner = max(partner, abs(mirror.res_S + np.conj(res.res_S)) / abs(res.res_S))
        jp_rel = max(jp_rel, res.jplus_abs / resonance.jplus_tolerance(res.k, res.dJplus))
    out += [Check("resonance.gamow_value_relation", 6, v_rel, 1e-9),
            Check("resonance.gamow_residue_relation", 6, r_rel, 1e-7),
            Check("resonance.outgoing_exterior", 7, pobc, 1e-12),
            Check("resonance.residue_crosscheck", 8, resid, 1e-8),
            Check("resonance.schrodinger_residual", None, schro, 1e-8),
            Check("resonance.mirror_residue_symmetry", None, partner, 1e-10),
            Check("resonance.jplus_at_poles", None, jp_rel, 1.0)]

    tf = ctx.tfs[0]
    worst = 0.0
    for res in poles:
        base = resonance.gamow_pairing(tf, res, "ket", pot, c)
        hphi = resonance.gamow_pairing(tf, res, "ket", pot, c, times=1)
        worst = max(worst, abs(hphi - res.z * base) / abs(res.z * base))
    out.append(Check("resonance.hamiltonian_sandwich", 13, worst, 1e-8))

    if poles:
        z = poles[0].z
        w = z.real + 1j
        f = lambda e: np.exp(-1j * e * 0.5) / (e - w) ** 2
        kernel = resonance.complex_delta_contour_check(f, z)
        out.append(Check("resonance.complex_delta", None, abs(kernel - f(z)) / abs(f(z)), 1e-6))
    return out


# ---------------------------------------------------------------------------
# line barrier
# ---------------------------------------------------------------------------

def _barrier(ctx: _Context) -> list[Check]:
    pot, c = ctx.line, ctx.consts
    ks = np.logspace(math.log10(0.05), math.log10(50.0), 200)
    coeffs = [barrier1d.barrier_coefficients(float(k), pot, c) for k in ks]
    uni = max(max(x.unitarity_defect()) for x in coeffs)
    recip = max(abs(x.T - x.T_r) for x in coeffs)
    worst = 0.0
    for k in ks[::20]:
        ref = oracles.shoot_barrier(float(k), pot, c)
        mine = barrier1d.barrier_coefficients(float(k), pot, c)
        worst = max(worst, abs(mine.T - ref["T"]), abs(mine.R_l - ref["R_l"]), abs(mine.R_r - ref["R_r"]))
    out = [Check("barrier1d.unitarity", 12, uni, 1e-10),
           Check("barrier1d.reciprocity", 12, recip, 1e-12),
           Check("barrier1d.ode_oracle", 12, worst, 1e-8)]

    ev, od = ctx.line_tfs()
    e_max = barrier1d.energy_cutoff([ev, od], c)
    comp = max(abs(barrier1d.completeness_defect_1d(a, b, e_max, pot, c)) for a, b in ((ev, ev), (od, od), (ev, od)))
    out.append(Check("barrier1d.completeness", 9, comp, 1e-6))
    free = PiecewiseConstantPotential.free("line")
    g = make_test_function(0, 0.0, 0.3, free)
    out.append(Check("barrier1d.free_parseval", 9,
                     abs(barrier1d.completeness_defect_1d(g, g, barrier1d.energy_cutoff([g], c), free, c)), 1e-6))

    d = barrier1d.commutator_check(ev, c, detail=True)
    out.append(Check("barrier1d.canonical_commutator", None, d["residual"], 1e-10,
                     detail={"expectation": d["expectation"]}))
    out.append(Check("barrier1d.uncertainty_product", None, d["uncertainty_product"] - 0.5 * c.hbar, -1e-12,
                     sense="above"))
    errs = [e for _, e in barrier1d.delta_smoke_test(0.3)]
    out.append(Check("barrier1d.delta_normalisation", None, max(errs), 1e-6, detail={"errors": errs}))
    return out


# ---------------------------------------------------------------------------
# expansion
# ---------------------------------------------------------------------------

def _expansion(ctx: _Context) -> list[Check]:
    pot, c = ctx.pot, ctx.consts
    f1, f2 = ctx.tfs[0], ctx.tfs[1 % len(ctx.tfs)]
    out = []
    pairs = [(0, 0), (0, 1 % len(ctx.tfs)), (1 % len(ctx.tfs), 1 % len(ctx.tfs))]
    comp = max(abs(expansion.completeness_defect_radial(ctx.tfs[a], ctx.tfs[b], None, pot, c)) for a, b in pairs)
    out.append(Check("expansion.radial_completeness", 9, comp, 1e-6))
    free = PiecewiseConstantPotential.free()
    g = make_test_function(1, 0.5, 0.085, free)
    out.append(Check("expansion.free_parseval", 9,
                     abs(expansion.completeness_defect_radial(g, g, None, free, c)), 1e-6))

    pair = ctx.pair(0, 1 % len(ctx.tfs))
    inner = quad_interval(lambda x: np.conj(f1(x)) * f2(x), 0.0, max(f1.window[1], f2.window[1]),
                          QuadratureSettings(abs_tol=1e-15, rel_tol=1e-13))
    direct0 = complex(pair.direct(0.0)[0])
    spectral0 = inner - expansion.completeness_defect_radial(f1, f2, None, pot, c)
    out.append(Check("expansion.direct_matches_completeness", None, abs(direct0 - spectral0), 2e-6))
    ts = np.linspace(0.0, 20.0, 81)
    out.append(Check("expansion.amplitude_bound", None, float(np.max(np.abs(pair.direct(ts)))), 1.0 + 1e-10))

    poles = ctx.expansion_poles
    rep = expansion.resonance_expansion(f1, f2, 1.0, None, expansion.BackgroundContour(), pot, c, poles, pair)
    out.append(Check("expansion.flagship_defect", 10, rep.defect / abs(rep.direct), 1e-3,
                     detail={"defect": rep.defect, "direct": rep.direct, "n_terms": len(rep.resonance_terms)}))
    ladder = expansion.refinement_ladder(f1, f2, 1.0, pot, c, resonances=poles, pair=pair)
    d = [x.defect for x in ladder]
    out.append(Check("expansion.refinement_ladder", 10, max(b / a for a, b in zip(d, d[1:])), 1.0,
                     detail={"defects": d, "t_max": [x.t_max for x in ladder]}))
    rot = expansion.rotation_defect(f1, f2, 1.0, (-math.pi / 4, -math.pi / 3), pot, c, poles, pair)
    out.append(Check("expansion.rotation_invariance", 10, rot / abs(rep.direct), 1e-6))
    cross, crossed = expansion.pole_crossing_defect(f1, f2, 1.0, (-0.03, -0.07), pot, c, poles, pair)
    out.append(Check("expansion.pole_crossing", 10, cross, 1e-6, detail={"crossed": crossed}))
    consistency = max(max(r.defect / max(1e-3 * abs(r.direct), 1e-8) for r in (rep, *ladder[-1:])), 0.0)
    out.append(Check("expansion.consistency", None, consistency, 1.0))

    free_pair = expansion.SpectralPair(g, g, free, c)
    frep = expansion.resonance_expansion(g, g, 1.0, None, expansion.BackgroundContour(), free, c, [], free_pair)
    out.append(Check("expansion.free_background_only", None, frep.defect, 1e-6))

    fixed = expansion.BackgroundContour(t_max=rep.t_max)
    trend = [expansion.resonance_expansion(f1, f2, t, None, fixed, pot, c, poles, pair).defect
             for t in (1.0, 0.3, 0.1)]
    out.append(Check("expansion.small_time_trend", None,
                     float(sum(1 for a, b in zip(trend, trend[1:]) if not b > a)), 0.5,
                     detail={"times": [1.0, 0.3, 0.1], "defects": trend}))

    times = np.linspace(0.0, 600.0, 301)
    series = expansion.survival_series(f1, times, pot, c, poles, pair=ctx.pair(0, 0))
    lead = min((r for r in poles if r.n > 0), key=lambda r: r.n)
    gamma_ref = 2.0 * abs(lead.z.imag) / c.hbar
    if series.fitted_gamma is None:
        out.append(Check("expansion.decay_rate", 11, math.inf, 0.05, error=series.fit_error))
    else:
        out.append(Check("expansion.decay_rate", 11, abs(series.fitted_gamma - gamma_ref) / gamma_ref, 0.05,
                         detail={"fitted": series.fitted_gamma, "pole": gamma_ref,
                                 "window": list(series.fit_window)}))
    out.append(Check("expansion.nonexponential_tail", 11, expansion.deviation_beyond_window(series), 0.1,
                     sense="above"))
    out.append(Check("expansion.survival_at_zero", None, abs(abs(series.survival[0]) - 1.0), 1e-6))
    return out


def _repeat(ctx: _Context) -> list[Check]:
    """Recompute a sample of quantities from scratch and require bitwise equality."""
    def sample():
        s, _ = radial.smatrix_scan(np.linspace(0.25, 50.0, 50), ctx.pot, ctx.consts)
        ks = [r.k for r in resonance.find_resonances(ctx.region, ctx.pot, ctx.consts)]
        return np.concatenate([s, np.array(ks, dtype=complex)])
    a, b = sample(), sample()
    same = a.shape == b.shape and bool(np.all(a.view(np.float64) == b.view(np.float64)))
    return [Check("repeatability.bitwise", 14, 0.0 if same else 1.0, 0.5)]


GROUPS: list[tuple[str, Callable[[_Context], list[Check]]]] = [
    ("numerics", _numerics), ("model", _model), ("radial", _radial), ("resonance", _resonance),
    ("barrier1d", _barrier), ("expansion", _expansion), ("repeatability", _repeat)]


def run_suite(cfg: RunConfig | None = None, groups: list[str] | None = None) -> Report:
    """Run every check group (or the named subset); errors become failed checks."""
    known = [name for name, _ in GROUPS]
    unknown = sorted(set(groups or ()) - set(known))
    if unknown:
        raise ValidationError(f"unknown check groups {unknown}; choose from {known}")
    cfg = cfg or parse_config("")
    ctx = _Context(cfg)
    checks: list[Check] = []
    for name, fn in GROUPS:
        if groups is not None and name not in groups:
            continue
        try:
            checks.extend(fn(ctx))
        except (JostkitError, ArithmeticError, ValueError) as exc:
            last = traceback.extract_tb(exc.__traceback__)[-1]
            checks.append(Check(f"{name}.error", None, math.inf, 0.0,
                                error=f"{type(exc).__name__}: {exc} [{last.name}]"))
    return Report(checks)
