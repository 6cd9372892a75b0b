"""Command-line front end: ``jostkit <subcommand> [options]``.

Exit codes: 0 success, 1 failed invariants (verify), 2 validation,
3 numerical non-convergence, 4 inconclusive pole count.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import barrier1d, expansion, radial, resonance
from .config import RunConfig, load_config
from .errors import JostkitError, ValidationError
from .model import PiecewiseConstantPotential, make_test_function
from .output import to_csv, to_json, write_atomic


def _emit(text: str, cfg: RunConfig, args) -> None:
    path = args.out or cfg.output.path
    if path:
        write_atomic(path, text)
    else:
        sys.stdout.write(text)


def _series(header: list[str], rows: list[list], cfg: RunConfig, args) -> None:
    if cfg.output.format == "json":
        cols = list(zip(*rows)) if rows else [[] for _ in header]
        _emit(to_json({h: [float(v) for v in c] for h, c in zip(header, cols)}), cfg, args)
    else:
        _emit(to_csv(header, rows), cfg, args)


def _radial_pot(cfg: RunConfig) -> PiecewiseConstantPotential:
    if cfg.potential.geometry != "radial":
        raise ValidationError("this subcommand needs a radial potential (geometry 'radial')")
    return cfg.potential


def _test_functions(cfg: RunConfig, need: int = 1):
    if len(cfg.test_functions) < need:
        raise ValidationError(f"this subcommand needs at least {need} test function(s) in 'testfn'")
    return cfg.test_functions


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_smatrix(cfg: RunConfig, args) -> int:
    pot = _radial_pot(cfg)
    e = np.linspace(args.emin, args.emax, args.n)
    s, delta = radial.smatrix_scan(e, pot, cfg.consts)
    rows = [[ei, si.real, si.imag, abs(si), di] for ei, si, di in zip(e, s, delta)]
    _series(["E", "re_S", "im_S", "abs_S", "delta"], rows, cfg, args)
    return 0


def cmd_poles(cfg: RunConfig, args) -> int:
    pot = _radial_pot(cfg)
    res = resonance.find_resonances(cfg.search_region, pot, cfg.consts)
    _emit(to_json([r.to_dict() for r in res]), cfg, args)
    return 0


def cmd_gamow(cfg: RunConfig, args) -> int:
    pot = _radial_pot(cfg)
    res = resonance.resonance_by_index(resonance.find_resonances(cfg.search_region, pot, cfg.consts), args.n)
    state = resonance.gamow_state(res, pot, cfg.consts)
    r = np.linspace(0.0, args.rmax, args.points)
    u = state.u(r)
    _series(["r", "re_u", "im_u"], [[ri, ui.real, ui.imag] for ri, ui in zip(r, u)], cfg, args)
    return 0


def cmd_eigfun(cfg: RunConfig, args) -> int:
    pot = _radial_pot(cfg)
    if not args.e > 0:
        raise ValidationError("scattering eigenfunctions need a positive energy")
    r = np.linspace(0.0, args.rmax, args.points)
    plus = radial.ls_eigenfunction(r, args.e, "+", args.norm, pot, cfg.consts)
    minus = radial.ls_eigenfunction(r, args.e, "-", args.norm, pot, cfg.consts)
    rows = [[ri, p.real, p.imag, m.real, m.imag] for ri, p, m in zip(r, plus, minus)]
    _series(["r", "re_chi_plus", "im_chi_plus", "re_chi_minus", "im_chi_minus"], rows, cfg, args)
    return 0


def _line_setup(cfg: RunConfig):
    if cfg.potential.geometry == "line":
        return cfg.potential, list(cfg.test_functions)
    pot = PiecewiseConstantPotential.barrier()
    return pot, [make_test_function(0, 0.5, 0.085, pot), make_test_function(1, 0.5, 0.085, pot, origin=0.5)]


def cmd_barrier1d(cfg: RunConfig, args) -> int:
    pot, tfs = _line_setup(cfg)
    if args.what == "coeffs":
        rows = []
        for k in np.linspace(args.kmin, args.kmax, args.n):
            c = barrier1d.barrier_coefficients(float(k), pot, cfg.consts)
            rows.append([k, c.T.real, c.T.imag, c.R_l.real, c.R_l.imag, c.R_r.real, c.R_r.imag,
                         abs(c.T) ** 2 + abs(c.R_l) ** 2])
        _series(["k", "re_T", "im_T", "re_R_l", "im_R_l", "re_R_r", "im_R_r", "flux"], rows, cfg, args)
        return 0
    if not tfs:
        raise ValidationError("barrier1d complete needs at least one line test function in 'testfn'")
    e_max = barrier1d.energy_cutoff(tfs, cfg.consts)
    out = []
    for i, a in enumerate(tfs):
        for j in range(i, len(tfs)):
            d = barrier1d.completeness_defect_1d(a, tfs[j], e_max, pot, cfg.consts)
            out.append({"phi": i, "psi": j, "defect": d, "abs_defect": abs(d)})
    _emit(to_json({"e_max": e_max, "pairs": out}), cfg, args)
    return 0


def cmd_expand(cfg: RunConfig, args) -> int:
    pot = _radial_pot(cfg)
    tfs = _test_functions(cfg)
    phi_m, phi_p = tfs[0], tfs[1] if len(tfs) > 1 else tfs[0]
    contour = expansion.BackgroundContour(args.angle, args.tau_max)
    rep = expansion.resonance_expansion(phi_m, phi_p, args.t, args.nres, contour, pot, cfg.consts)
    _emit(to_json(rep.to_dict()), cfg, args)
    return 0


def cmd_decay(cfg: RunConfig, args) -> int:
    pot = _radial_pot(cfg)
    phi = _test_functions(cfg)[0]
    times = np.linspace(0.0, args.tmax, args.steps + 1)
    ds = expansion.survival_series(phi, times, pot, cfg.consts)
    rows = [[t, s.real, s.imag, abs(s)] for t, s in zip(ds.times, ds.survival)]
    _series(["t", "re_survival", "im_survival", "abs_survival"], rows, cfg, args)
    summary = {"fitted_gamma": ds.fitted_gamma,
               "fit_window": list(ds.fit_window) if ds.fit_window else None,
               "fit_error": ds.fit_error}
    sys.stderr.write(to_json(summary))
    return 0


def cmd_verify(cfg: RunConfig, args) -> int:
    from .verify import run_suite
    rep = run_suite(cfg)
    _emit(to_json(rep.to_dict()), cfg, args)
    return 0 if rep.passed else 1


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="jostkit", description="Jost-function scattering and resonance toolkit")
    ap.add_argument("--config", help="JSON configuration file (defaults when omitted)")
    ap.add_argument("--out", help="output file (overrides the config; stdout when neither is set)")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("smatrix", help="S(E) and phase shift on a real energy grid (CSV)")
    p.add_argument("--emin", type=float, default=0.25)
    p.add_argument("--emax", type=float, default=50.0)
    p.add_argument("--n", type=int, default=200)
    p.set_defaults(func=cmd_smatrix)

    p = sub.add_parser("poles", help="resonance poles in the search region (JSON)")
    p.set_defaults(func=cmd_poles)

    p = sub.add_parser("gamow", help="Gamow state of resonance n (CSV)")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--rmax", type=float, default=6.0)
    p.add_argument("--points", type=int, default=601)
    p.set_defaults(func=cmd_gamow)

    p = sub.add_parser("eigfun", help="in/out scattering eigenfunctions at energy E (CSV)")
    p.add_argument("--e", type=float, required=True)
    p.add_argument("--norm", choices=("k", "E"), default="k")
    p.add_argument("--rmax", type=float, default=6.0)
    p.add_argument("--points", type=int, default=601)
    p.set_defaults(func=cmd_eigfun)

    p = sub.add_parser("barrier1d", help="line-barrier coefficients (CSV) or completeness (JSON)")
    p.add_argument("what", choices=("coeffs", "complete"))
    p.add_argument("--kmin", type=float, default=0.05)
    p.add_argument("--kmax", type=float, default=50.0)
    p.add_argument("--n", type=int, default=200)
    p.set_defaults(func=cmd_barrier1d)

    p = sub.add_parser("expand", help="resonance expansion report at time t (JSON)")
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--nres", type=int, default=None, help="number of resonance terms (all swept poles if omitted)")
    p.add_argument("--angle", type=float, default=expansion.RAY_ANGLE, help="background ray angle in radians")
    p.add_argument("--tau-max", type=float, default=None, help="ray truncation (automatic if omitted)")
    p.set_defaults(func=cmd_expand)

    p = sub.add_parser("decay", help="survival amplitude series (CSV) and fitted width (stderr JSON)")
    p.add_argument("--tmax", type=float, default=600.0)
    p.add_argument("--steps", type=int, default=300)
    p.set_defaults(func=cmd_decay)

    p = sub.add_parser("verify", help="run the invariant suite (JSON report)")
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        return args.func(cfg, args)
    except JostkitError as exc:
        sys.stderr.write(to_json(exc.to_record()))
        return exc.exit_code
    except OSError as exc:
        sys.stderr.write(to_json({"error": type(exc).__name__, "message": str(exc)}))
        return 2


if __name__ == "__main__":
    sys.exit(main())
