"""Command-line front end.

Exit codes: 0 success, 1 computation error, 2 usage or configuration error.
Artifacts go to ``--out`` or to ``$WAVETRAP_OUTPUT_DIR`` (default
``./wavetrap_output``).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from . import __version__
from .errors import ConfigError, WavetrapError
from .io import OUTPUT_ENV, ResultRecord, Timer, load_scene, write_membership

log = logging.getLogger("wavetrap")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _vec(text: str, n: int = 3) -> np.ndarray:
    try:
        v = np.array([float(t) for t in text.replace(" ", "").split(",")])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected {n} comma-separated numbers, got {text!r}") from None
    if v.size != n:
        raise argparse.ArgumentTypeError(f"expected {n} comma-separated numbers, got {text!r}")
    return v


def _story(text: str) -> tuple:
    if text.strip() in ("", "-", "empty"):
        return ()
    try:
        return tuple(int(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"story must look like 2,1,2, got {text!r}") from None


def _emit(record: ResultRecord, args, stdout: bool = True) -> None:
    paths = record.write(args.out)
    if stdout:
        print(json.dumps(record.as_dict()["results"], indent=2, sort_keys=True))
    log.info("wrote %s", ", ".join(str(p) for p in paths))


# ---------------------------------------------------------------------------
# handlers
# ---------------------------------------------------------------------------

def cmd_scene_validate(args):
    scene = load_scene(args.file)
    with Timer() as tm:
        info = scene.describe(seed=args.seed)
    rec = ResultRecord("scene_validate", {"scene": scene.to_dict()}, info, seed=args.seed,
                       wall_clock=tm.elapsed)
    _emit(rec, args)


def cmd_billiard_trace(args):
    from .billiard import PhasePoint, flow
    scene = load_scene(args.scene)
    xi = args.xi / np.linalg.norm(args.xi)
    with Timer() as tm:
        tr = flow(scene, PhasePoint(args.x, xi), args.t)
    rows = [[ev.time, ev.body, *ev.point, ev.cos_incidence] for ev in tr.events]
    rec = ResultRecord("billiard_trace", {"scene": scene.to_dict(), "x": args.x, "xi": xi, "t": args.t},
                       {"events": len(tr.events), "story": list(tr.story), "escaped": tr.escaped,
                        "final_x": tr.final.x, "final_xi": tr.final.xi},
                       {"events": (["time", "body", "x", "y", "z", "cos_incidence"], rows)},
                       seed=args.seed, wall_clock=tm.elapsed)
    _emit(rec, args)


def cmd_billiard_orbit(args):
    from .billiard import return_map, transfer_monodromy
    scene = load_scene(args.scene)
    with Timer() as tm:
        fd = return_map(scene)
        ex = transfer_monodromy(scene)
    res = fd.as_dict()
    res["lambda_transfer"] = ex.lam
    rec = ResultRecord("billiard_orbit", {"scene": scene.to_dict()}, res, seed=args.seed,
                       wall_clock=tm.elapsed)
    _emit(rec, args)


def cmd_trapped_compute(args):
    from .trapped import Cylinder, compute_trapped_set, shrinkage_fit
    scene = load_scene(args.scene)
    D = Cylinder.around(scene)
    with Timer() as tm:
        grid = compute_trapped_set(scene, D, args.T, spatial_res=args.res, angular_res=args.res,
                                   axial_res=args.res)
        shr = shrinkage_fit(scene, D)
    rec = ResultRecord("trapped_set_compute", {"scene": scene.to_dict(), "T": args.T, "res": args.res},
                       {"members": int(grid.membership.sum()), "grid_points": int(grid.membership.size),
                        "warnings": grid.warnings, "shrinkage": shr.as_dict()},
                       {"shrinkage": (["T", "distance", "used"],
                                      [[a, b, bool(c)] for a, b, c in zip(shr.T, shr.distances, shr.used)])},
                       seed=args.seed, wall_clock=tm.elapsed)
    _emit(rec, args)
    write_membership(rec_dir(args) / "trapped_set_membership.bin", grid)


def rec_dir(args):
    from .io import output_dir
    return output_dir(args.out)


def cmd_phase_eval(args):
    from .phase import PhaseQuery, evaluate_phase
    scene = load_scene(args.scene)
    with Timer() as tm:
        s = evaluate_phase(scene, PhaseQuery(args.x, args.xi, args.story, args.y, args.sign))
    res = {"phase": s.phase, "grad": s.grad, "curvature_eigenvalues": s.curvature_eigenvalues,
           "l_J": s.l_J, "story": list(s.story), "sign": s.sign}
    rec = ResultRecord("phase_eval", {"scene": scene.to_dict(), "x": args.x, "xi": args.xi, "y": args.y,
                                      "story": list(args.story), "sign": args.sign},
                       res, seed=args.seed, wall_clock=tm.elapsed)
    _emit(rec, args)


def cmd_phase_certify(args):
    from .phase import derivative_growth_certificate, domain_threshold, property_sampling
    scene = load_scene(args.scene)
    with Timer() as tm:
        g = derivative_growth_certificate(scene, max_length=args.max_story)
        p = property_sampling(scene, max_length=min(args.max_story, 6), seed=args.seed)
        m = domain_threshold(scene, max_length=args.max_story, seed=args.seed)
    header, rows = g.to_csv_rows()
    rec = ResultRecord("phase_certify", {"scene": scene.to_dict(), "max_story": args.max_story},
                       {"slope_x": g.slope_x, "slope_xi": g.slope_xi, "bound_x": g.bound_x,
                        "properties": p.as_dict(), "domain_threshold": m.as_dict()},
                       {"growth": (header, rows)}, seed=args.seed, wall_clock=tm.elapsed)
    _emit(rec, args)


def cmd_amplitude_decay(args):
    from .amplitude import amplitude_decay
    from .trapped import build_cutoff, expansion_rate
    scene = load_scene(args.scene)
    with Timer() as tm:
        q = build_cutoff(scene, args.eps, args.h, c_est=expansion_rate(scene))
        t = np.linspace(0.0, args.tmax, args.nt)
        dec = amplitude_decay(scene, q, t, budget=args.budget)
    rec = ResultRecord("amplitude_decay", {"scene": scene.to_dict(), "tmax": args.tmax, "eps": args.eps,
                                           "h": args.h, "budget": args.budget},
                       {"rate": dec.rate, "r2": dec.r2},
                       {"decay": (["t", "sum_abs_w0", "fitted_rate"], dec.rows())},
                       seed=args.seed, wall_clock=tm.elapsed)
    _emit(rec, args)


def cmd_amplitude_convergence(args):
    from .amplitude import amplitude_bound_table, convergence_check
    scene = load_scene(args.scene)
    with Timer() as tm:
        rep = convergence_check(scene, r_max=args.rmax)
        tab = amplitude_bound_table(scene)
    header, rows = rep.table()
    res = rep.as_dict()
    res["bound_table_spread"] = tab["spread"]
    rec = ResultRecord("amplitude_convergence", {"scene": scene.to_dict(), "rmax": args.rmax}, res,
                       {"convergence": (header, rows)}, seed=args.seed, wall_clock=tm.elapsed)
    _emit(rec, args)


def cmd_parametrix_decay(args):
    from .parametrix import ParametrixConfig, combined_curve, free_term, reflected_sum, remainder_budget
    from .trapped import expansion_rate
    scene = load_scene(args.scene)
    c = expansion_rate(scene) if args.c_est is None else args.c_est
    cfg = ParametrixConfig(h=args.h, eps=args.eps, K=args.K, k0=args.k0, c_est=c, budget=args.budget)
    with Timer() as tm:
        refl = reflected_sum(scene, cfg)
        comb = combined_curve(scene, cfg, refl)
        free = free_term(cfg, t=np.linspace(2.0, 20.0, 37))
        bud = remainder_budget(cfg, refl.curve.t)
    t = refl.curve.t
    rows = [[t[i], comb["free_sup"][i], refl.curve.values[i] / cfg.h ** 2, comb["combined"][i],
             bud["budget"][i]] for i in range(len(t))]
    res = {"free_t_exponent": free.power, "free_h_exponent": free.diagnostics["h_exponent"],
           "reflected_rate": refl.curve.rate, "reflected_rate_r2": refl.curve.rate_r2,
           "max_normalized_combined": comb["max_normalized"], "remainder_exponent": bud["exponent"],
           "minimal_K": bud["minimal_K"], "contributions": refl.contributions,
           "active_stories": refl.active}
    rec = ResultRecord("parametrix_decay", {"scene": scene.to_dict(), **cfg.as_dict()}, res,
                       {"decay": (["t", "sup_free", "sup_chi0_reflected", "combined", "budget"], rows)},
                       seed=args.seed, wall_clock=tm.elapsed)
    _emit(rec, args)


def cmd_morawetz_report(args):
    from .morawetz import TwoCenterWeight, flux_and_identity_certificate, two_center_analysis
    if args.weight != "two_center":
        raise ConfigError(f"unknown weight {args.weight!r}")
    scene = load_scene(args.scene)
    w = TwoCenterWeight(args.c)
    with Timer() as tm:
        cert = flux_and_identity_certificate(w, scene, seed=args.seed)
        ana = two_center_analysis(args.c, args.A, seed=args.seed, scene=scene)
    rec = ResultRecord("morawetz_report", {"scene": scene.to_dict(), "c": args.c, "A": args.A},
                       {"certificate": cert.as_dict(), "analysis": ana.as_dict()},
                       seed=args.seed, wall_clock=tm.elapsed)
    _emit(rec, args)


def cmd_morawetz_gauge(args):
    from .morawetz import bilaplacian_threshold, verify_bilaplacian
    with Timer() as tm:
        th = bilaplacian_threshold(args.n, args.k)
        v = verify_bilaplacian(args.n, args.k, args.eps, seed=args.seed)
    rec = ResultRecord("morawetz_gauge", {"n": args.n, "k": args.k, "eps": args.eps},
                       {"threshold": th.as_dict(), "verdict": v.as_dict()}, seed=args.seed,
                       wall_clock=tm.elapsed)
    _emit(rec, args)


def _poly_str(p) -> str:
    terms = [f"{c:+g} e^{i}" if i else f"{c:+g}" for i, c in enumerate(p.coef) if c != 0]
    return " ".join(terms) if terms else "0"


def cmd_morawetz_threshold(args):
    from .morawetz import bilaplacian_threshold
    th = bilaplacian_threshold(args.n, args.k)
    print(f"A(e) = {_poly_str(th.A)}")
    print(f"B(e) = {_poly_str(th.B)}")
    print(f"C(e) = {_poly_str(th.C)}")
    print(f"eps0 = {th.eps0:.15g}")
    if args.n == 4 and args.k == 2:
        print("eps0 = (1+sqrt(3))/4")
    if th.note:
        print(f"note: {th.note}")
    rec = ResultRecord("morawetz_threshold", {"n": args.n, "k": args.k}, th.as_dict(), seed=args.seed)
    rec.write(args.out)


def cmd_acceptance(args):
    from .acceptance import run_all
    sel = None if not args.only else [int(t) for t in args.only.split(",")]
    with Timer() as tm:
        results = run_all(sel)
    rec = ResultRecord("acceptance", {"only": sel}, {str(r.number): r.as_dict() for r in results},
                       seed=args.seed, wall_clock=tm.elapsed)
    rec.write(args.out)
    n_fail = sum(not r.passed for r in results)
    print(f"{len(results) - n_fail}/{len(results)} criteria passed")
    return 1 if n_fail else 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--out", default=None, help=f"output directory (default ${OUTPUT_ENV} or ./wavetrap_output)")
    common.add_argument("--seed", type=int, default=0, help="random seed recorded in every artifact")
    common.add_argument("-v", "--verbose", action="store_true")
    scene_arg = _Parser(add_help=False)
    scene_arg.add_argument("--scene", default="standard",
                           help="scene JSON file or a named scene (standard, wide)")

    p = _Parser(prog="wavetrap", description="Trapped-ray wave toolkit.")
    p.add_argument("--version", action="version", version=f"wavetrap {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("scene", help="scene files").add_subparsers(dest="action", required=True,
                                                                   parser_class=_Parser)
    v = s.add_parser("validate", parents=[common], help="print trapped ray, gap, convexity margins")
    v.add_argument("file", help="scene JSON file or a named scene")
    v.set_defaults(func=cmd_scene_validate)

    b = sub.add_parser("billiard", help="billiard flow").add_subparsers(dest="action", required=True,
                                                                        parser_class=_Parser)
    t = b.add_parser("trace", parents=[common, scene_arg],
                     description="CSV events: time, body, x, y, z, cos_incidence")
    t.add_argument("--x", type=_vec, required=True)
    t.add_argument("--xi", type=_vec, required=True)
    t.add_argument("--t", type=float, required=True)
    t.set_defaults(func=cmd_billiard_trace)
    o = b.add_parser("orbit", parents=[common, scene_arg], help="period, eigenvalues and lambda")
    o.set_defaults(func=cmd_billiard_orbit)

    ts = sub.add_parser("trapped-set", help="trapped set").add_subparsers(dest="action", required=True,
                                                                          parser_class=_Parser)
    c = ts.add_parser("compute", parents=[common, scene_arg],
                      description="binary membership file (JSON header line: dims, spacings, T; then "
                                  "packed bits) and CSV shrinkage: T, distance, used")
    c.add_argument("--T", type=float, required=True)
    c.add_argument("--res", type=int, default=9)
    c.set_defaults(func=cmd_trapped_compute)

    ph = sub.add_parser("phase", help="reflected phases").add_subparsers(dest="action", required=True,
                                                                         parser_class=_Parser)
    e = ph.add_parser("eval", parents=[common, scene_arg], help="phase, gradient, curvature eigenvalues")
    e.add_argument("--story", type=_story, default=())
    e.add_argument("--y", type=_vec, required=True)
    e.add_argument("--xi", type=_vec, required=True)
    e.add_argument("--x", type=_vec, required=True)
    e.add_argument("--sign", type=int, choices=(1, -1), default=1)
    e.set_defaults(func=cmd_phase_eval)
    ce = ph.add_parser("certify", parents=[common, scene_arg],
                       description="CSV growth: length, m0, m1_x, m1_x_fd, d_xi, reliable")
    ce.add_argument("--max-story", type=int, default=12)
    ce.set_defaults(func=cmd_phase_certify)

    am = sub.add_parser("amplitude", help="transport amplitudes").add_subparsers(
        dest="action", required=True, parser_class=_Parser)
    d = am.add_parser("decay", parents=[common, scene_arg], description="CSV decay: t, sum_abs_w0, fitted_rate")
    d.add_argument("--tmax", type=float, required=True)
    d.add_argument("--nt", type=int, default=60)
    d.add_argument("--eps", type=float, default=1.0)
    d.add_argument("--h", type=float, default=0.05)
    d.add_argument("--budget", type=int, default=12)
    d.set_defaults(func=cmd_amplitude_decay)
    cv = am.add_parser("convergence", parents=[common, scene_arg],
                       description="CSV convergence: pattern, r, ratio_min, ratio_max, rel_step")
    cv.add_argument("--rmax", type=int, default=10)
    cv.set_defaults(func=cmd_amplitude_convergence)

    pa = sub.add_parser("parametrix", help="parametrix decay curves").add_subparsers(
        dest="action", required=True, parser_class=_Parser)
    pd = pa.add_parser("decay", parents=[common, scene_arg],
                       description="CSV decay: t, sup_free, sup_chi0_reflected, combined, budget")
    pd.add_argument("--h", type=float, required=True)
    pd.add_argument("--eps", type=float, required=True)
    pd.add_argument("--K", type=int, default=12)
    pd.add_argument("--k0", type=int, choices=(0, 1), default=1)
    pd.add_argument("--budget", type=int, default=12)
    pd.add_argument("--c-est", type=float, default=None)
    pd.set_defaults(func=cmd_parametrix_decay)

    mo = sub.add_parser("morawetz", help="Morawetz weights").add_subparsers(
        dest="action", required=True, parser_class=_Parser)
    r = mo.add_parser("report", parents=[common, scene_arg], help="two-center weight report")
    r.add_argument("--weight", default="two_center", choices=("two_center",))
    r.add_argument("--c", type=_vec, default=np.array([4.0, 0.0, 0.0]))
    r.add_argument("--A", type=float, default=8.0)
    r.set_defaults(func=cmd_morawetz_report)
    g = mo.add_parser("gauge", parents=[common], help="bilaplacian sign verdict for a gauge")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--k", type=int, required=True)
    g.add_argument("--eps", type=float, required=True)
    g.set_defaults(func=cmd_morawetz_gauge)
    th = mo.add_parser("threshold", parents=[common], help="coefficient polynomials and eps0")
    th.add_argument("--n", type=int, required=True)
    th.add_argument("--k", type=int, required=True)
    th.set_defaults(func=cmd_morawetz_threshold)

    ac = sub.add_parser("acceptance", parents=[common], help="run acceptance criteria 1-11")
    ac.add_argument("--only", default="", help="comma-separated criterion numbers")
    ac.set_defaults(func=cmd_acceptance)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    except SystemExit as exc:       # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        code = args.func(args)
    except ConfigError as exc:
        print(f"wavetrap: configuration error: {exc}", file=sys.stderr)
        return 2
    except WavetrapError as exc:
        print(f"wavetrap: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return int(code or 0)


if __name__ == "__main__":
    sys.exit(main())
