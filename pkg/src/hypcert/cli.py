"""Command-line front end.

Exit codes: 0 success / certified, 3 condition not satisfied, 2 invalid
input, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .boundary import check_boundary, rho_inf
from .counterexample import BumpSpec, dv_dt_at_zero, psi0_eval, y2
from .errors import (CflViolation, CombinatorialLimit, CompatibilityError, DecayedToZero,
                     DomainError, HypcertError, InconclusiveError, IntegrationFailure,
                     NonFinite, NotFound, OracleMismatch, ParseError, PreconditionError,
                     ResolutionError, SupportError, ValidationError)
from .interior import WeightProfile, search_feasible
from .lemma import LemmaInstance, brute_force_i, check_ii, check_iii, find_p1, p_analytic
from .lyapunov import build_series, fit_gamma, verify_decrease, write_series_csv
from .model import dump_canonical, load_spec, read_json
from .report import certify, report_write
from .simulator import run

log = logging.getLogger("hypcert")

INVALID = (ParseError, ValidationError, DomainError, PreconditionError, ResolutionError,
           SupportError, CompatibilityError, CombinatorialLimit, CflViolation)
NUMERICAL = (IntegrationFailure, NonFinite, OracleMismatch, InconclusiveError, NotFound,
             DecayedToZero)


def _write(obj, path):
    text = dump_canonical(obj) + "\n"
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _out(args, own=None):
    return own if own else getattr(args, "out", None)


def load_weights(path, spec):
    """Weights from an interior certificate, a certify report or a bare array."""
    d = read_json(path)
    if isinstance(d, dict):
        if "interior" in d:
            d = d["interior"]
        f = d.get("f", d.get("weights"))
        mu = d.get("mu") or 0.0
    else:
        f, mu = d, 0.0
    if f is None:
        raise ParseError(f"{path}: no weights found (expected key 'f')")
    f = np.asarray(f, dtype=float)
    if f.shape == (spec.n,):
        f = np.repeat(f[:, None], spec.nx, axis=1)
    if f.shape != (spec.n, spec.nx):
        raise ValidationError(f"{path}: weights shape {f.shape} != ({spec.n}, {spec.nx})")
    return WeightProfile(f, mu=mu)


def cmd_check_interior(args):
    spec = load_spec(args.spec)
    cert = search_feasible(spec, budget=args.budget, seed=args.seed, sigma=args.sigma)
    p = cert.profile
    out = dict(feasible=cert.feasible, min_f=cert.min_f,
               min_margin=cert.min_margin if np.isfinite(cert.min_margin) else None,
               f=None if p is None else p.f.tolist(), mu=spec.mu if p is None else p.mu,
               sigma=None if p is None else p.sigma,
               margins=None if cert.margins is None else cert.margins.tolist(),
               f0=None if cert.f0 is None else cert.f0.tolist(),
               best_reach=cert.best_reach, evaluations=cert.evaluations, notes=cert.notes)
    _write(out, _out(args))
    log.info("interior feasible=%s min_margin=%s", cert.feasible, out["min_margin"])
    return 0 if cert.feasible else 3


def cmd_check_boundary(args):
    spec = load_spec(args.spec)
    prof = load_weights(args.weights, spec)
    b = check_boundary(spec, prof, budget=args.budget, seed=args.seed)
    out = dict(delta=b.delta.tolist(), theta=b.theta, ratio=b.ratio, margin=b.margin,
               satisfied=b.satisfied)
    _write(out, _out(args))
    return 0 if b.satisfied else 3


def cmd_rho(args):
    d = read_json(args.K)
    K = np.asarray(d["K"] if isinstance(d, dict) else d, dtype=float)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise ValidationError(f"K: expected a square matrix, got shape {K.shape}")
    value, delta = rho_inf(K)
    out = dict(rho_inf=value, delta=delta.tolist())
    if _out(args):
        _write(out, _out(args))
    print(f"rho_inf = {value:.12g}")
    print("delta   = " + " ".join(f"{x:.12g}" for x in delta))
    return 0


def cmd_lemma(args):
    d = read_json(args.instance)
    inst = LemmaInstance(d["a"], d["b"])
    iii, ii = check_iii(inst), check_ii(inst)
    out = dict(iii=iii.holds, ii=ii.holds, min_margin=float(np.min(iii.margins)))
    if iii.holds:
        out["p_analytic"] = p_analytic(inst)
    if args.p is not None:
        r = brute_force_i(inst, args.p, args.resolution)
        out.update(p=args.p, minimum=r.minimum, node=r.node, y=r.y.tolist(),
                   exact_negative=r.exact_negative)
    elif iii.holds:
        r = find_p1(inst, resolution=args.resolution)
        out.update(p1=r.p, minimum=r.minimum)
    _write(out, _out(args))
    return 0


def cmd_simulate(args):
    spec = load_spec(args.spec)
    d = read_json(args.u0)
    u0 = np.asarray(d["u"] if isinstance(d, dict) else d, dtype=float)
    snaps = run(spec, u0, args.t_end, cfl=args.cfl, cadence=args.cadence)
    prof = load_weights(args.weights, spec) if args.weights else WeightProfile.constant(spec)
    series = build_series(spec, prof, snaps, p=args.p)
    if args.series:
        write_series_csv(series, args.series)
    summary = dict(n_snapshots=len(snaps), t_end=snaps[-1].t, V_first=float(series.V[0]),
                   V_last=float(series.V[-1]))
    v = verify_decrease(series, args.tol_growth)
    summary.update(decrease_ok=v.ok, worst_growth=v.worst)
    if args.window:
        try:
            g, r2 = fit_gamma(series, tuple(args.window))
            summary.update(gamma_fit=g, r_squared=r2, window=list(args.window))
        except DecayedToZero:
            summary.update(gamma_fit=None, decayed_to_zero=True)
    _write(summary, _out(args))
    return 0


def cmd_counterexample(args):
    spec = load_spec(args.spec)
    prof = load_weights(args.weights, spec)
    bump = BumpSpec.default(args.x0, m=args.m, k=args.k, u1_0=args.u0)
    est = dv_dt_at_zero(spec, prof, bump, cfl=args.cfl)
    check = BumpSpec.default(args.x0, m=2 * args.m, k=args.k, u1_0=args.u0)
    est2 = dv_dt_at_zero(spec, prof, check, cfl=args.cfl)
    agree = bool(np.sign(est.slope) == np.sign(est2.slope))
    n1 = bump.n1
    psi = psi0_eval(n1, y2(n1))
    out = dict(n1=n1, y1=bump.y1, d_norm=bump.d_norm, m=bump.m, k=bump.k, x0=bump.x0,
               u1_0=bump.u1_0, i_star=est.i_star + 1,
               slope=est.to_dict(), slope_doubled_m=est2.to_dict(),
               psi0_minus_dd_at_y2=float(psi[0] - psi[2]),
               verdict=bool(est.positive and est2.positive and agree))
    if not agree:
        raise InconclusiveError("m and 2m slope signs disagree",
                                slopes=(est.slope, est2.slope))
    _write(out, args.report or _out(args))
    return 0 if out["verdict"] else 3


def cmd_certify(args):
    cert, code = certify(args.spec, budget_interior=args.budget,
                         budget_boundary=args.boundary_budget, seed=args.seed,
                         simulate=args.simulate, constant_weights=args.constant_weights)
    path = _out(args)
    if path:
        report_write(cert, path)
    else:
        sys.stdout.write(dump_canonical(cert.to_dict()) + "\n")
    log.info("verdict: %s", cert.verdict)
    return code


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("--out", default=argparse.SUPPRESS)
    common.add_argument("--verbose", "-v", action="store_true", default=argparse.SUPPRESS)

    ap = argparse.ArgumentParser(prog="hypcert", parents=[common],
                                 description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check-interior", parents=[common], help="search interior weights")
    p.add_argument("spec")
    p.add_argument("--budget", type=int, default=200)
    p.add_argument("--sigma", type=float, default=None)
    p.set_defaults(func=cmd_check_interior)

    p = sub.add_parser("check-boundary", parents=[common], help="boundary inequality")
    p.add_argument("spec")
    p.add_argument("--weights", required=True)
    p.add_argument("--budget", type=int, default=500)
    p.set_defaults(func=cmd_check_boundary)

    p = sub.add_parser("rho", parents=[common], help="rho_inf of a boundary matrix")
    p.add_argument("K")
    p.set_defaults(func=cmd_rho)

    p = sub.add_parser("lemma", parents=[common], help="polynomial positivity lemma")
    p.add_argument("instance")
    p.add_argument("--p", type=int, default=None)
    p.add_argument("--resolution", type=int, default=201)
    p.set_defaults(func=cmd_lemma)

    p = sub.add_parser("simulate", parents=[common], help="upwind simulation")
    p.add_argument("spec")
    p.add_argument("--u0", required=True)
    p.add_argument("--t-end", type=float, required=True)
    p.add_argument("--cfl", type=float, default=0.9)
    p.add_argument("--cadence", type=float, default=None)
    p.add_argument("--series", default=None)
    p.add_argument("--weights", default=None)
    p.add_argument("--p", type=int, default=64)
    p.add_argument("--window", type=float, nargs=2, default=None)
    p.add_argument("--tol-growth", type=float, default=1e-3)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("counterexample", parents=[common], help="necessity counterexample")
    p.add_argument("spec")
    p.add_argument("--weights", required=True)
    p.add_argument("--x0", type=float, required=True)
    p.add_argument("--m", type=int, default=200)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--u0", type=float, default=1e-3)
    p.add_argument("--cfl", type=float, default=1.0)
    p.add_argument("--report", default=None)
    p.set_defaults(func=cmd_counterexample)

    p = sub.add_parser("certify", parents=[common], help="interior + boundary certificate")
    p.add_argument("spec")
    p.add_argument("--budget", type=int, default=200)
    p.add_argument("--boundary-budget", type=int, default=500)
    p.add_argument("--simulate", action="store_true")
    p.add_argument("--constant-weights", action="store_true")
    p.set_defaults(func=cmd_certify)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    args.seed = getattr(args, "seed", 0)
    args.verbose = getattr(args, "verbose", False)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except INVALID as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NUMERICAL as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4
    except HypcertError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
