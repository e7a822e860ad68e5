"""Command-line interface.

Numeric tables go to CSV (no header rows, ``%.17g`` floats so values
round-trip bit-for-bit); reports go to JSON.  Every run emits a manifest
echoing the resolved parameters, library version, and seed: next to the
output file as ``<out>.manifest.json`` when ``--out`` is given, otherwise
as a single ``{"manifest": ...}`` line on stderr.  Re-running the argv
recorded in a manifest reproduces the output byte for byte.

Exit codes: 0 on success, 2 when inputs fail a precondition (a JSON object
naming the problem is printed to stderr), 1 on internal errors.
"""

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import PreconditionError, TvlsError
from .kernels import convergence_diagnostic, kernel_grid
from .model import CarmaModel, companion_from_carma, model_from_json
from .simulate import simulate_paths
from .spectral import GridConfig, spectral_density, wigner_ville, wv_convergence
from .stability import (
    commutative_route_check,
    eigen_bound_check,
    instantaneous_controllability,
    lambda_max_check,
    transfer_equivalence,
)
from .transition import (
    check_commutativity,
    commutative_transition,
    ode_transition,
    peano_baker,
)

__all__ = ["main", "dispatch"]


class _CliParser(argparse.ArgumentParser):
    """Argument parser whose usage errors are machine-readable JSON."""

    def error(self, message):
        sys.stderr.write(json.dumps({"error": message, "type": "usage"}) + "\n")
        raise SystemExit(2)


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.17g" % float(v)


def _write_csv(rows, out):
    text = "".join(",".join(_fmt(v) for v in row) + "\n" for row in rows)
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _write_json(obj, out):
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _emit_manifest(subcommand, params, out):
    argv = [subcommand]
    for key, val in params.items():
        if val is None:
            continue
        flag = "--" + key.replace("_", "-")
        if isinstance(val, bool):
            if val:
                argv.append(flag)
        else:
            argv.extend([flag, _fmt(val) if isinstance(val, float) else str(val)])
    manifest = {
        "version": __version__,
        "subcommand": subcommand,
        "parameters": params,
        "argv_resolved": argv,
        "threads": os.environ.get("TVLS_THREADS"),
    }
    if out:
        Path(str(out) + ".manifest.json").write_text(
            json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    else:
        sys.stderr.write(json.dumps({"manifest": manifest}, sort_keys=True) + "\n")
    return manifest


def _load_model(path):
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise PreconditionError(f"model: cannot read {path!r} ({exc})") from None
    except json.JSONDecodeError as exc:
        raise PreconditionError(f"model: invalid JSON in {path!r} ({exc})") from None
    m = model_from_json(obj)
    if isinstance(m, CarmaModel):
        m = companion_from_carma(m)
    return m


def _parse_int_list(text, flag):
    try:
        vals = [int(part) for part in text.split(",") if part.strip() != ""]
    except ValueError:
        raise PreconditionError(f"{flag}: expected comma-separated integers, got {text!r}") from None
    if not vals:
        raise PreconditionError(f"{flag}: empty list")
    return vals


def _parse_n(text):
    if text == "limit":
        return "limit"
    try:
        return int(text)
    except ValueError:
        raise PreconditionError(f"N: expected a positive integer or 'limit', got {text!r}") from None


def _lambda_grid(lmax, dl):
    if lmax <= 0 or dl <= 0:
        raise PreconditionError("lmax and dl must be positive")
    n = int(round(2.0 * lmax / dl))
    return -lmax + dl * np.arange(n + 1)


def _auto_certificate(A, window):
    cert = lambda_max_check(A, window)
    if cert.passed:
        return cert
    try:
        cert2 = eigen_bound_check(A, window)
    except TvlsError:
        cert2 = None
    if cert2 is not None and cert2.passed:
        return cert2
    return cert  # the failure, for its reason


def _require_certificate(A, window, flag_hint):
    cert = _auto_certificate(A, window)
    if not cert.passed:
        raise PreconditionError(
            f"no stability certificate found on window {window} ({cert.reason}); "
            f"pass {flag_hint} explicitly")
    return cert


def _cmd_simulate(args):
    m = _load_model(args.model)
    if args.t1 <= args.t0 or args.dt <= 0:
        raise PreconditionError("simulate: need t1 > t0 and dt > 0")
    n = int(round((args.t1 - args.t0) / args.dt))
    t_grid = args.t0 + args.dt * np.arange(n + 1)
    burn_in = args.burn_in
    if burn_in is None:
        cert = _require_certificate(m.A, (args.t0, args.t1), "--burn-in")
        burn_in = 12.0 / cert.lam
        wide = (args.t0 - burn_in / args.N, args.t1)
        cert2 = _auto_certificate(m.A, wide)
        if cert2.passed:
            burn_in = 12.0 / cert2.lam
    ens = simulate_paths(m, args.N, t_grid, args.paths, seed=args.seed,
                         burn_in=burn_in, store_states=True)
    rows = []
    for i in range(ens.n_paths):
        for k, t in enumerate(ens.t_grid):
            rows.append([i, t, *ens.states[i, k], ens.observations[i, k]])
    _write_csv(rows, args.out)
    _emit_manifest("simulate", {
        "model": args.model, "N": args.N, "t0": args.t0, "t1": args.t1,
        "dt": args.dt, "paths": args.paths, "seed": args.seed,
        "burn_in": float(burn_in), "out": args.out}, args.out)
    return 0


def _cmd_kernel(args):
    m = _load_model(args.model)
    n = _parse_n(args.N)
    umax = args.umax
    if umax is None:
        cert = _require_certificate(m.A, (args.t - 1.0, args.t), "--umax")
        umax = cert.default_u_max()
    grid = kernel_grid(m, n, args.t, u_max=umax, du=args.du,
                       transition_method=args.method)
    _write_csv(zip(grid.u_grid, grid.values), args.out)
    _emit_manifest("kernel", {
        "model": args.model, "t": args.t, "N": args.N, "umax": float(umax),
        "du": args.du, "method": args.method, "out": args.out}, args.out)
    return 0


def _cmd_converge(args):
    m = _load_model(args.model)
    n_list = _parse_int_list(args.Ns, "Ns")
    umax = args.umax
    if umax is None:
        cert = _require_certificate(m.A, (args.t - 1.0, args.t), "--umax")
        umax = cert.default_u_max()
    report = convergence_diagnostic(m, args.t, n_list, umax, du=args.du,
                                    transition_method=args.method)
    _write_csv(report.rows, args.out)
    _emit_manifest("converge", {
        "model": args.model, "t": args.t, "Ns": args.Ns, "umax": float(umax),
        "du": args.du, "method": args.method, "out": args.out}, args.out)
    return 0


def _cmd_spectrum(args):
    m = _load_model(args.model)
    lam = _lambda_grid(args.lmax, args.dl)
    config = GridConfig(u_max=args.umax, du=args.du, transition_method=args.method)
    if args.umax is None:
        config.certificate = _require_certificate(m.A, (args.t - 1.0, args.t), "--umax")
    spec = spectral_density(m, args.t, lam, config)
    _write_csv(zip(spec.lambda_grid, spec.values), args.out)
    _emit_manifest("spectrum", {
        "model": args.model, "t": args.t, "lmax": args.lmax, "dl": args.dl,
        "umax": args.umax, "du": args.du, "method": args.method,
        "out": args.out}, args.out)
    return 0


def _wv_config(m, args):
    config = GridConfig(u_max=args.umax, du=args.du, s_max=args.smax,
                        ds=args.ds, transition_method=args.method)
    if args.umax is None or args.smax is None:
        config.certificate = _require_certificate(
            m.A, (args.t - 1.0, args.t), "--umax/--smax")
    return config


def _cmd_wigner(args):
    m = _load_model(args.model)
    lam = _lambda_grid(args.lmax, args.dl)
    wv = wigner_ville(m, args.N, args.t, lam, _wv_config(m, args))
    _write_csv(zip(wv.lambda_grid, wv.values), args.out)
    _emit_manifest("wigner", {
        "model": args.model, "t": args.t, "N": args.N, "lmax": args.lmax,
        "dl": args.dl, "smax": args.smax, "ds": args.ds, "umax": args.umax,
        "du": args.du, "method": args.method, "out": args.out}, args.out)
    return 0


def _cmd_wvconv(args):
    m = _load_model(args.model)
    lam = _lambda_grid(args.lmax, args.dl)
    n_list = _parse_int_list(args.Ns, "Ns")
    report = wv_convergence(m, args.t, lam, n_list, _wv_config(m, args))
    _write_csv(report.rows, args.out)
    _emit_manifest("wvconv", {
        "model": args.model, "t": args.t, "Ns": args.Ns, "lmax": args.lmax,
        "dl": args.dl, "smax": args.smax, "ds": args.ds, "umax": args.umax,
        "du": args.du, "method": args.method, "out": args.out}, args.out)
    return 0


def _cmd_transition(args):
    m = _load_model(args.model)
    method = args.method
    if method == "auto":
        lo, hi = min(args.s0, args.s), max(args.s0, args.s)
        if hi > lo and check_commutativity(m.A, (lo, hi)).passes:
            method = "comm"
        else:
            method = "pb"
    if method == "pb":
        res = peano_baker(m.A, args.s0, args.s, tol=args.tol)
    elif method == "ode":
        res = ode_transition(m.A, args.s0, args.s, steps=args.steps)
    else:
        res = commutative_transition(m.A, args.s0, args.s)
    out_obj = {
        "matrix": [[float(v) for v in row] for row in res.value],
        "error_estimate": float(res.error_estimate),
        "method": res.method,
        "terms_or_steps": int(res.terms_or_steps),
    }
    _write_json(out_obj, args.out)
    _emit_manifest("transition", {
        "model": args.model, "s0": args.s0, "s": args.s, "method": args.method,
        "tol": args.tol, "steps": args.steps, "out": args.out}, args.out)
    return 0


def _cmd_stability(args):
    m = _load_model(args.model)
    try:
        lo, hi = (float(x) for x in args.window.split(","))
    except ValueError:
        raise PreconditionError(f"window: expected 'lo,hi', got {args.window!r}") from None
    routes = {"lambda_max": lambda_max_check, "eigen": eigen_bound_check,
              "comm": commutative_route_check}
    route = {"a": "lambda_max", "b": "eigen"}.get(args.route, args.route)
    if route == "auto":
        result = None
        for fn in routes.values():
            try:
                result = fn(m.A, (lo, hi))
            except TvlsError:
                continue
            if result.passed:
                break
    else:
        result = routes[route](m.A, (lo, hi))
    if result is None:
        raise PreconditionError("stability: no route is applicable to this model")
    if result.passed:
        out_obj = {"passed": True, "route": result.route,
                   "gamma": result.gamma, "lam": result.lam,
                   "window": [lo, hi],
                   "details": {k: (v if isinstance(v, (int, float, str, bool)) else str(v))
                               for k, v in result.details.items()}}
    else:
        out_obj = {"passed": False, "route": result.route, "reason": result.reason,
                   "window": [lo, hi], "hint": result.hint,
                   "sup_lambda_max": result.sup_lambda_max}
    _write_json(out_obj, args.out)
    _emit_manifest("stability", {
        "model": args.model, "window": args.window, "route": route,
        "out": args.out}, args.out)
    return 0


def _cmd_control(args):
    m = _load_model(args.model)
    if args.tgrid is not None:
        try:
            t_grid = np.array([float(x) for x in args.tgrid.split(",")
                               if x.strip() != ""])
        except ValueError:
            raise PreconditionError(
                f"tgrid: expected comma-separated numbers, got {args.tgrid!r}") from None
        if t_grid.size == 0:
            raise PreconditionError("tgrid: empty list")
    elif args.t is not None:
        t_grid = np.array([args.t])
    else:
        if args.t0 is None or args.t1 is None or args.dt is None:
            raise PreconditionError("control: pass --tgrid, --t, or all of --t0/--t1/--dt")
        n = int(round((args.t1 - args.t0) / args.dt))
        t_grid = args.t0 + args.dt * np.arange(n + 1)
    report = instantaneous_controllability(m, t_grid)
    out_obj = {"t": [float(t) for t in report.t_grid],
               "ranks": report.ranks,
               "min_singular": report.min_singular,
               "full_rank": report.full_rank,
               "p": m.p}
    _write_json(out_obj, args.out)
    _emit_manifest("control", {
        "model": args.model, "tgrid": args.tgrid, "t": args.t, "t0": args.t0,
        "t1": args.t1, "dt": args.dt, "out": args.out}, args.out)
    return 0


def _cmd_equiv(args):
    m1 = _load_model(args.model)
    m2 = _load_model(args.model2)
    if m1.p != m2.p:
        raise PreconditionError("equiv: models must share the state dimension p")
    report = transfer_equivalence(m1, m2, args.t)
    out_obj = {"equivalent": report.equivalent,
               "max_rel_error": report.max_rel_error,
               "n_used": report.n_used, "n_skipped": report.n_skipped,
               "note": report.note}
    _write_json(out_obj, args.out)
    _emit_manifest("equiv", {
        "model": args.model, "model2": args.model2, "t": args.t,
        "out": args.out}, args.out)
    return 0


def _build_parser():
    parser = _CliParser(prog="tvls",
                        description="Time-varying Levy-driven state-space models")
    parser.add_argument("--version", action="version", version=f"tvls {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add(name, fn, help_text, model_flags=("--model",)):
        sp = sub.add_parser(name, help=help_text)
        sp.set_defaults(fn=fn)
        sp.add_argument(*model_flags, dest="model", required=True,
                        help="model JSON file")
        sp.add_argument("--out", default=None, help="output file (default: stdout)")
        return sp

    sp = add("simulate", _cmd_simulate, "simulate observation paths (CSV: path,t,X...,Y)")
    sp.add_argument("--N", type=int, required=True)
    sp.add_argument("--t0", type=float, required=True)
    sp.add_argument("--t1", type=float, required=True)
    sp.add_argument("--dt", type=float, required=True)
    sp.add_argument("--paths", type=int, default=1)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--burn-in", dest="burn_in", type=float, default=None)

    sp = add("kernel", _cmd_kernel, "lag kernel on a grid (CSV: u,value)")
    sp.add_argument("--t", type=float, required=True)
    sp.add_argument("--N", required=True, help="positive integer or 'limit'")
    sp.add_argument("--umax", type=float, default=None)
    sp.add_argument("--du", type=float, default=0.005)
    sp.add_argument("--method", default="auto", choices=["auto", "pb", "ode", "comm"])

    sp = add("converge", _cmd_converge, "kernel convergence in N (CSV: N,distance)")
    sp.add_argument("--t", type=float, required=True)
    sp.add_argument("--Ns", required=True, help="comma-separated N values")
    sp.add_argument("--umax", type=float, default=None)
    sp.add_argument("--du", type=float, default=0.005)
    sp.add_argument("--method", default="auto", choices=["auto", "pb", "ode", "comm"])

    sp = add("spectrum", _cmd_spectrum, "limiting spectral density (CSV: lambda,f)")
    sp.add_argument("--t", type=float, required=True)
    sp.add_argument("--lmax", type=float, required=True)
    sp.add_argument("--dl", type=float, required=True)
    sp.add_argument("--umax", type=float, default=None)
    sp.add_argument("--du", type=float, default=0.005)
    sp.add_argument("--method", default="auto", choices=["auto", "pb", "ode", "comm"])

    sp = add("wigner", _cmd_wigner, "finite-N time-frequency spectrum (CSV: lambda,f_N)")
    sp.add_argument("--t", type=float, required=True)
    sp.add_argument("--N", type=int, required=True)
    sp.add_argument("--lmax", type=float, required=True)
    sp.add_argument("--dl", type=float, required=True)
    sp.add_argument("--smax", type=float, default=None)
    sp.add_argument("--ds", type=float, default=0.05)
    sp.add_argument("--umax", type=float, default=None)
    sp.add_argument("--du", type=float, default=0.005)
    sp.add_argument("--method", default="auto", choices=["auto", "pb", "ode", "comm"])

    sp = add("wvconv", _cmd_wvconv, "spectrum convergence in N (CSV: N,distance)")
    sp.add_argument("--t", type=float, required=True)
    sp.add_argument("--Ns", required=True)
    sp.add_argument("--lmax", type=float, required=True)
    sp.add_argument("--dl", type=float, required=True)
    sp.add_argument("--smax", type=float, default=None)
    sp.add_argument("--ds", type=float, default=0.05)
    sp.add_argument("--umax", type=float, default=None)
    sp.add_argument("--du", type=float, default=0.005)
    sp.add_argument("--method", default="auto", choices=["auto", "pb", "ode", "comm"])

    sp = add("transition", _cmd_transition, "transition matrix (JSON)")
    sp.add_argument("--s0", type=float, required=True)
    sp.add_argument("--s", type=float, required=True)
    sp.add_argument("--method", default="auto", choices=["pb", "ode", "comm", "auto"])
    sp.add_argument("--tol", type=float, default=1e-12)
    sp.add_argument("--steps", type=int, default=256)

    sp = add("stability", _cmd_stability, "stability certificate (JSON)")
    sp.add_argument("--window", required=True, help="'lo,hi'")
    sp.add_argument("--route", default="auto",
                    choices=["auto", "lambda_max", "eigen", "comm", "a", "b"],
                    help="a is shorthand for lambda_max, b for eigen")

    sp = add("control", _cmd_control, "instantaneous controllability (JSON)")
    sp.add_argument("--tgrid", default=None, help="comma-separated times")
    sp.add_argument("--t", type=float, default=None)
    sp.add_argument("--t0", type=float, default=None)
    sp.add_argument("--t1", type=float, default=None)
    sp.add_argument("--dt", type=float, default=None)

    sp = add("equiv", _cmd_equiv, "frozen-time transfer equivalence (JSON)",
             model_flags=("--model", "--model1"))
    sp.add_argument("--model2", required=True, help="second model JSON file")
    sp.add_argument("--t", type=float, required=True)

    return parser


def dispatch(argv):
    """Run one CLI invocation; returns the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.fn(args)
    except PreconditionError as exc:
        sys.stderr.write(json.dumps(
            {"error": str(exc), "type": type(exc).__name__}) + "\n")
        return 2
    except Exception as exc:  # internal errors: code 1, still machine-readable
        sys.stderr.write(json.dumps(
            {"error": f"{type(exc).__name__}: {exc}", "type": "internal"}) + "\n")
        return 1


def main():
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
