"""Command-line entry point: run / sweep / dispersion / stability."""

from __future__ import annotations

import argparse
import sys as _sys

import numpy as np

from . import analysis, runner
from .grid import SingularMatrixError


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="polarstep",
        description=(
            "Linearly implicit energy-preserving integrators for KdV and "
            "Camassa-Holm semi-discretizations"
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment from a config file")
    p_run.add_argument("config", help="flat key = value config file")
    p_run.add_argument("--plots", action="store_true", help="emit SVG plots")

    p_sweep = sub.add_parser("sweep", help="run a parameter sweep")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--param", required=True, choices=runner.SWEEP_PARAMS)
    p_sweep.add_argument("--values", required=True, help="comma-separated values")
    p_sweep.add_argument("--out", default=None, help="summary CSV path")

    p_disp = sub.add_parser("dispersion", help="emit the dispersion curve table")
    p_disp.add_argument("--lambda", dest="lam", type=float, required=True)
    p_disp.add_argument("--xi-max", type=float, default=float(np.pi))
    p_disp.add_argument("--samples", type=int, default=200)

    p_stab = sub.add_parser("stability", help="emit the |g| amplification grid")
    p_stab.add_argument("--method", required=True, choices=["kahan", "pdgm"])
    p_stab.add_argument("--n-lambda", type=int, default=100)
    p_stab.add_argument("--n-theta", type=int, default=100)
    return parser


def cmd_run(args) -> int:
    try:
        config = runner.load_config(args.config)
    except (runner.ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=_sys.stderr)
        return runner.EXIT_CONFIG
    try:
        record, paths = runner.run(config, make_plots=args.plots)
    except runner.ReferenceValidationError as exc:
        print(f"reference validation failed: {exc}", file=_sys.stderr)
        return runner.EXIT_REFERENCE
    except SingularMatrixError as exc:
        print(f"solver failure: {exc}", file=_sys.stderr)
        return runner.EXIT_SINGULAR
    if record.blew_up:
        print(f"blow-up detected at t = {record.blow_up_time:.6g}")
    else:
        print(f"completed {record.n_steps_completed} steps to t = {record.times[-1]:.6g}")
    for kind, path in paths.items():
        print(f"{kind}: {path}")
    return runner.EXIT_OK


def cmd_sweep(args) -> int:
    try:
        config = runner.load_config(args.config)
        if args.param == "K":
            values = [int(v) for v in args.values.split(",")]
        else:
            values = [float(v) for v in args.values.split(",")]
    except (runner.ConfigError, OSError, ValueError) as exc:
        print(f"config error: {exc}", file=_sys.stderr)
        return runner.EXIT_CONFIG
    rows = runner.sweep(config, args.param, values, out_path=args.out)
    for r in rows:
        status = "completed" if r["completed"] else (
            f"blow-up at t = {r['blow_up_time']:.6g}"
            if np.isfinite(r["blow_up_time"])
            else f"failed ({r['error']})"
        )
        print(f"{args.param} = {r['value']}: {status}")
    return runner.EXIT_OK


def cmd_dispersion(args) -> int:
    xi = np.linspace(0.0, args.xi_max, args.samples + 1)
    print("xi,omega_exact,omega_kahan,omega_pdgm")
    for s in analysis.dispersion_curves(args.lam, xi):
        pdgm = repr(s.omega_pdgm) if s.omega_pdgm is not None else "bracket-failure"
        print(f"{s.xi!r},{s.omega_exact!r},{s.omega_kahan!r},{pdgm}")
    return runner.EXIT_OK


def cmd_stability(args) -> int:
    rows = analysis.stability_grid(args.method, args.n_lambda, args.n_theta)
    print("lambda,theta," + ",".join(f"abs_g{i+1}" for i in range(2 if args.method == "pdgm" else 1)))
    for lam, theta, roots in rows:
        mags = ",".join(repr(abs(g)) for g in roots)
        print(f"{lam!r},{theta!r},{mags}")
    return runner.EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handler = {
        "run": cmd_run,
        "sweep": cmd_sweep,
        "dispersion": cmd_dispersion,
        "stability": cmd_stability,
    }[args.command]
    return handler(args)


if __name__ == "__main__":
    raise SystemExit(main())
