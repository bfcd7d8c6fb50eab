"""Command line entry point.

Subcommands: phase-sep, converge-space, converge-time, bubble, custom.
Exit codes: 0 success, 1 configuration error, 2 solver nonconvergence.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .assembly import Discretization
from .config import ConfigError, load_custom_config, load_initial_spec, preset_overrides
from .experiments import (
    _run_simulation,
    invariant_summary,
    parse_ratio,
    phase_separation_config,
    run_convergence,
    run_phase_separation,
    run_rising_bubble,
    write_manifest,
)
from .solver import NonConvergence, SolverError
from .spaces import interpolate


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def parse_mesh_size(text: str) -> float:
    """Mesh size as a float or a fraction like 1/32."""
    try:
        if "/" in text:
            num, den = text.split("/")
            value = float(num) / float(den)
        else:
            value = float(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"invalid mesh size {text!r}") from exc
    if value <= 0:
        raise ConfigError(f"mesh size must be positive, got {text!r}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nschfem",
                     description="Energy-stable two-phase flow experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("phase-sep", help="periodic-square phase separation")
    ps.add_argument("--ratio", default="10:1", help="density ratio R1:R2")
    ps.add_argument("--h", default="1/32", help="mesh size (float or 1/n)")
    ps.add_argument("--tau", type=float, default=1e-3)
    ps.add_argument("--t-end", type=float, default=2.0)
    ps.add_argument("--out", default="out/phase-sep")
    ps.add_argument("--config", default=None, help="INI file with overrides")

    for mode in ("space", "time"):
        cv = sub.add_parser(f"converge-{mode}",
                            help=f"{mode} refinement study")
        cv.add_argument("--levels", type=int, default=4 if mode == "space" else 3)
        cv.add_argument("--ratio", default="1:100")
        cv.add_argument("--tau", type=float, default=1e-3)
        cv.add_argument("--h", default="1/16")
        cv.add_argument("--t-end", type=float,
                        default=0.1 if mode == "space" else 0.01)
        cv.add_argument("--out", default=f"out/converge-{mode}")

    bb = sub.add_parser("bubble", help="rising bubble benchmark")
    bb.add_argument("--case", type=int, choices=(1, 2), required=True)
    bb.add_argument("--h", default="1/32")
    bb.add_argument("--t-end", type=float, default=3.0)
    bb.add_argument("--out", default=None)

    cu = sub.add_parser("custom", help="fully explicit run from a config file")
    cu.add_argument("--config", required=True)
    cu.add_argument("--out", default=None)
    return parser


def _run_phase_sep(args) -> None:
    rho = parse_ratio(args.ratio)
    h = parse_mesh_size(args.h)
    n = round(1.0 / h)
    overrides = preset_overrides(args.config) if args.config else {}
    config = phase_separation_config(
        ratio=rho,
        n=n,
        tau=overrides.get("tau", args.tau),
        t_end=overrides.get("t_end", args.t_end),
        out_dir=overrides.get("out_dir", args.out),
        newton=overrides.get("newton"),
    )
    if "output_every" in overrides:
        config.output_every = overrides["output_every"]
    run_phase_separation(config)


def _run_custom(args) -> None:
    config = load_custom_config(args.config)
    if args.out:
        config.out_dir = Path(args.out)
    initial_spec = load_initial_spec(args.config)
    disc = Discretization(config.mesh.build())

    from .experiments import bubble_phi0, convergence_v0, phase_separation_phi0

    phi_name = initial_spec["phi"]
    if phi_name == "phase_separation":
        phi = interpolate(disc.p1, phase_separation_phi0)
    elif phi_name.startswith("bubble:"):
        eps = float(phi_name.split(":", 1)[1])
        phi = interpolate(disc.p1, bubble_phi0(eps))
    else:  # constant:<value>
        phi = float(phi_name.split(":", 1)[1]) * np.ones(disc.n1)
    state = disc.new_state(phi=phi)
    if initial_spec["velocity"] == "convergence":
        state.vel = disc.vel.apply_constraints(interpolate(disc.vel, convergence_v0))
    _, records = _run_simulation(config, disc, state)
    write_manifest(Path(config.out_dir), config.echo(), invariant_summary(records))


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "phase-sep":
            _run_phase_sep(args)
        elif args.command in ("converge-space", "converge-time"):
            mode = args.command.split("-")[1]
            run_convergence(
                mode,
                out_dir=args.out,
                levels=args.levels,
                tau=args.tau,
                t_end=args.t_end,
                h=parse_mesh_size(args.h),
                ratio=parse_ratio(args.ratio),
            )
        elif args.command == "bubble":
            run_rising_bubble(args.case, parse_mesh_size(args.h),
                              out_dir=args.out, t_end=args.t_end)
        elif args.command == "custom":
            _run_custom(args)
    except (ConfigError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except NonConvergence as exc:
        print(f"solver did not converge: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
