"""INI run-configuration files (sections: run, mesh, mixture, newton, initial).

Preset experiments fill every parameter themselves and treat file entries
as overrides; ``experiment = custom`` requires all sections explicit.
"""
from __future__ import annotations

import configparser
from pathlib import Path

from .mesh import BoundaryTag
from .experiments import MeshSpec, RunConfig
from .physics import Mobility, MixtureParams
from .solver import NewtonConfig


class ConfigError(Exception):
    pass


_TAGS = {
    "noslip": BoundaryTag.NOSLIP,
    "nopenetration": BoundaryTag.NOPENETRATION,
}

EXPERIMENTS = ("phase-separation", "converge-space", "converge-time",
               "bubble-case1", "bubble-case2", "custom")


def parse_mobility(text: str) -> Mobility:
    try:
        kind, _, coeff = text.partition(":")
        return Mobility(kind.strip(), float(coeff))
    except ValueError as exc:
        raise ConfigError(f"invalid mobility {text!r} (expected kind:coefficient)") from exc


def _mesh_from_section(sec) -> MeshSpec:
    try:
        nx = sec.getint("nx")
        ny = sec.getint("ny")
    except ValueError as exc:
        raise ConfigError(f"invalid mesh counts: {exc}") from exc
    if nx is None or ny is None:
        raise ConfigError("mesh section requires nx and ny")
    bc_text = sec.get("bc", "periodic").strip().lower()
    if bc_text == "periodic":
        bc = "periodic"
    elif bc_text == "walls":
        bc = {}
        for side in ("left", "right", "bottom", "top"):
            tag = sec.get(f"bc_{side}", "").strip().lower()
            if tag not in _TAGS:
                raise ConfigError(f"bc_{side} must be one of {sorted(_TAGS)}")
            bc[side] = _TAGS[tag]
    else:
        raise ConfigError(f"bc must be 'periodic' or 'walls', got {bc_text!r}")
    return MeshSpec(
        nx=nx, ny=ny,
        x0=sec.getfloat("x0", 0.0), x1=sec.getfloat("x1", 1.0),
        y0=sec.getfloat("y0", 0.0), y1=sec.getfloat("y1", 1.0),
        bc=bc,
    )


def _mixture_from_section(sec) -> MixtureParams:
    required = ("rho1", "rho2", "eta1", "eta2", "gamma", "beta", "g", "mobility")
    missing = [k for k in required if k not in sec]
    if missing:
        raise ConfigError(f"mixture section missing keys {missing}")
    try:
        return MixtureParams(
            rho1=sec.getfloat("rho1"), rho2=sec.getfloat("rho2"),
            eta1=sec.getfloat("eta1"), eta2=sec.getfloat("eta2"),
            gamma=sec.getfloat("gamma"), beta=sec.getfloat("beta"),
            g=sec.getfloat("g"), mobility=parse_mobility(sec.get("mobility")),
        )
    except ValueError as exc:
        raise ConfigError(f"invalid mixture parameters: {exc}") from exc


def _newton_from_section(sec) -> NewtonConfig:
    try:
        return NewtonConfig(
            tol_residual=sec.getfloat("tol_residual", 1e-6),
            max_iters=sec.getint("max_iters", 20),
            damping=sec.getboolean("damping", False),
        )
    except ValueError as exc:
        raise ConfigError(f"invalid newton parameters: {exc}") from exc


def read_ini(path) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    return parser


def load_custom_config(path) -> RunConfig:
    """Fully explicit configuration for ``experiment = custom`` runs."""
    parser = read_ini(path)
    for section in ("run", "mesh", "mixture"):
        if not parser.has_section(section):
            raise ConfigError(f"custom config requires a [{section}] section")
    run = parser["run"]
    experiment = run.get("experiment", "custom").strip().lower()
    if experiment != "custom":
        raise ConfigError(
            f"load_custom_config handles experiment = custom, got {experiment!r}"
        )
    for key in ("tau", "t_end"):
        if key not in run:
            raise ConfigError(f"[run] section missing {key}")
    try:
        tau = run.getfloat("tau")
        t_end = run.getfloat("t_end")
    except ValueError as exc:
        raise ConfigError(f"invalid run parameters: {exc}") from exc
    newton = (_newton_from_section(parser["newton"])
              if parser.has_section("newton") else NewtonConfig())
    return RunConfig(
        experiment="custom",
        mesh=_mesh_from_section(parser["mesh"]),
        tau=tau,
        t_end=t_end,
        params=_mixture_from_section(parser["mixture"]),
        newton=newton,
        out_dir=Path(run.get("out_dir", "out/custom")),
        output_every=run.getint("output_every", 1),
        bubble_metrics=run.getboolean("bubble_metrics", False),
    )


def load_initial_spec(path) -> dict:
    """[initial] section of a custom config: named phi/velocity fields."""
    parser = read_ini(path)
    if not parser.has_section("initial"):
        return {"phi": "phase_separation", "velocity": "zero"}
    sec = parser["initial"]
    spec = {
        "phi": sec.get("phi", "phase_separation").strip(),
        "velocity": sec.get("velocity", "zero").strip(),
    }
    known_phi = ("phase_separation",)
    if not (spec["phi"] in known_phi or spec["phi"].startswith(("bubble:", "constant:"))):
        raise ConfigError(f"unknown initial phi {spec['phi']!r}")
    if spec["velocity"] not in ("zero", "convergence"):
        raise ConfigError(f"unknown initial velocity {spec['velocity']!r}")
    return spec


def preset_overrides(path) -> dict:
    """Optional overrides (tau, t_end, out_dir, mesh n, newton) for presets."""
    parser = read_ini(path)
    out = {}
    if parser.has_section("run"):
        run = parser["run"]
        for key, getter in (("tau", run.getfloat), ("t_end", run.getfloat),
                            ("output_every", run.getint)):
            if key in run:
                try:
                    out[key] = getter(key)
                except ValueError as exc:
                    raise ConfigError(f"invalid {key}: {exc}") from exc
        if "out_dir" in run:
            out["out_dir"] = run.get("out_dir")
    if parser.has_section("newton"):
        out["newton"] = _newton_from_section(parser["newton"])
    return out
