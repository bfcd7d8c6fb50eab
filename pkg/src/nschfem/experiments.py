"""Experiment presets and drivers: phase separation, convergence ladders,
rising bubbles.

Every driver writes a diagnostics CSV, a deterministic JSON manifest
(config echo, config hash, code version, invariant summary) and optional
field output into its output directory.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .assembly import Discretization
from .diagnostics import (
    make_record,
    mass_error_series,
    spatial_error_table,
    temporal_error_table,
    write_diagnostics_csv,
    zero_level_segments,
)
from .mesh import BoundaryTag, build_structured_mesh
from .nondim import (
    BUBBLE_CASES,
    bubble_case_groups,
    check_relations,
    rising_bubble_coefficients,
)
from .physics import Mobility, MixtureParams
from .solver import NewtonConfig, TimeLoopConfig, time_loop
from .spaces import interpolate
from .state import State
from .vtk_io import write_segments_csv, write_vtk

PHASE_SEP_SNAPSHOT_TIMES = (0.1, 0.3, 1.0, 2.0)


@dataclass
class MeshSpec:
    nx: int
    ny: int
    x0: float = 0.0
    x1: float = 1.0
    y0: float = 0.0
    y1: float = 1.0
    bc: object = "periodic"

    def build(self):
        return build_structured_mesh(((self.x0, self.x1), (self.y0, self.y1)),
                                     self.nx, self.ny, self.bc)

    def echo(self) -> dict:
        if isinstance(self.bc, str):
            bc = self.bc
        else:
            bc = {side: tag.value for side, tag in sorted(self.bc.items())}
        return {"nx": self.nx, "ny": self.ny, "x0": self.x0, "x1": self.x1,
                "y0": self.y0, "y1": self.y1, "bc": bc}


@dataclass
class RunConfig:
    experiment: str
    mesh: MeshSpec
    tau: float
    t_end: float
    params: MixtureParams
    newton: NewtonConfig = field(default_factory=NewtonConfig)
    out_dir: Path = Path("out")
    output_every: int = 1
    snapshot_times: tuple = ()
    bubble_metrics: bool = False
    max_halvings: int = 0
    seed: int = 0  # reserved; all runs are deterministic

    def echo(self) -> dict:
        p = self.params
        return {
            "experiment": self.experiment,
            "mesh": self.mesh.echo(),
            "tau": self.tau,
            "t_end": self.t_end,
            "mixture": {
                "rho1": p.rho1, "rho2": p.rho2, "eta1": p.eta1, "eta2": p.eta2,
                "gamma": p.gamma, "beta": p.beta, "g": p.g,
                "mobility": f"{p.mobility.kind}:{p.mobility.coefficient:.17g}",
            },
            "newton": {
                "tol_residual": self.newton.tol_residual,
                "max_iters": self.newton.max_iters,
                "damping": self.newton.damping,
            },
            "output_every": self.output_every,
            "snapshot_times": list(self.snapshot_times),
            "bubble_metrics": self.bubble_metrics,
            "max_halvings": self.max_halvings,
            "seed": self.seed,
        }


def config_hash(echo: dict) -> str:
    return hashlib.sha256(
        json.dumps(echo, sort_keys=True, separators=(",", ":")).encode()
    ).hexdigest()


def write_manifest(out_dir: Path, config_echo: dict, summary: dict,
                   extra: Optional[dict] = None) -> Path:
    manifest = {
        "code_version": __version__,
        "config": config_echo,
        "config_sha256": config_hash(config_echo),
        "summary": summary,
    }
    if extra:
        manifest.update(extra)
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    return path


def invariant_summary(records) -> dict:
    if not records:
        return {"steps": 0}
    energies = [r.energy.total for r in records]
    drift = mass_error_series(records)
    return {
        "steps": len(records) - 1,
        "max_mass_drift": float(np.abs(drift).max()),
        "energy_monotone": bool(
            all(b <= a + 1e-8 for a, b in zip(energies, energies[1:]))
        ),
        "final_energy": energies[-1],
        "max_newton_iters": max(r.newton_iters for r in records),
    }


# ---------------------------------------------------------------------------
# initial data
# ---------------------------------------------------------------------------

def phase_separation_phi0(x, y):
    return 0.2 * np.sin(4 * np.pi * x) * np.sin(4 * np.pi * y)


def convergence_v0(x, y):
    return (
        0.1 * np.sin(np.pi * x) ** 2 * np.sin(2 * np.pi * y),
        0.1 * np.sin(np.pi * y) ** 2 * np.sin(2 * np.pi * x),
    )


def bubble_phi0(eps, center=(0.5, 0.5), radius=0.25):
    cx, cy = center

    def phi0(x, y):
        r = np.sqrt((x - cx) ** 2 + (y - cy) ** 2)
        return np.tanh((r - radius) / (eps * math.sqrt(2.0)))

    return phi0


def parse_ratio(text: str):
    """Density ratio strings like '1:1000' -> (1.0, 1000.0)."""
    try:
        left, right = text.split(":")
        rho1, rho2 = float(left), float(right)
    except ValueError as exc:
        raise ValueError(f"invalid density ratio {text!r}, expected R1:R2") from exc
    if rho1 <= 0 or rho2 <= 0:
        raise ValueError(f"density ratio must be positive, got {text!r}")
    return rho1, rho2


# ---------------------------------------------------------------------------
# presets
# ---------------------------------------------------------------------------

def phase_separation_params(ratio=(10.0, 1.0)) -> MixtureParams:
    rho1, rho2 = ratio
    return MixtureParams(
        rho1=rho1, rho2=rho2, eta1=1e-2, eta2=1e-2,
        gamma=10**-1.5, beta=10**-1.5, g=0.0,
        mobility=Mobility.degenerate_quartic(1e-2),
    )


def phase_separation_config(ratio=(10.0, 1.0), n=32, tau=1e-3, t_end=2.0,
                            out_dir=Path("out/phase-sep"),
                            newton=None) -> RunConfig:
    return RunConfig(
        experiment="phase-separation",
        mesh=MeshSpec(nx=n, ny=n),
        tau=tau,
        t_end=t_end,
        params=phase_separation_params(ratio),
        newton=newton or NewtonConfig(tol_residual=1e-8),
        out_dir=Path(out_dir),
        output_every=max(1, int(round(0.1 / tau))),
        snapshot_times=PHASE_SEP_SNAPSHOT_TIMES,
    )


def bubble_params(case: int, h: float) -> tuple[MixtureParams, float]:
    """Mixture parameters for a bubble case at mesh size h; returns eps too.

    The free energy follows the benchmark form with well prefactor
    sigma_tilde/(4 eps) and gradient prefactor sigma_tilde*eps/2, so the
    potential parameter is eps/sigma_tilde while gamma = sigma_tilde*eps.
    """
    case_data = BUBBLE_CASES[case]
    eps = 0.64 * h
    gamma, _, sigma_tilde = rising_bubble_coefficients(case_data["sigma"], eps)
    params = MixtureParams(
        rho1=case_data["rho1"], rho2=case_data["rho2"],
        eta1=case_data["eta1"], eta2=case_data["eta2"],
        gamma=gamma, beta=eps / sigma_tilde, g=case_data["g"],
        mobility=Mobility.abs_degenerate(0.1 * eps**2),
    )
    return params, eps


BUBBLE_WALLS = {
    "left": BoundaryTag.NOPENETRATION,
    "right": BoundaryTag.NOPENETRATION,
    "bottom": BoundaryTag.NOSLIP,
    "top": BoundaryTag.NOSLIP,
}


def rising_bubble_config(case: int, h: float, t_end=3.0,
                         out_dir=None, newton=None) -> RunConfig:
    if case not in BUBBLE_CASES:
        raise ValueError(f"unknown bubble case {case}")
    n = round(1.0 / h)
    if abs(n * h - 1.0) > 1e-12:
        raise ValueError(f"mesh size {h} must divide the unit width")
    params, _ = bubble_params(case, h)
    return RunConfig(
        experiment=f"bubble-case{case}",
        mesh=MeshSpec(nx=n, ny=2 * n, x1=1.0, y1=2.0, bc=BUBBLE_WALLS),
        tau=0.128 * h,
        t_end=t_end,
        params=params,
        newton=newton or NewtonConfig(tol_residual=1e-6),
        out_dir=Path(out_dir or f"out/bubble-case{case}"),
        output_every=max(1, round(0.5 / (0.128 * h))),
        bubble_metrics=True,
    )


# ---------------------------------------------------------------------------
# drivers
# ---------------------------------------------------------------------------

def _initial_record(disc, params, state, compute_bubble):
    return make_record(disc, params, state, newton_iters=0,
                       compute_bubble=compute_bubble)


def _run_simulation(config: RunConfig, disc: Discretization, initial: State,
                    snapshot_name="fields"):
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    records = [_initial_record(disc, config.params, initial, config.bubble_metrics)]
    targets = sorted(t for t in config.snapshot_times if 0.0 < t <= config.t_end)

    def snap(state, tag):
        write_vtk(state, disc.spaces, out / f"{snapshot_name}_{tag}.vtk")

    snap(initial, "t0")

    def record_fn(d, p, state, iters):
        return make_record(d, p, state, iters, compute_bubble=config.bubble_metrics)

    def on_record(record):
        records.append(record)

    def on_snapshot(state):
        while targets and state.time >= targets[0] - 1e-9:
            snap(state, f"t{targets.pop(0):g}")

    final = initial
    if config.t_end > 0:
        loop = TimeLoopConfig(tau=config.tau, t_end=config.t_end,
                              output_every=1, max_halvings=config.max_halvings)
        final = time_loop(disc, initial, config.params, loop, config.newton,
                          record_sink=on_record, snapshot_sink=on_snapshot,
                          record_fn=record_fn)
        snap(final, "final")

    # records carry every step; the CSV is thinned to the output cadence
    thinned = records[:: config.output_every]
    if records and thinned[-1] is not records[-1]:
        thinned.append(records[-1])
    write_diagnostics_csv(out / "diagnostics.csv", thinned)
    return final, records


def run_phase_separation(config: RunConfig):
    """Periodic-square spinodal decomposition driver."""
    disc = Discretization(config.mesh.build())
    initial = disc.new_state(phi=interpolate(disc.p1, phase_separation_phi0))
    final, records = _run_simulation(config, disc, initial)
    write_manifest(Path(config.out_dir), config.echo(), invariant_summary(records))
    return final, records


def run_rising_bubble(case: int, h: float, out_dir=None, t_end=3.0,
                      newton=None):
    """Buoyant bubble benchmark driver (cases 1 and 2)."""
    config = rising_bubble_config(case, h, t_end=t_end, out_dir=out_dir,
                                  newton=newton)
    disc = Discretization(config.mesh.build())
    _, eps = bubble_params(case, h)
    initial = disc.new_state(phi=interpolate(disc.p1, bubble_phi0(eps)))
    final, records = _run_simulation(config, disc, initial, snapshot_name="bubble")

    out = Path(config.out_dir)
    write_segments_csv(zero_level_segments(final, disc.spaces),
                       out / "zero_level_final.csv")
    groups = bubble_case_groups(case, eps=eps)
    relations = check_relations(groups)
    summary = invariant_summary(records)
    summary["y_b_final"] = records[-1].y_b
    summary["v_b_final"] = records[-1].v_b
    write_manifest(out, config.echo(), summary, extra={
        "dimensionless": {
            "Re": groups.Re, "We": groups.We, "Fr": groups.Fr,
            "Cn": groups.Cn, "Eo": groups.Eo, "Ar": groups.Ar,
            "relations_ok": relations.ok,
        },
        "case_parameters": BUBBLE_CASES[case],
    })
    return final, records


def _record_trajectory(disc, params, initial, tau, n_steps, newton):
    states = [initial.copy()]
    loop = TimeLoopConfig(tau=tau, t_end=n_steps * tau, output_every=1,
                          max_halvings=0)
    time_loop(disc, initial, params, loop, newton,
              snapshot_sink=lambda s: states.append(s.copy()))
    return states


def convergence_initial_state(disc) -> State:
    return disc.new_state(
        phi=interpolate(disc.p1, phase_separation_phi0),
        vel=interpolate(disc.vel, convergence_v0),
    )


def run_convergence(mode: str, out_dir=Path("out/convergence"), levels=4,
                    tau=1e-3, t_end=0.1, h=1 / 16, ratio=(1.0, 100.0),
                    newton=None) -> dict:
    """Resolution ladder in space or time; returns EocTable per variable.

    Space mode: mesh sizes h_k = 2^{-1-k} for k = 1..levels with a
    comparison run one level finer, fixed tau.  Time mode: tau_k =
    1e-4 * 2^{-k-1} for k = 1..levels plus the halved comparison run on
    the fixed mesh of size h.
    """
    if mode not in ("space", "time"):
        raise ValueError(f"unknown convergence mode {mode!r}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    params = phase_separation_params(ratio)
    newton = newton or NewtonConfig(tol_residual=1e-10, max_iters=30)

    trajectories = []
    resolutions = []
    if mode == "space":
        n_steps = int(round(t_end / tau))
        for k in range(1, levels + 2):
            disc = Discretization(build_structured_mesh(
                ((0.0, 1.0), (0.0, 1.0)), 2 ** (1 + k), 2 ** (1 + k), "periodic"))
            states = _record_trajectory(disc, params, convergence_initial_state(disc),
                                        tau, n_steps, newton)
            trajectories.append((disc, states))
            resolutions.append(2.0 ** (-1 - k))
        tables = {
            var: spatial_error_table(trajectories, var, params.alpha, tau)
            for var in ("phi", "vel", "mu_alpha_p", "grad_vel")
        }
    else:
        n = round(1.0 / h)
        disc = Discretization(build_structured_mesh(((0.0, 1.0), (0.0, 1.0)),
                                                    n, n, "periodic"))
        initial = convergence_initial_state(disc)
        taus = [1e-4 * 2.0 ** (-k - 1) for k in range(1, levels + 2)]
        for tk in taus:
            n_steps = int(round(t_end / tk))
            states = _record_trajectory(disc, params, initial.copy(), tk,
                                        n_steps, newton)
            trajectories.append((disc, states))
        resolutions = taus
        tables = {
            var: temporal_error_table(trajectories, var, params.alpha, taus)
            for var in ("phi", "vel", "mu_alpha_p", "grad_vel")
        }

    _write_eoc_csv(out / f"eoc_{mode}.csv", tables)
    echo = {
        "experiment": f"converge-{mode}", "levels": levels, "tau": tau,
        "t_end": t_end, "h": h, "ratio": list(ratio),
        "newton_tol": newton.tol_residual,
    }
    write_manifest(out, echo, {
        var: [lvl.eoc for lvl in table.levels] for var, table in tables.items()
    })
    return tables


def _write_eoc_csv(path, tables: dict):
    variables = list(tables)
    n_levels = len(next(iter(tables.values())).levels)
    with open(path, "w") as fh:
        header = ["k", "resolution"]
        for var in variables:
            header += [f"err_{var}", f"eoc_{var}"]
        fh.write(",".join(header) + "\n")
        for k in range(n_levels):
            row = [str(k + 1), f"{tables[variables[0]].levels[k].resolution:.10g}"]
            for var in variables:
                lvl = tables[var].levels[k]
                row.append(f"{lvl.error:.6e}")
                row.append("" if lvl.eoc is None else f"{lvl.eoc:.3f}")
            fh.write(",".join(row) + "\n")
