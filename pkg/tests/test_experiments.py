import json

import numpy as np
import pytest

from nschfem.experiments import (
    bubble_params,
    phase_separation_config,
    run_convergence,
    run_phase_separation,
    run_rising_bubble,
)
from nschfem.solver import NewtonConfig


def test_phase_separation_t_end_zero_initial_snapshot_only(tmp_path):
    config = phase_separation_config(ratio=(10.0, 1.0), n=8, tau=1e-3,
                                     t_end=0.0, out_dir=tmp_path)
    _, records = run_phase_separation(config)
    assert len(records) == 1
    assert (tmp_path / "fields_t0.vtk").exists()
    assert not (tmp_path / "fields_final.vtk").exists()
    rows = (tmp_path / "diagnostics.csv").read_text().strip().splitlines()
    assert len(rows) == 2  # header plus the initial record


def test_phase_separation_smoke_run_invariants(tmp_path):
    config = phase_separation_config(ratio=(10.0, 1.0), n=8, tau=1e-3,
                                     t_end=3e-3, out_dir=tmp_path)
    _, records = run_phase_separation(config)
    energies = [r.energy.total for r in records]
    assert all(b <= a + 1e-8 for a, b in zip(energies, energies[1:]))
    drift = max(abs(r.mass_phi - records[0].mass_phi) for r in records)
    assert drift <= 1e-10
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["summary"]["energy_monotone"] is True
    assert manifest["config_sha256"] == __import__("nschfem.experiments",
                                                   fromlist=["config_hash"]
                                                   ).config_hash(manifest["config"])


def test_csv_thinning_via_output_every(tmp_path):
    config = phase_separation_config(ratio=(10.0, 1.0), n=8, tau=1e-3,
                                     t_end=4e-3, out_dir=tmp_path)
    config.output_every = 2
    _, records = run_phase_separation(config)
    assert len(records) == 5
    rows = (tmp_path / "diagnostics.csv").read_text().strip().splitlines()
    # header + records 0, 2, 4
    assert len(rows) == 4


@pytest.mark.parametrize("case,expected", [
    (1, {"rho1": 1000.0, "rho2": 100.0, "eta1": 10.0, "eta2": 1.0,
         "sigma": 24.5, "g": 0.98}),
    (2, {"rho1": 1000.0, "rho2": 1.0, "eta1": 1.0, "eta2": 0.1,
         "sigma": 1.96, "g": 0.98}),
])
def test_bubble_parameter_echo(tmp_path, case, expected):
    h = 1 / 16
    _, records = run_rising_bubble(case, h, out_dir=tmp_path,
                                   t_end=0.128 * h,
                                   newton=NewtonConfig(tol_residual=1e-6))
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    for key, value in expected.items():
        assert manifest["case_parameters"][key] == value
    assert manifest["dimensionless"]["relations_ok"] is True
    assert (tmp_path / "zero_level_final.csv").exists()
    # initial bubble: centered region, all record entries finite
    assert abs(records[0].y_b - 0.5) <= 2e-3
    assert np.isfinite([records[-1].y_b, records[-1].v_b]).all()


def test_bubble_free_energy_calibration():
    # well prefactor sigma_tilde/(4 eps) and gradient prefactor
    # sigma_tilde*eps/2 make the interface width sqrt(gamma*beta) equal eps
    params, eps = bubble_params(1, 1 / 32)
    assert np.sqrt(params.gamma * params.beta) == pytest.approx(eps, rel=1e-12)
    sigma_tilde = 3 * 24.5 / (2 * np.sqrt(2))
    assert 1.0 / (4 * params.beta) == pytest.approx(sigma_tilde / (4 * eps), rel=1e-12)
    assert params.gamma == pytest.approx(sigma_tilde * eps, rel=1e-12)
    assert params.mobility.kind == "abs_degenerate"
    assert params.mobility.coefficient == pytest.approx(0.1 * eps**2, rel=1e-12)


def test_convergence_outputs(tmp_path):
    tables = run_convergence("space", out_dir=tmp_path, levels=1, tau=1e-3,
                             t_end=2e-3)
    assert set(tables) == {"phi", "vel", "mu_alpha_p", "grad_vel"}
    assert (tmp_path / "eoc_space.csv").exists()
    header = (tmp_path / "eoc_space.csv").read_text().splitlines()[0]
    assert header.startswith("k,resolution,err_phi,eoc_phi")
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert "phi" in manifest["summary"]


def test_convergence_rejects_unknown_mode(tmp_path):
    with pytest.raises(ValueError):
        run_convergence("hp", out_dir=tmp_path)
