import json
import subprocess
import sys

import numpy as np
import pytest

from nschfem.assembly import Discretization
from nschfem.cli import main, parse_mesh_size
from nschfem.config import ConfigError, load_custom_config
from nschfem.experiments import (
    config_hash,
    phase_separation_config,
    parse_ratio,
)
from nschfem.mesh import build_structured_mesh
from nschfem.vtk_io import write_mesh_vtk, write_vtk

UNIT = ((0.0, 1.0), (0.0, 1.0))

GOLDEN_TWO_CELL = """\
# vtk DataFile Version 3.0
fields
ASCII
DATASET UNSTRUCTURED_GRID
POINTS 4 double
0 0 0
1 0 0
0 1 0
1 1 0
CELLS 2 8
3 0 1 3
3 0 3 2
CELL_TYPES 2
5
5
POINT_DATA 4
SCALARS phi double 1
LOOKUP_TABLE default
0.5
0.5
0.5
0.5
SCALARS mu double 1
LOOKUP_TABLE default
-1.25
-1.25
-1.25
-1.25
SCALARS p double 1
LOOKUP_TABLE default
0
0
0
0
VECTORS velocity double
2 3 0
2 3 0
2 3 0
2 3 0
"""


def parse_vtk_vertex_count(text: str) -> int:
    # independent minimal reader: find the POINTS declaration
    for line in text.splitlines():
        if line.startswith("POINTS"):
            return int(line.split()[1])
    raise ValueError("no POINTS section found")


class TestVtk:
    def test_two_cell_golden_file(self, tmp_path):
        disc = Discretization(build_structured_mesh(UNIT, 1, 1, "periodic"))
        state = disc.new_state()
        state.phi[:] = 0.5
        state.mu[:] = -1.25
        state.vel[0::2] = 2.0
        state.vel[1::2] = 3.0
        path = tmp_path / "out.vtk"
        write_vtk(state, disc.spaces, path)
        assert path.read_text() == GOLDEN_TWO_CELL

    def test_header_and_cell_type_codes(self, tmp_path):
        mesh = build_structured_mesh(UNIT, 2, 3, "periodic")
        path = tmp_path / "mesh.vtk"
        write_mesh_vtk(mesh, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "# vtk DataFile Version 3.0"
        assert "DATASET UNSTRUCTURED_GRID" in lines
        idx = lines.index("CELL_TYPES 12")
        assert all(line == "5" for line in lines[idx + 1: idx + 13])

    def test_self_parse_recovers_vertex_count(self, tmp_path):
        disc = Discretization(build_structured_mesh(UNIT, 3, 4, "periodic"))
        path = tmp_path / "fields.vtk"
        write_vtk(disc.new_state(), disc.spaces, path)
        assert parse_vtk_vertex_count(path.read_text()) == 20

    def test_write_failure_carries_path(self, tmp_path):
        disc = Discretization(build_structured_mesh(UNIT, 1, 1, "periodic"))
        bad = tmp_path / "missing-dir" / "f.vtk"
        with pytest.raises(OSError, match="missing-dir"):
            write_vtk(disc.new_state(), disc.spaces, bad)


class TestCliParsing:
    def test_mesh_size(self):
        assert parse_mesh_size("1/32") == pytest.approx(1 / 32)
        assert parse_mesh_size("0.25") == 0.25
        with pytest.raises(ConfigError):
            parse_mesh_size("three")
        with pytest.raises(ConfigError):
            parse_mesh_size("-1/4")

    def test_ratio(self):
        assert parse_ratio("1:1000") == (1.0, 1000.0)
        with pytest.raises(ValueError):
            parse_ratio("1000")
        with pytest.raises(ValueError):
            parse_ratio("-1:2")

    def test_bad_arguments_exit_code_1(self, capsys):
        assert main(["phase-sep", "--h", "junk"]) == 1
        assert main(["bubble"]) == 1  # --case required
        assert main(["no-such-command"]) == 1

    def test_nonconvergence_exit_code_2(self, tmp_path):
        # one enormous step with a tolerance Newton cannot reach
        cfg = tmp_path / "hard.ini"
        cfg.write_text(
            "[run]\nexperiment = custom\ntau = 10.0\nt_end = 10.0\n"
            f"out_dir = {tmp_path/'out'}\n"
            "[mesh]\nnx = 4\nny = 4\nbc = periodic\n"
            "[mixture]\nrho1 = 1.0\nrho2 = 1000.0\neta1 = 1e-2\neta2 = 1e-2\n"
            "gamma = 0.0316\nbeta = 0.0316\ng = 0.0\n"
            "mobility = degenerate_quartic:1e-2\n"
            "[newton]\ntol_residual = 1e-300\nmax_iters = 2\n"
        )
        assert main(["custom", "--config", str(cfg)]) == 2

    def test_missing_config_file(self):
        assert main(["custom", "--config", "/nonexistent.ini"]) == 1


class TestCliRuns:
    def test_phase_sep_smoke(self, tmp_path):
        out = tmp_path / "run"
        rc = main(["phase-sep", "--ratio", "10:1", "--h", "1/8",
                   "--tau", "1e-3", "--t-end", "2e-3", "--out", str(out)])
        assert rc == 0
        assert (out / "diagnostics.csv").exists()
        assert (out / "manifest.json").exists()
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["summary"]["steps"] == 2
        assert manifest["summary"]["energy_monotone"] is True

    def test_custom_config_roundtrip(self, tmp_path):
        cfg = tmp_path / "run.ini"
        cfg.write_text(
            "[run]\nexperiment = custom\ntau = 1e-3\nt_end = 1e-3\n"
            f"out_dir = {tmp_path/'out'}\noutput_every = 1\n"
            "[mesh]\nnx = 8\nny = 8\nbc = periodic\n"
            "[mixture]\nrho1 = 1.0\nrho2 = 10.0\neta1 = 1e-2\neta2 = 1e-2\n"
            "gamma = 0.0316\nbeta = 0.0316\ng = 0.0\n"
            "mobility = degenerate_quartic:1e-2\n"
        )
        config = load_custom_config(cfg)
        assert config.mesh.nx == 8
        assert config.params.rho2 == 10.0
        assert main(["custom", "--config", str(cfg)]) == 0

    def test_custom_requires_all_sections(self, tmp_path):
        cfg = tmp_path / "bad.ini"
        cfg.write_text("[run]\nexperiment = custom\ntau = 1e-3\nt_end = 1e-3\n")
        with pytest.raises(ConfigError):
            load_custom_config(cfg)
        assert main(["custom", "--config", str(cfg)]) == 1

    def test_console_entry_point(self):
        proc = subprocess.run(
            [sys.executable, "-m", "nschfem.cli", "--help"] if False else
            [sys.executable, "-c", "from nschfem.cli import main; import sys; sys.exit(main(['--help']))"],
            capture_output=True, text=True,
        )
        assert "phase-sep" in proc.stdout
        assert "bubble" in proc.stdout


def test_manifest_determinism():
    cfg_a = phase_separation_config(ratio=(10.0, 1.0), n=8, tau=1e-3, t_end=1e-2)
    cfg_b = phase_separation_config(ratio=(10.0, 1.0), n=8, tau=1e-3, t_end=1e-2)
    assert json.dumps(cfg_a.echo(), sort_keys=True) == json.dumps(cfg_b.echo(), sort_keys=True)
    assert config_hash(cfg_a.echo()) == config_hash(cfg_b.echo())
