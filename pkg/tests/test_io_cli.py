import hashlib
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from insulate import cli
from insulate import config as config_mod
from insulate.errors import PreconditionError, SolverError
from insulate.grid import GridField
from insulate.io import (TRACE_HEADER, read_grid, read_table, sha256, write_grid, write_manifest,
                         write_trace)
from insulate.model import EnergyBreakdown

finite = st.floats(-1e300, 1e300, allow_nan=False, allow_infinity=False)


# ---------------------------------------------------------------- grid files

@settings(max_examples=30)
@given(arrays(float, st.tuples(st.integers(1, 6), st.integers(1, 6)), elements=finite),
       st.floats(-10, 10), st.floats(1e-3, 10))
def test_grid_round_trip_is_bit_exact(tmp_path_factory, values, x0, dx):
    ny, nx = values.shape
    g = GridField(nx, ny, (x0, -x0 / 3), (dx, dx * 1.1), values)
    back = read_grid(write_grid(tmp_path_factory.mktemp("g") / "f.grid", g))
    assert back.values.tobytes() == g.values.tobytes()
    assert back.origin == g.origin and back.spacing == g.spacing


def test_grid_read_errors_carry_line_numbers(tmp_path):
    p = tmp_path / "bad.grid"
    p.write_text("IFGRID v1 2 2 0 0 1 1\n1 2\n3\n")
    with pytest.raises(PreconditionError, match="bad.grid:3: expected 2 values"):
        read_grid(p)
    p.write_text("IFGRID v1 2 2 0 0 1 1\n1 2\n3 x\n")
    with pytest.raises(PreconditionError, match=":3:"):
        read_grid(p)
    p.write_text("GRID 2 2\n")
    with pytest.raises(PreconditionError, match=":1:"):
        read_grid(p)
    p.write_text("IFGRID v1 2 3 0 0 1 1\n1 2\n")
    with pytest.raises(PreconditionError, match="expected 3 value rows"):
        read_grid(p)


def test_trace_header_and_values(tmp_path):
    e = EnergyBreakdown.of(1.0, 2.0, 0.5)
    rows = read_table(write_trace(tmp_path / "t.csv", [(0, e, 0.25), (1, e, 0.125)]))
    assert tuple(rows[0]) == TRACE_HEADER
    assert float(rows[1]["total"]) == 3.5 and float(rows[1]["grad_norm"]) == 0.125


def test_manifest_records_sha256(tmp_path):
    a = tmp_path / "a.txt"
    a.write_bytes(b"insulation\n")
    m = json.loads(write_manifest(tmp_path, config={"x": {"y": "1"}}, version="0", seed=3,
                                  wall_time=0.1, artifacts=[a]).read_text())
    assert m["artifacts"] == [{"path": "a.txt",
                               "sha256": hashlib.sha256(b"insulation\n").hexdigest()}]
    assert sha256(a) == m["artifacts"][0]["sha256"] and m["seed"] == 3


# ---------------------------------------------------------------- configuration

def test_config_file_and_overrides(tmp_path):
    p = tmp_path / "c.ini"
    p.write_text('[problem]\nrobin_h = 4   # Robin\nvolume_cost = "0.5"\n'
                 "[omega]\ncenter = [0.1, -0.2]\n")
    cfg = config_mod.load(p, ["problem.volume_cost=2"])
    assert cfg["problem"]["robin_h"] == 4.0 and cfg["problem"]["volume_cost"] == 2.0
    assert cfg["omega"]["center"] == (0.1, -0.2)
    assert cfg["solver"] == config_mod.defaults()["solver"]


def test_unknown_key_warns_or_fails_with_location(tmp_path):
    p = tmp_path / "c.ini"
    p.write_text("[problem]\nrobin_h = 2\nrobn_h = 3\n")
    with pytest.warns(UserWarning, match=r"c.ini:3: unknown key problem.robn_h"):
        config_mod.load(p)
    with pytest.raises(config_mod.ConfigError, match=r"c.ini:3"):
        config_mod.load(p, strict=True)
    with pytest.raises(config_mod.ConfigError, match="unknown key"):
        config_mod.load(None, ["problem.nope=1"])
    with pytest.raises(config_mod.ConfigError, match="section.key=value"):
        config_mod.load(None, ["robin_h=1"])
    p.write_text("[shape]\ngradient = exact\n")
    with pytest.raises(config_mod.ConfigError, match="c.ini:2: bad value"):
        config_mod.load(p)


def test_dump_load_round_trip(tmp_path):
    cfg = config_mod.load(None, ["problem.sweep_h=1, 2.5", "shape.fd_fallback=off",
                                 "omega.kind=two_disks"])
    p = tmp_path / "round.ini"
    p.write_text(config_mod.dump(cfg, with_comments=True))
    assert config_mod.load(p, strict=True) == cfg


def test_shipped_defaults_file_is_current():
    from pathlib import Path

    shipped = Path(__file__).resolve().parents[1] / "configs" / "defaults.ini"
    assert shipped.read_text() == config_mod.dump(config_mod.defaults(), with_comments=True)


# ---------------------------------------------------------------- command line

def test_radial_run_writes_table_and_manifest(tmp_path, capsys):
    out = tmp_path / "r"
    code = cli.run(["radial", "--out", str(out), "--set", "problem.robin_h=4",
                    "--set", "problem.sweep_volume_cost=1, 2"])
    assert code == 0
    rows = read_table(out / "radial.csv")
    assert float(rows[0]["R_star"]) == pytest.approx(1.5402139531585497, abs=1e-9)
    assert len(rows) == 2 and rows[1]["volume_cost"] == "2"
    man = json.loads((out / "manifest.json").read_text())
    for entry in man["artifacts"]:
        assert sha256(out / entry["path"]) == entry["sha256"]
    assert {e["path"] for e in man["artifacts"]} == {"radial.csv", "config.ini"}
    assert "R*=1.540213953" in capsys.readouterr().out


def test_artifacts_are_deterministic(tmp_path):
    for name in ("a", "b"):
        assert cli.run(["radial", "--out", str(tmp_path / name)]) == 0
    assert sha256(tmp_path / "a" / "radial.csv") == sha256(tmp_path / "b" / "radial.csv")


def test_bad_input_exits_2(tmp_path, capsys):
    p = tmp_path / "c.ini"
    p.write_text("[problem]\nrobin_h = -1\n")
    assert cli.run(["radial", "--config", str(p), "--out", str(tmp_path)]) == 2
    assert cli.run(["radial", "--set", "problem.bogus=1", "--out", str(tmp_path)]) == 2
    assert cli.run(["radial", "--seed", "-1", "--out", str(tmp_path)]) == 2
    assert cli.run(["analyze", "--out", str(tmp_path)]) == 2
    assert "error:" in capsys.readouterr().err


def test_solver_failure_exits_3(tmp_path, monkeypatch, capsys):
    def boom(cfg, out, seed):
        raise SolverError("linear solve diverged")

    monkeypatch.setitem(cli.COMMANDS, "radial", boom)
    assert cli.run(["radial", "--out", str(tmp_path)]) == 3
    assert "solver failure: linear solve diverged" in capsys.readouterr().err


def test_defaults_command_prints_config(capsys):
    assert cli.run(["defaults"]) == 0
    assert capsys.readouterr().out == config_mod.dump(config_mod.defaults(), with_comments=True)


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("INSULATE_OUT", str(tmp_path / "env"))
    assert cli.run(["radial"]) == 0
    assert (tmp_path / "env" / "radial.csv").exists()


def test_phase_field_then_analyze(tmp_path):
    # at 48^2 the bulk increments per cell exceed the default jump threshold
    out = tmp_path / "pf"
    assert cli.run(["phase-field", "--out", str(out), "--set", "phase_field.n=48",
                    "--set", "problem.robin_h=4", "--set", "phase_field.n_stages=2",
                    "--set", "phase_field.jump_threshold=0.25"]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["positive_components"] == 1
    u = read_grid(out / "u.grid")
    assert u.nx == 48 and np.all((u.values >= 0) & (u.values <= 1))
    for op in ("lower-bound", "density", "holes"):
        dest = tmp_path / op
        assert cli.run(["analyze", "--field", str(out / "u_sharp.grid"), "--op", op,
                        "--out", str(dest)]) == 0
        assert json.loads((dest / "report.json").read_text())["op"] == op
    rep = json.loads((tmp_path / "lower-bound" / "report.json").read_text())
    assert rep["delta_obs"] == pytest.approx(summary["delta_obs"])


def test_shape_opt_small_run(tmp_path):
    out = tmp_path / "so"
    assert cli.run(["shape-opt", "--out", str(out), "--set", "problem.robin_h=4",
                    "--set", "shape.modes=2", "--set", "solver.n_s=16",
                    "--set", "solver.n_theta=32", "--set", "shape.tol=1e-4"]) == 0
    res = json.loads((out / "result.json").read_text())
    assert abs(res["oracle"]["relative_energy_gap"]) < 0.01
    assert len(read_table(out / "boundary.csv")) == 256
    assert len(read_table(out / "trace.csv")) == res["iterations"] + 1
