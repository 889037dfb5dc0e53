import csv
import json
import subprocess
import sys

import numpy as np
import pytest
import yaml

from cauchyform.cli import (
    EXIT_CONFIG,
    EXIT_FAIL,
    EXIT_OK,
    RunConfig,
    dirichlet_oracle,
    load_potential,
    run,
    save_potential,
)
from cauchyform.errors import ConfigError
from cauchyform.fields import poly_bump
from cauchyform.maxwell import coclosed_potential, interior_coclosed_basis, pure_gauge
from cauchyform.mesh import generate_family
from cauchyform.propagator import SpacetimeForm, TimeGrid


def write(path, doc):
    path.write_text(yaml.safe_dump(doc))
    return str(path)


def interval_config(tmp_path, **extra):
    doc = {
        "experiment": "iv",
        "mesh": {"family": "interval", "resolution": 32},
        "k": 0,
        "bc": {"kind": "dirichlet"},
        "time": {"t0": 0.0, "t1": 2.0, "steps": 100},
        "out": str(tmp_path / "runs"),
        "trials": 5,
    }
    doc.update(extra)
    return write(tmp_path / "run.yaml", doc)


def report(outdir):
    return json.loads((outdir / "report.json").read_text())


def test_verify_interval_passes(tmp_path):
    code, out = run(["verify", "--config", interval_config(tmp_path)])
    assert code == EXIT_OK
    rep = report(out)
    assert rep["schema"] == "cauchyform-report-v1"
    assert rep["status"] == "pass"
    for name in ("dd_zero", "green_defect", "positivity", "kernel_slope", "propagator_adjoint", "spectrum_oracle"):
        assert rep["checks"][name]["status"] == "pass", name


def test_runs_are_append_only_and_deterministic(tmp_path):
    cfg = interval_config(tmp_path)
    _, a = run(["verify", "--config", cfg])
    _, b = run(["verify", "--config", cfg])
    assert a != b
    assert a.name == "verify-001" and b.name == "verify-002"
    assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()


def test_seed_override_changes_config_hash(tmp_path):
    cfg = interval_config(tmp_path)
    _, a = run(["verify", "--config", cfg])
    _, b = run(["verify", "--config", cfg, "--seed", "7"])
    assert report(a)["config_hash"] != report(b)["config_hash"]
    assert report(b)["seed"] == 7


@pytest.mark.parametrize(
    "doc, message",
    [
        ({"bc": {"kind": "robin_normal", "f": 1.0}}, "f <= 0"),
        ({"bc": {"kind": "robin_tangential", "f": -1.0}}, "f >= 0"),
        ({"bc": {"kind": "warp"}}, "warp"),
        ({"mesh": {"family": "torus"}}, "torus"),
        ({"colour": "red"}, "unknown config keys"),
        ({"k": "one"}, "integer"),
        ({"time": {"t0": 1.0, "t1": 0.0}}, "t1 > t0"),
        ({"k": 3}, "outside"),
    ],
)
def test_bad_configs_exit_2(tmp_path, capsys, doc, message):
    cfg = interval_config(tmp_path, **doc)
    code, out = run(["verify", "--config", cfg])
    assert code == EXIT_CONFIG
    assert out is None
    assert message in capsys.readouterr().err
    # a failed run leaves no directory behind
    assert not list((tmp_path / "runs").glob("*/verify-*"))


def test_malformed_yaml_exit_2(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text("mesh: [unclosed\n")
    assert run(["mesh", "--config", str(p)])[0] == EXIT_CONFIG
    assert run(["mesh", "--config", str(tmp_path / "missing.yaml")])[0] == EXIT_CONFIG


def test_json_config_is_accepted(tmp_path):
    p = tmp_path / "run.json"
    p.write_text(json.dumps({"experiment": "j", "mesh": {"family": "disk", "resolution": 2}, "out": str(tmp_path)}))
    code, out = run(["mesh", "--config", str(p)])
    assert code == EXIT_OK
    assert (out / "mesh.json").exists()
    assert report(out)["results"]["euler"] == 1


def test_refine_flag(tmp_path):
    cfg = write(tmp_path / "m.yaml", {"experiment": "m", "mesh": {"family": "disk", "resolution": 2}, "out": str(tmp_path)})
    _, a = run(["mesh", "--config", cfg])
    _, b = run(["mesh", "--config", cfg, "--refine", "1"])
    ca, cb = report(a)["results"]["counts"], report(b)["results"]["counts"]
    assert cb[2] == 4 * ca[2]
    assert run(["mesh", "--config", cfg, "--refine", "-1"])[0] == EXIT_CONFIG


def test_spectrum_matches_toeplitz_oracle(tmp_path):
    code, out = run(["spectrum", "--config", interval_config(tmp_path)])
    assert code == EXIT_OK
    with open(out / "spectrum.csv") as fh:
        rows = list(csv.DictReader(fh))
    vals = np.array([float(r["eigenvalue"]) for r in rows[:5]])
    cons, _, _ = dirichlet_oracle(generate_family("interval", 32), 5)
    assert np.allclose(vals, cons, rtol=1e-10)


def test_cohomology_command(tmp_path):
    cfg = write(tmp_path / "a.yaml", {"experiment": "a", "mesh": {"family": "annulus", "resolution": 3}, "out": str(tmp_path)})
    code, out = run(["cohomology", "--config", cfg])
    assert code == EXIT_OK
    with open(out / "betti.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [int(r["absolute"]) for r in rows] == [1, 1, 0]
    assert [int(r["relative"]) for r in rows] == [0, 1, 1]
    assert [int(r["harmonic_normal"]) for r in rows] == [1, 1, 0]


def test_propagate_zero_source(tmp_path):
    code, out = run(["propagate", "--config", interval_config(tmp_path)])
    assert code == EXIT_OK
    for name in ("retarded.csv", "advanced.csv", "causal.csv", "manifest.json"):
        assert (out / name).exists()
    with open(out / "retarded.csv") as fh:
        assert all(float(r["value"]) == 0.0 for r in csv.DictReader(fh))
    res = report(out)["results"]["residuals"]
    assert res["retarded"]["norm"] == 0.0


def test_propagate_with_source_file(tmp_path):
    c = generate_family("interval", 32)
    grid = TimeGrid.span(0.0, 2.0, 100)
    x = c.vertices[:, 0]
    src = SpacetimeForm.separable(c, 0, grid, lambda t: poly_bump(0.5, 0.3)(t), np.sin(x))
    src.to_csv(tmp_path / "src.csv")
    cfg = interval_config(tmp_path, options={"orientations": ["retarded"]})
    code, out = run(["propagate", "--config", cfg, "--source", str(tmp_path / "src.csv")])
    assert code == EXIT_OK
    assert not (out / "advanced.csv").exists()
    sol = SpacetimeForm.from_csv(out / "retarded.csv", c, 0, grid)
    assert sol.norm() > 0
    assert not sol.values[grid.samples < 0.2].any()


def test_propagate_rejects_bad_orientation(tmp_path):
    cfg = interval_config(tmp_path, options={"orientations": ["sideways"]})
    assert run(["propagate", "--config", cfg])[0] == EXIT_CONFIG


def _gauge_file(tmp_path, bc, steps):
    c = generate_family("disk", 4)
    N = interior_coclosed_basis(c, 1)
    w = np.random.default_rng(0).standard_normal(c.count(0))
    if bc == "maxwell_tangential":
        w[c.boundary_indices(0)] = 0.0
    A = coclosed_potential(c, 1, bc, poly_bump(0.0, 0.4), 5 * N[:, 0]) + pure_gauge(c, 1, bc, poly_bump(1.0, 0.5), w)
    grid = TimeGrid.span(-0.5, 2.0, steps)
    path = tmp_path / f"{bc}-{steps}.json"
    save_potential(path, SpacetimeForm(c, 1, grid, A.field(grid.samples)), bc, (0.4, 1.6))
    cfg = write(tmp_path / f"{bc}.yaml", {
        "experiment": "g", "mesh": {"family": "disk", "resolution": 4}, "k": 1, "bc": {"kind": bc}, "out": str(tmp_path),
    })
    return cfg, path


def test_gaugefix_tangential_file(tmp_path):
    cfg, pot = _gauge_file(tmp_path, "maxwell_tangential", 401)
    code, out = run(["gaugefix", "--config", cfg, "--potential", str(pot)])
    assert code == EXIT_OK
    rep = report(out)
    assert rep["results"]["before"]["lorenz"] > 1e-2
    assert rep["checks"]["lorenz_residual"]["value"] < 1e-10
    form, window = load_potential(out / "fixed_potential.json", generate_family("disk", 4), "maxwell_tangential", 1)
    assert window == (0.4, 1.6)


def test_gaugefix_normal_file_converges_with_sampling(tmp_path):
    # sampled input enters through a cubic spline, so the residual shrinks with the step
    res = []
    for steps in (401, 801):
        cfg, pot = _gauge_file(tmp_path, "maxwell_normal", steps)
        code, out = run(["gaugefix", "--config", cfg, "--potential", str(pot)])
        assert code in (EXIT_OK, EXIT_FAIL)
        rep = report(out)
        assert rep["checks"]["boundary_residual"]["status"] == "pass"
        res.append(rep["results"]["after"]["lorenz"])
        assert res[-1] < 1e-3 * rep["results"]["before"]["lorenz"]
    assert res[1] < res[0] / 3


def test_gaugefix_rejects_wrong_bc(tmp_path, capsys):
    _, pot = _gauge_file(tmp_path, "maxwell_tangential", 101)
    cfg, _ = _gauge_file(tmp_path, "maxwell_normal", 101)
    assert run(["gaugefix", "--config", cfg, "--potential", str(pot)])[0] == EXIT_CONFIG
    assert "declares bc 'maxwell_tangential'" in capsys.readouterr().err
    assert run(["gaugefix", "--config", cfg])[0] == EXIT_CONFIG
    assert run(["gaugefix", "--config", interval_config(tmp_path), "--potential", str(pot)])[0] == EXIT_CONFIG


def test_potential_file_schema(tmp_path):
    c = generate_family("disk", 2)
    p = tmp_path / "p.json"
    p.write_text(json.dumps({"schema": "other"}))
    with pytest.raises(ConfigError, match="schema"):
        load_potential(p, c, "maxwell_normal", 1)


def test_symplectic_and_radical_commands(tmp_path):
    doc = {"experiment": "s", "mesh": {"family": "disk", "resolution": 4}, "k": 1,
           "bc": {"kind": "maxwell_normal"}, "out": str(tmp_path), "trials": 2}
    cfg = write(tmp_path / "s.yaml", doc)
    code, out = run(["symplectic", "--config", cfg])
    assert code == EXIT_OK
    with open(out / "sigma.csv") as fh:
        assert len(list(csv.DictReader(fh))) == 2
    code, out = run(["radical", "--config", cfg])
    assert code == EXIT_OK
    assert report(out)["results"]["radical"]["dimension"] == 0
    assert (out / "pairing.csv").exists()


def test_maxwell_commands_need_maxwell_conditions(tmp_path):
    cfg = interval_config(tmp_path)
    for cmd in ("symplectic", "radical", "gaugefix"):
        assert run([cmd, "--config", cfg])[0] == EXIT_CONFIG


def test_config_defaults_round_trip():
    cfg = RunConfig.from_mapping(None)
    again = RunConfig.from_mapping(cfg.to_dict())
    assert again == cfg
    with pytest.raises(ConfigError):
        RunConfig.from_mapping([1, 2])


def test_module_entry_point(tmp_path):
    cfg = interval_config(tmp_path)
    proc = subprocess.run([sys.executable, "-m", "cauchyform", "mesh", "--config", cfg], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "mesh: PASS" in proc.stdout
    bad = subprocess.run([sys.executable, "-m", "cauchyform", "nonsense"], capture_output=True, text=True)
    assert bad.returncode == 2
