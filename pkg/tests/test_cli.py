import json
import subprocess
import sys

import numpy as np
import pytest
from conftest import gaussian_pair

from nls2 import cli
from nls2.grid import make_grid
from nls2.io import read_json, read_snapshot, write_snapshot


def run(tmp_path, *argv, out="out"):
    return cli.main([*argv, "--out", str(tmp_path / out)])


def test_console_script_help_and_version():
    p = subprocess.run([sys.executable, "-m", "nls2.cli", "--version"], capture_output=True, text=True)
    assert p.returncode == 0 and "nls2" in p.stdout
    assert cli.main([]) == cli.EXIT_USAGE


@pytest.mark.parametrize("argv", [
    ["ground-state", "--beta", "-1"],
    ["ground-state", "--beta", "0"],
    ["ground-state", "--grid-n", "96"],
    ["ground-state", "--box-length", "-2"],
    ["ground-state", "--tol", "1e-6"],
    ["ground-state", "--bogus"],
    ["evolve"],
    ["evolve", "--amplitude", "0.5", "--dt", "0"],
    ["transform", "--op", "rescale"],
    ["scatter-analyze"],
    ["wave-operator", "--T", "1"],
    ["dichotomy-sweep", "--amplitudes", "a,b"],
    ["dichotomy-sweep", "--amplitudes", "-1"],
])
def test_usage_errors(tmp_path, argv, capsys):
    assert run(tmp_path, *argv) == cli.EXIT_USAGE
    assert "usage error" in capsys.readouterr().err


def test_config_file_and_flag_precedence(tmp_path):
    conf = tmp_path / "c.json"
    conf.write_text(json.dumps({"beta": 2.0, "grid_n": 16, "tol": 1e-11}))
    assert cli.main(["ground-state", "--config", str(conf), "--beta", "1.0",
                     "--out", str(tmp_path / "o")]) == cli.EXIT_OK
    used = read_json(tmp_path / "o" / "config.json")
    assert used["beta"] == 1.0 and used["grid_n"] == 16 and used["tol"] == 1e-11
    conf.write_text(json.dumps({"nonsense": 1}))
    assert cli.main(["ground-state", "--config", str(conf), "--out", str(tmp_path / "p")]) == cli.EXIT_USAGE
    conf.write_text("{not json")
    assert cli.main(["ground-state", "--config", str(conf), "--out", str(tmp_path / "q")]) == cli.EXIT_USAGE


def test_ground_state_outputs_and_determinism(tmp_path, scalar_amplitude):
    for name in ("a", "b"):
        assert run(tmp_path, "ground-state", "--grid-n", "16", out=name) == cli.EXIT_OK
    doc = read_json(tmp_path / "a" / "ground_state.json")
    assert doc["converged"] and doc["pohozaev_passed"]
    assert doc["p0"] == pytest.approx(scalar_amplitude / np.sqrt(2), rel=1e-8)
    man_a = read_json(tmp_path / "a" / "manifest.json")["files"]
    man_b = read_json(tmp_path / "b" / "manifest.json")["files"]
    names = {e["path"] for e in man_a}
    assert {"ground_state.json", "p_profile.csv", "q_profile.csv", "ground_state_field.json",
            "ground_state_field.bin", "config.json", "version.json"} <= names
    digest = lambda m: {e["path"]: e["sha256"] for e in m if e["path"] != "config.json"}
    assert digest(man_a) == digest(man_b)
    assert read_snapshot(tmp_path / "a" / "ground_state_field").grid == make_grid(16, 16.0)


def test_ground_state_nonconvergence_exit(tmp_path, capsys):
    code = run(tmp_path, "ground-state", "--tol", "1e-30", "--radial-points", "1024")
    assert code == cli.EXIT_SCIENCE
    assert "non-convergence" in capsys.readouterr().err
    assert read_json(tmp_path / "out" / "ground_state.json")["converged"] is False


@pytest.mark.slow
def test_verify_identities_and_tampered_constant(tmp_path):
    common = ["verify-identities", "--samples", "8", "--boost-samples", "3"]
    assert run(tmp_path, *common, out="ok") == cli.EXIT_OK
    doc = read_json(tmp_path / "ok" / "identities.json")
    assert doc["all_passed"]
    assert run(tmp_path, *common, "--debug-kgn-scale", "0.5", out="bad") == cli.EXIT_SCIENCE
    bad = read_json(tmp_path / "bad" / "identities.json")
    assert not bad["suites"]["gn_sharp_constant"]["passed"]


def test_evolve_transform_scatter_pipeline(tmp_path):
    g = make_grid(32, 16.0)
    write_snapshot(gaussian_pair(g, 0.3, 1.5, xi=(0.4, 0, 0), v_scale=0.5), tmp_path / "init")
    assert run(tmp_path, "transform", "--in", str(tmp_path / "init.json"), "--op", "zero-momentum",
               "--grid-n", "32", out="zm") == cli.EXIT_OK
    info = read_json(tmp_path / "zm" / "transform.json")
    assert np.allclose(info["after"]["momentum"], 0, atol=1e-8 * info["after"]["mass"])
    assert run(tmp_path, "evolve", "--in", str(tmp_path / "zm" / "transformed.json"), "--grid-n", "32",
               "--dt", "0.01", "--t-end", "0.4", "--report-every", "5", "--checkpoint-every", "2",
               out="ev") == cli.EXIT_OK
    verdict = read_json(tmp_path / "ev" / "verdict.json")
    assert verdict["verdict"]["kind"] == "ReachedTEnd"
    assert (tmp_path / "ev" / "invariants.csv").exists()
    code = cli.main(["scatter-analyze", "--traj", str(tmp_path / "ev"),
                     "--out", str(tmp_path / "sc" / "scatter.json")])
    assert code == cli.EXIT_OK
    summary = read_json(tmp_path / "sc" / "scatter.json")
    assert summary["scattering_verdict"] in ("ConsistentWithScattering", "Inconclusive")
    assert (tmp_path / "sc" / "scatter_cauchy.csv").exists()


def test_scatter_analyze_without_checkpoints(tmp_path):
    g = make_grid(16, 16.0)
    write_snapshot(gaussian_pair(g, 0.1, 2.0), tmp_path / "init")
    run(tmp_path, "evolve", "--in", str(tmp_path / "init"), "--grid-n", "16", "--dt", "0.1",
        "--t-end", "0.2", "--report-every", "1", out="ev")
    assert cli.main(["scatter-analyze", "--traj", str(tmp_path / "ev"),
                     "--out", str(tmp_path / "sc")]) == cli.EXIT_SCIENCE
    assert "error" in read_json(tmp_path / "sc" / "report.json")


def test_transform_rescale_and_boost(tmp_path):
    g = make_grid(16, 8.0)
    write_snapshot(gaussian_pair(g, 0.5, 1.0), tmp_path / "init")
    assert run(tmp_path, "transform", "--in", str(tmp_path / "init"), "--op", "rescale",
               "--lambda", "2", out="r") == cli.EXIT_OK
    assert read_snapshot(tmp_path / "r" / "transformed").grid.box_length == 4.0
    assert run(tmp_path, "transform", "--in", str(tmp_path / "init"), "--op", "boost",
               "--xi", "0.7,0,0", out="b") == cli.EXIT_OK
    xi = read_json(tmp_path / "b" / "transform.json")["xi_used"]
    assert xi == pytest.approx([2 * np.pi / 8, 0, 0])
    assert run(tmp_path, "transform", "--in", str(tmp_path / "init"), "--op", "boost",
               "--xi", "1,2", out="c") == cli.EXIT_USAGE


def test_wave_operator_command(tmp_path):
    g = make_grid(16, 16.0)
    write_snapshot(gaussian_pair(g, 1e-3, 2.0, v_scale=0.5), tmp_path / "asym")
    assert run(tmp_path, "wave-operator", "--in", str(tmp_path / "asym"), "--T", "0.5",
               "--dt", "0.05", out="wo") == cli.EXIT_OK
    doc = read_json(tmp_path / "wo" / "wave_operator.json")
    assert all(doc["passes"].values())
    assert read_snapshot(tmp_path / "wo" / "data").time == pytest.approx(0.0, abs=1e-12)
    write_snapshot(gaussian_pair(g, 3.0, 2.0), tmp_path / "big")
    assert run(tmp_path, "wave-operator", "--in", str(tmp_path / "big"), "--T", "0.5",
               out="wo2") == cli.EXIT_SCIENCE


def test_small_dichotomy_sweep(tmp_path):
    # c = 1 sits on the threshold (no claim); c = 2 must blow up
    assert run(tmp_path, "dichotomy-sweep", "--amplitudes", "1.0,2.0", "--t-end", "0.05",
               "--report-every", "10", "--workers", "1", out="sw") == cli.EXIT_OK
    doc = read_json(tmp_path / "sw" / "sweep.json")
    rows = {r["c"]: r for r in doc["rows"]}
    assert rows[1.0]["borderline"] and rows[1.0]["expected"] == "borderline (no claim)"
    assert rows[2.0]["verdict"] == "BlowUpDetected" and rows[2.0]["consistent"]
    assert "np.float64" not in (tmp_path / "sw" / "sweep.csv").read_text()
    assert (tmp_path / "sw" / "runs" / "c_2.0000" / "verdict.json").exists()
