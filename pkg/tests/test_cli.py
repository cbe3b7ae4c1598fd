import json
import subprocess
import sys

import numpy as np
import pytest

from hypflow import meshes
from hypflow.cli import main
from hypflow.surface import dump_surface

OCTA = str(meshes.fixture_path("octagon"))
TETRA = str(meshes.fixture_path("tetrahedron"))


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_validate_octagon(capsys):
    code, out, _ = run(capsys, "validate", OCTA)
    assert code == 0
    assert "chi = -2" in out and "N = 2" in out and "E = 12" in out
    assert "warning" not in out


def test_validate_tetrahedron_warns(capsys):
    code, out, _ = run(capsys, "validate", TETRA)
    assert code == 0
    assert "chi = 2" in out
    assert "forbids zero curvature" in out


def test_validate_bad_weight(capsys, tmp_path):
    lines = dump_surface(meshes.octagon()).splitlines()
    start = lines.index(next(l for l in lines if l.startswith("weights")))
    first = lines[start + 1].split()
    first[2] = "2.0"
    lines[start + 1] = " ".join(first)
    bad = tmp_path / "bad.cpm"
    bad.write_text("\n".join(lines) + "\n")
    code, _, err = run(capsys, "validate", str(bad))
    assert code == 1
    assert "edge 0" in err and "2.0" in err


def test_missing_file(capsys, tmp_path):
    code, _, err = run(capsys, "validate", str(tmp_path / "nope.cpm"))
    assert code == 1 and err.startswith("error:")


def test_curvature_tetrahedron(capsys):
    code, out, err = run(capsys, "curvature", TETRA)
    data = json.loads(out)
    assert code == 0
    assert "notice" in err
    assert data["values"] == pytest.approx([4.30328609453218835195] * 4, rel=1e-14)
    assert abs(data["gauss_bonnet_residual"]) < 1e-10


def test_curvature_a_unit_equals_K(capsys):
    _, out, _ = run(capsys, "curvature", OCTA, "--radii", "0.7,1.9")
    K = json.loads(out)["values"]
    _, out, _ = run(capsys, "curvature", OCTA, "--radii", "0.7,1.9", "--kind", "A",
                    "--area-element", "unit")
    assert json.loads(out)["values"] == K


def test_curvature_csv(capsys):
    code, out, _ = run(capsys, "curvature", OCTA, "--radii", "1,1", "--format", "csv")
    rows = [l.split(",") for l in out.splitlines()]
    assert code == 0
    assert rows[0] == ["vertex", "K"]
    assert float(rows[1][1]) == pytest.approx(1.00345407345319, abs=1e-12)
    assert rows[-1][0] == "gauss_bonnet_residual"


def test_curvature_wrong_radii_count(capsys):
    code, _, err = run(capsys, "curvature", OCTA, "--radii", "1,1,1")
    assert code == 1 and "3 values for 2 vertices" in err


def test_flow_converges(capsys, tmp_path):
    trace, summary = tmp_path / "t.csv", tmp_path / "s.json"
    code, out, _ = run(capsys, "flow", OCTA, "--radii", "1,1", "--trace", str(trace),
                       "--summary", str(summary), "--trace-every", "10")
    assert code == 0
    data = json.loads(out)
    assert data["outcome"] == "converged"
    assert json.loads(summary.read_text()) == data
    assert trace.read_text().startswith("t,r_0,r_1,K_0,K_1,Kinf,F,rmin,rmax")


def test_flow_horizon_exit(capsys):
    code, out, _ = run(capsys, "flow", OCTA, "--radii", "1,1", "--t-max", "0.5")
    assert code == 2 and json.loads(out)["outcome"] == "horizon_reached"


def test_flow_diverged_exit(capsys):
    code, out, _ = run(capsys, "flow", TETRA, "--radii", "1,1,1,1", "--t-max", "100")
    assert code == 3 and json.loads(out)["outcome"] == "diverged_to_zero_radius"


def test_flow_rejects_bad_dt(capsys):
    with pytest.raises(SystemExit):
        main(["flow", OCTA, "--dt", "-1"])


def test_a_flow_unit_matches_chow_luo(capsys):
    args = ["flow", OCTA, "--radii", "1,1", "--t-max", "2", "--integrator", "euler"]
    _, out, _ = run(capsys, *args, "--flow", "chow-luo")
    cl = json.loads(out)
    _, out, _ = run(capsys, *args, "--flow", "a-flow", "--area-element", "unit")
    af = json.loads(out)
    assert af["final_radii"] == cl["final_radii"]


def test_summary_roundtrip_newton(capsys, tmp_path):
    summary = tmp_path / "s.json"
    run(capsys, "flow", OCTA, "--radii", "1,1", "--summary", str(summary), "--tol", "1e-10")
    code, out, _ = run(capsys, "newton", OCTA, "--radii-file", str(summary))
    data = json.loads(out)
    assert code == 0 and data["status"] == "converged"
    flowed = json.loads(summary.read_text())["final_radii"]
    assert np.abs(np.array(flowed) - data["final_radii"]).max() < 1e-8


def test_newton_tetrahedron_fails(capsys):
    code, out, _ = run(capsys, "newton", TETRA, "--radii", "1,1,1,1")
    assert code == 3 and json.loads(out)["status"] != "converged"


def test_potential_zero_for_same_radii(capsys):
    code, out, _ = run(capsys, "potential", OCTA, "--base", "0.8,1.3", "--target", "0.8,1.3")
    assert code == 0 and json.loads(out)["F"] == 0.0


def test_spectrum(capsys, tmp_path):
    code, out, _ = run(capsys, "spectrum", OCTA, "--solve")
    data = json.loads(out)
    assert code == 0 and data["all_positive"]
    assert data["eigenvalues"][0] == pytest.approx(0.43180376, abs=1e-7)
    # unsolved radii are refused
    code, _, err = run(capsys, "spectrum", OCTA, "--radii", "1,1")
    assert code == 1 and "solve first" in err


def test_random_radii_seeded(capsys, monkeypatch):
    monkeypatch.setenv("HYPFLOW_SEED", "7")
    _, a, _ = run(capsys, "curvature", OCTA, "--radii", "random")
    _, b, _ = run(capsys, "curvature", OCTA, "--radii", "random")
    assert json.loads(a)["radii"] == json.loads(b)["radii"]


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "hypflow", "validate", OCTA],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0 and "chi = -2" in proc.stdout


def test_summary_roundtrip_curvature(capsys, tmp_path):
    summary = tmp_path / "s.json"
    for argv in (["--radii", "1,1"], ["--radii", "1,1", "--t-max", "0.5"]):
        run(capsys, "flow", OCTA, *argv, "--summary", str(summary))
        reported = json.loads(summary.read_text())["final_kinf"]
        _, out, _ = run(capsys, "curvature", OCTA, "--radii-file", str(summary))
        assert abs(json.loads(out)["kinf"] - reported) < 1e-12


def test_newton_matches_oracle(capsys, octa_zero):
    code, out, _ = run(capsys, "newton", OCTA, "--radii", "1,1")
    assert code == 0
    assert np.abs(np.array(json.loads(out)["final_radii"]) - octa_zero).max() < 1e-8
