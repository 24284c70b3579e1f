import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from chernlab import cli
from chernlab import fields as F


def run(tmp_path, *argv):
    return cli.main(list(argv) + ["--out", str(tmp_path)])


def _trajectory(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_geodesic_writes_trajectory_and_fields(tmp_path, capsys):
    code = run(tmp_path, "geodesic", "flat-generic", "--grid", "16", "--t", "-0.1", "0", "0.1")
    assert code == cli.EXIT_OK
    assert "existence window" in capsys.readouterr().out
    rows = _trajectory(tmp_path / "trajectory.csv")
    assert tuple(rows[0]) == cli.TRAJECTORY_COLUMNS and len(rows) == 3
    g_t = [float(r["G_t"]) for r in rows]
    assert max(g_t) - min(g_t) <= 1e-10 * max(1.0, abs(g_t[0]))
    assert all(abs(float(r["mass_t"]) - 1) < 1e-10 for r in rows)
    assert all(r["ricci_invariance_norm"] == "nan" for r in rows)
    g = F.load_field(tmp_path / "fields" / "g_t002.gfld")
    assert g.rank == "sym2" and g.values.shape == (16, 16, 2, 2)
    meta = json.loads((tmp_path / "geodesic.json").read_text())
    assert meta["N"] == 16 and meta["times"] == [-0.1, 0.0, 0.1]


def test_geodesic_schemes_agree_on_energy(tmp_path):
    out = {}
    for scheme in ("spectral", "central4"):
        d = tmp_path / scheme
        assert run(d, "geodesic", "flat-generic", "--grid", "32", "--scheme", scheme, "--t", "0.1") == 0
        out[scheme] = float(_trajectory(d / "trajectory.csv")[0]["G_t"])
    assert abs(out["spectral"] - out["central4"]) < 1e-3 * abs(out["spectral"])


def test_geodesic_outside_window_exits_2(tmp_path, capsys):
    assert run(tmp_path, "geodesic", "flat-generic", "--grid", "16", "--t", "50") == cli.EXIT_ERROR
    assert "window" in capsys.readouterr().err


def test_usage_errors_exit_64(tmp_path):
    assert run(tmp_path, "verify") == cli.EXIT_USAGE
    assert run(tmp_path, "verify", "everything", "--grid", "16") == cli.EXIT_USAGE
    assert run(tmp_path, "geodesic", "--grid", "15") == cli.EXIT_USAGE
    assert run(tmp_path, "geodesic", "--tol-override", "f_max=0") == cli.EXIT_USAGE
    assert run(tmp_path, "geodesic", "--tol-override", "nonsense=1") == cli.EXIT_USAGE
    assert run(tmp_path, "geodesic", "--sample", "nowhere") == cli.EXIT_USAGE
    assert run(tmp_path, "frobnicate") == cli.EXIT_USAGE


def test_config_files(tmp_path):
    toml = tmp_path / "run.toml"
    toml.write_text('grid = 16\nsamples = ["flat-fourier"]\n[tolerances]\nf_max = 1e-5\n')
    cfg = cli.load_config(toml)
    assert cfg.grid == 16 and cfg.tolerances == {"f_max": 1e-5}
    js = tmp_path / "run.json"
    js.write_text(json.dumps({"dim": 2, "scheme": "central4"}))
    assert cli.load_config(js).scheme == "central4"
    bad = tmp_path / "bad.toml"
    bad.write_text("grid = 16\ncolour = 'blue'\n")
    with pytest.raises(cli.UsageError):
        cli.load_config(bad)
    assert run(tmp_path / "o", "geodesic", "--config", str(bad)) == cli.EXIT_USAGE


def test_verify_pass_and_corrupt_seed(tmp_path, capsys):
    args = ["verify", "f-conservation", "--sample", "flat-fourier", "--grid", "64"]
    assert run(tmp_path / "good", *args) == cli.EXIT_OK
    summary = json.loads((tmp_path / "good" / "reports" / "summary.json").read_text())
    assert summary["passed"] is True
    assert (tmp_path / "good" / "reports" / "f-conservation__flat-fourier.csv").exists()
    assert run(tmp_path / "bad", *args, "--corrupt-seed") == cli.EXIT_FAIL
    assert "HARD CRITERION FAILURE" in capsys.readouterr().out


def test_convergence_csv(tmp_path):
    assert run(tmp_path, "convergence", "functoriality", "--sample", "curved-0.2", "--grid", "32") == 0
    rows = _trajectory(tmp_path / "convergence__functoriality.csv")
    assert [int(r["N"]) for r in rows] == [16, 32]
    assert all(float(r["residual_sup"]) < 1e-7 for r in rows)
    assert run(tmp_path, "convergence", "no-such-identity") == cli.EXIT_ERROR


def test_dump_sample(tmp_path):
    assert run(tmp_path, "dump-sample", "curved-0.2", "--grid", "16") == 0
    j = F.load_field(tmp_path / "curved-0.2" / "j.gfld")
    assert np.allclose(np.einsum("...ij,...jk->...ik", j.values, j.values), -np.eye(2), atol=1e-12)
    meta = json.loads((tmp_path / "curved-0.2" / "sample.json").read_text())
    assert meta["name"] == "curved-0.2" and meta["N"] == 16


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "chernlab.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "verify" in proc.stdout
