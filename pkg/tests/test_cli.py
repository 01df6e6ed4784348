import contextlib
import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from igeo import cli, curvature, diagnostics
from igeo.families import euclidean, normal_family, sphere_chart
from igeo.manifold import dumps_manifold, load_manifold


def igeo(*args):
    """Run the CLI in-process and capture its streams."""
    out, err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        code = cli.main([str(a) for a in args])
    return subprocess.CompletedProcess(args, code, out.getvalue(), err.getvalue())


def test_console_entry_point(tmp_path):
    path = tmp_path / "e.igm"
    path.write_text(dumps_manifold(euclidean(2)))
    r = subprocess.run([sys.executable, "-m", "igeo.cli", "check", str(path), "--json"],
                       capture_output=True, text=True)
    assert r.returncode == 0
    assert json.loads(r.stdout)["manifold"] == "euclidean2"


@pytest.fixture
def files(tmp_path):
    out = {}
    for name, spec in (("euclid", euclidean(2)), ("sphere", sphere_chart()), ("normal", normal_family())):
        path = tmp_path / f"{name}.igm"
        path.write_text(dumps_manifold(spec))
        out[name] = path
    bad = tmp_path / "order.igm"
    bad.write_text("dim = 2\ndomain = [0, 1] [0, 1]\ng 1 1 = 1\ng 2 1 = 0.5\ng 2 2 = 1\n")
    out["order"] = bad
    nspd = tmp_path / "nspd.igm"
    nspd.write_text("dim = 2\ndomain = [0, 1] [0, 1]\ng 1 1 = 1\ng 2 2 = t1 - 0.5\n")
    out["nspd"] = nspd
    return out


class TestValidate:
    def test_ok(self, files):
        r = igeo("validate", files["euclid"])
        assert r.returncode == 0 and "result: PASS" in r.stdout

    def test_index_order(self, files):
        r = igeo("validate", files["order"])
        assert r.returncode == 2
        assert "index order" in r.stderr and "line 4" in r.stderr

    def test_not_spd(self, files):
        r = igeo("validate", files["nspd"])
        assert r.returncode == 1 and "not positive definite" in r.stdout

    def test_missing_file(self, tmp_path):
        assert igeo("validate", tmp_path / "nope.igm").returncode == 2


class TestCheck:
    def test_sphere(self, files):
        r = igeo("check", files["sphere"])
        assert r.returncode == 0, r.stdout

    def test_random_seed_7(self, tmp_path):
        path = tmp_path / "r7.igm"
        assert igeo("random", "--dim", 3, "--seed", 7, "-o", path).returncode == 0
        r = igeo("check", path, "--json")
        assert r.returncode == 0
        checks = json.loads(r.stdout)["checks"]
        verdicts = {c["name"]: c["verdict"] for c in checks}
        assert verdicts["theorem_3_1"] == "skip" and verdicts["theorem_4_1"] == "skip"
        assert all(c["verdict"] == "pass" for c in checks if c["role"] == "identity")

    def test_options(self, files):
        r = igeo("check", files["sphere"], "--tol", "1e-6", "--points", 30, "--seed", 5,
                 "--alpha", "0.5", "--alpha", "-0.5", "--json")
        data = json.loads(r.stdout)
        assert data["seed"] == 5 and data["tolerance"] == 1e-6
        assert all(c["points"] == 30 for c in data["checks"])
        assert [c["alpha"] for c in data["checks"] if c["name"] == "equiaffine"] == [[-0.5], [0.5]]

    def test_invalid_spec_exits_1(self, files):
        assert igeo("check", files["nspd"]).returncode == 1

    def test_bad_usage(self, files):
        assert igeo("check", files["sphere"], "--tol", "-1").returncode == 2
        assert igeo("check").returncode == 2
        assert igeo("frobnicate").returncode == 2

    def test_corrupted_curvature_is_caught(self, files, monkeypatch, capsys):
        real = curvature.riemann

        def broken(geo, alpha):
            c = real(geo, alpha)
            R = c.R.copy()
            R[..., 0, 0, 0, 1] += 1e-3 * alpha  # breaks the (R, R*) skew identity
            return curvature.CurvatureAtPoint(c.alpha, R, np.einsum("...ecab,...ed->...abcd", R, geo.g), c.Ric)

        monkeypatch.setattr(diagnostics, "riemann", broken)
        code = cli.main(["check", str(files["sphere"]), "--points", "20"])
        assert code == 1
        assert "FAIL" in capsys.readouterr().out


class TestPrior:
    def test_normal_jeffreys(self, files, tmp_path):
        out = tmp_path / "prior.csv"
        r = igeo("prior", files["normal"], "--alpha", 0, "--grid", "7,9", "-o", out)
        assert r.returncode == 0
        rows = list(csv.DictReader(io.StringIO(out.read_text())))
        assert len(rows) == 63
        ratio = np.array([np.exp(float(r["log_f"])) * float(r["t2"]) ** 2 for r in rows])
        assert np.ptp(ratio) / ratio.mean() <= 1e-8

    def test_euclidean_zero(self, files):
        r = igeo("prior", files["euclid"], "--alpha", 0.3, "--grid", 4)
        assert r.returncode == 0
        rows = r.stdout.splitlines()
        assert rows[0] == "t1,t2,log_f" and len(rows) == 17
        assert all(row.endswith(",0") for row in rows[1:])

    def test_not_equiaffine(self, tmp_path):
        path = tmp_path / "r.igm"
        igeo("random", "--dim", 2, "--seed", 7, "-o", path)
        r = igeo("prior", path, "--alpha", 1, "--grid", 5)
        assert r.returncode == 1 and "not equiaffine at alpha=1" in r.stderr

    def test_base_point(self, files):
        r = igeo("prior", files["normal"], "--alpha", 0, "--grid", 3, "--base=-1,0.5")
        first = r.stdout.splitlines()[1]
        assert first == "-1,0.5,0"

    def test_bad_base(self, files):
        assert igeo("prior", files["normal"], "--alpha", 0, "--base", "5,5").returncode == 2
        assert igeo("prior", files["normal"], "--alpha", 0, "--grid", "a").returncode == 2


class TestRandom:
    def test_deterministic(self, tmp_path):
        a, b = tmp_path / "a.igm", tmp_path / "b.igm"
        igeo("random", "--dim", 2, "--seed", 0, "-o", a)
        igeo("random", "--dim", 2, "--seed", 0, "-o", b)
        assert a.read_bytes() == b.read_bytes()

    def test_zero_amplitude(self):
        r = igeo("random", "--dim", 2, "--seed", 3, "--amplitude", 0)
        assert "g 1 1 = 1\ng 2 2 = 1\n" in r.stdout and "Q" not in r.stdout

    def test_seed_9_dim_4(self, tmp_path):
        path = tmp_path / "r.igm"
        igeo("random", "--dim", 4, "--seed", 9, "-o", path)
        assert igeo("validate", path).returncode == 0
        report = diagnostics.run_suite(load_manifold(path), diagnostics.Sampling(points=50))
        assert all(c.passed for c in report.checks if c.role == "identity")

    def test_bad_dim(self):
        assert igeo("random", "--dim", 7, "--seed", 0).returncode == 2
