import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from cone_bvp.cli import main, resolve_seed
from cone_bvp.problem import load_problem, spec_to_dict


def write(path, data):
    path.write_text(data if isinstance(data, str) else json.dumps(data))
    return str(path)


CONSTANT = {"n": 1, "phi_exponent": 2, "weight_p": "1", "weight_q": "1", "f": ["8"]}
SUPERLINEAR = {"n": 1, "phi_exponent": 2, "weight_p": "1", "weight_q": "1",
               "h": ["1"], "g": ["u1^2"]}
LINEAR = {"n": 1, "phi_exponent": 2, "weight_p": "1", "weight_q": "1",
          "h": ["1"], "g": ["3*u1"]}
ANNULUS = {"n": 1, "phi_exponent": 2,
           "radial": {"N": 2, "R1": 1, "R2": 2, "k": ["1"], "g": ["1+u1/4"]}}


@pytest.fixture
def files(tmp_path):
    return {name: write(tmp_path / f"{name}.json", data)
            for name, data in [("constant", CONSTANT), ("superlinear", SUPERLINEAR),
                               ("linear", LINEAR), ("annulus", ANNULUS)]}


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


class TestValidate:
    def test_valid(self, files, capsys):
        assert main(["validate", files["constant"]]) == 0
        assert json.loads(capsys.readouterr().out)["passed"] is True

    def test_decreasing_q(self, tmp_path, capsys):
        path = write(tmp_path / "bad.json", {**CONSTANT, "weight_q": "2-t"})
        assert main(["validate", path]) == 1
        err = capsys.readouterr().err
        assert "H2" in err

    def test_malformed_json(self, tmp_path):
        assert main(["validate", write(tmp_path / "bad.json", "{not json")]) == 2

    def test_missing_file(self, tmp_path):
        assert main(["validate", str(tmp_path / "absent.json")]) == 2

    def test_out_file(self, files, tmp_path):
        out = tmp_path / "v.json"
        assert main(["validate", files["constant"], "--out", str(out)]) == 0
        assert json.loads(out.read_text())["passed"] is True

    def test_unknown_command(self):
        assert main(["frobnicate"]) == 2


class TestSolve:
    def test_closed_form(self, files, tmp_path):
        out = tmp_path / "run"
        assert main(["solve", files["constant"], "--out", str(out)]) == 0
        rows = read_csv(out / "solution.csv")
        assert rows[0] == ["t", "u1"]
        data = np.array(rows[1:], dtype=float)
        assert len(data) == 513
        assert np.max(np.abs(data[:, 1] - 4 * data[:, 0] * (1 - data[:, 0]))) <= 1e-6
        report = json.loads((out / "report.json").read_text())
        assert report["schema_version"] == 1 and report["sandwich"] is None
        assert report["solution"]["sigmas"][0] == pytest.approx(0.5, abs=1e-8)

    def test_manifest_lists_outputs(self, files, tmp_path):
        out = tmp_path / "run"
        main(["solve", files["constant"], "--grid", "64", "--out", str(out)])
        manifest = json.loads((out / "manifest.json").read_text())
        listed = {p.rsplit("/", 1)[-1] for p in manifest["outputs"]}
        assert listed == {"solution.csv", "report.json", "manifest.json"}
        assert manifest["config"]["grid"] == 64 and manifest["command"] == "solve"

    def test_sandwich_pass(self, files, tmp_path, capsys):
        out = tmp_path / "run"
        assert main(["solve", files["constant"], "--alpha", "0.5", "--beta", "2",
                     "--out", str(out)]) == 0
        assert json.loads((out / "report.json").read_text())["sandwich"] is True
        assert "pass" in capsys.readouterr().out

    def test_impossible_tolerance(self, files, tmp_path):
        out = tmp_path / "run"
        code = main(["solve", files["superlinear"], "--grid", "64", "--tol", "1e-30",
                     "--method", "picard", "--max-iter", "50", "--out", str(out)])
        assert code == 1
        report = json.loads((out / "report.json").read_text())
        assert report["solution"]["converged"] is False

    @pytest.mark.parametrize("flags", [["--grid", "7"], ["--alpha", "1"],
                                       ["--alpha", "-1", "--beta", "2"], ["--method", "x"]])
    def test_bad_flags(self, files, tmp_path, flags):
        assert main(["solve", files["constant"], "--out", str(tmp_path), *flags]) == 2


class TestIntervals:
    def test_superlinear(self, files, tmp_path):
        assert main(["intervals", files["superlinear"], "--out", str(tmp_path)]) == 0
        data = json.loads((tmp_path / "intervals.json").read_text())
        assert data["interval_s"] == [0.0, "inf"]
        assert data["hypotheses"]["verdicts"]["h1"] is True
        assert data["B"] == pytest.approx(1 / 128, abs=1e-10)
        assert data["schema_version"] == 1

    def test_declared(self, files, tmp_path):
        assert main(["intervals", files["superlinear"], "--g0", "0.5", "--ginf", "inf",
                     "--out", str(tmp_path)]) == 0
        data = json.loads((tmp_path / "intervals.json").read_text())
        assert data["interval_s"][0] == 0.0
        assert data["interval_s"][1] == pytest.approx(2.0, rel=1e-12)
        assert data["components"][0]["g0"]["source"] == "declared"

    def test_nothing_holds(self, files, tmp_path):
        assert main(["intervals", files["linear"], "--out", str(tmp_path)]) == 1
        assert (tmp_path / "intervals.json").exists()

    def test_non_separable(self, files, tmp_path):
        assert main(["intervals", files["constant"], "--out", str(tmp_path)]) == 2

    def test_bad_declared_list(self, files, tmp_path):
        assert main(["intervals", files["superlinear"], "--g0", "a,b",
                     "--out", str(tmp_path)]) == 2


class TestSweep:
    FLAGS = ["--grid", "64", "--lambda-min", "0.1", "--lambda-max", "10", "--points", "3"]

    def test_columns(self, files, tmp_path):
        assert main(["sweep", files["superlinear"], *self.FLAGS, "--out", str(tmp_path)]) == 0
        rows = read_csv(tmp_path / "sweep.csv")
        assert rows[0] == ["lambda", "converged", "norm", "r_fp", "r_ode", "sigma_1"]
        assert [r[1] for r in rows[1:]] == ["true"] * 3
        assert [float(r[0]) for r in rows[1:]] == pytest.approx([0.1, 1, 10])

    def test_byte_identical(self, files, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            assert main(["sweep", files["superlinear"], *self.FLAGS, "--out", str(out)]) == 0
        assert (a / "sweep.csv").read_bytes() == (b / "sweep.csv").read_bytes()

    def test_default_range_is_capped(self, files, tmp_path):
        assert main(["sweep", files["superlinear"], "--grid", "64", "--points", "1",
                     "--out", str(tmp_path)]) == 0
        notes = json.loads((tmp_path / "manifest.json").read_text())["notes"]
        assert any("cap" in n for n in notes) and any("floor" in n for n in notes)

    def test_bad_points(self, files, tmp_path):
        assert main(["sweep", files["superlinear"], "--points", "0",
                     "--out", str(tmp_path)]) == 2


class TestRadial:
    def test_outputs_and_round_trip(self, files, tmp_path, capsys):
        assert main(["radial", files["annulus"], "--out", str(tmp_path)]) == 0
        path = tmp_path / "problem.json"
        data = json.loads(path.read_text())
        assert data["weight_q"] == "(t+1)^1" and data["h"] == ["t+1"]
        spec = load_problem(path)
        assert spec_to_dict(spec) == data
        assert main(["solve", str(path), "--grid", "128", "--out", str(tmp_path / "s")]) == 0
        assert "q(t)" in capsys.readouterr().out

    def test_invalid(self, tmp_path):
        bad = {**ANNULUS, "radial": {**ANNULUS["radial"], "R2": 0.5}}
        assert main(["radial", write(tmp_path / "bad.json", bad), "--out", str(tmp_path)]) == 2

    def test_missing_radial_object(self, files, tmp_path):
        assert main(["radial", files["constant"], "--out", str(tmp_path)]) == 2


class TestSeed:
    def test_precedence(self, monkeypatch):
        monkeypatch.delenv("CONE_BVP_SEED", raising=False)
        assert resolve_seed(None) == 42
        monkeypatch.setenv("CONE_BVP_SEED", "7")
        assert resolve_seed(None) == 7
        assert resolve_seed(3) == 3

    def test_bad_env(self, files, tmp_path, monkeypatch):
        monkeypatch.setenv("CONE_BVP_SEED", "seven")
        assert main(["intervals", files["superlinear"], "--out", str(tmp_path)]) == 2

    def test_env_recorded(self, files, tmp_path, monkeypatch):
        monkeypatch.setenv("CONE_BVP_SEED", "11")
        main(["intervals", files["superlinear"], "--out", str(tmp_path)])
        assert json.loads((tmp_path / "manifest.json").read_text())["config"]["seed"] == 11


def test_module_entry_point(files, tmp_path):
    proc = subprocess.run([sys.executable, "-m", "cone_bvp", "validate", files["constant"]],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and json.loads(proc.stdout)["passed"] is True
