import json

import numpy as np
import pytest

from qthermo import cli
from qthermo.qcore import random_density

EXTRACTION = """
experiment = "extraction-scan"
[system]
energies = [0.0, 1.0]
state = "diag:0.9,0.1"
[scan]
N = [100, 200, 400, 800]
"""


def write(tmp_path, text, name="cfg.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def run(tmp_path, text, *extra, out="out"):
    cfg = write(tmp_path, text)
    code = cli.main(["run", str(cfg), "--out", str(tmp_path / out), *extra])
    return code, tmp_path / out


def read_csv(path):
    lines = path.read_text().splitlines()
    header = lines[0].split(",")
    rows = [line.split(",") for line in lines[1:]]
    return header, rows


class TestExtractionScan:
    def test_rows_and_summary(self, tmp_path):
        code, out = run(tmp_path, EXTRACTION)
        assert code == 0
        header, rows = read_csv(out / "results.csv")
        assert header[:5] == ["N", "W", "free_energy_change", "deficit", "N_deficit"]
        assert [int(r[0]) for r in rows] == [100, 200, 400, 800]
        nd = [float(r[4]) for r in rows]
        assert max(nd) / min(nd) < 2
        # 17 significant digits
        assert len(rows[0][1].split("e")[0].replace(".", "").lstrip("-")) == 17
        summary = json.loads((out / "summary.json").read_text())
        assert summary["first_law_residual"] <= 1e-10
        assert summary["checks"]["first_law"]["passed"]
        assert summary["all_passed"]

    def test_byte_identical_rerun(self, tmp_path, monkeypatch):
        text = EXTRACTION.replace('"diag:0.9,0.1"', '"random"').replace("[100, 200, 400, 800]", "[20, 40, 80]")
        run(tmp_path, text, "--seed", "5", out="a")
        monkeypatch.setenv("QTHERMO_THREADS", "4")
        run(tmp_path, text, "--seed", "5", out="b")
        for f in ("results.csv", "summary.json"):
            assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
        run(tmp_path, text, "--seed", "6", out="c")
        assert (tmp_path / "a" / "results.csv").read_bytes() != (tmp_path / "c" / "results.csv").read_bytes()
        assert json.loads((tmp_path / "a" / "summary.json").read_text())["seed"] == 5

    def test_exact_mode_flag(self, tmp_path):
        text = EXTRACTION.replace("[100, 200, 400, 800]", "[4, 6]")
        code, out = run(tmp_path, text, "--mode", "exact")
        assert code == 0
        assert json.loads((out / "summary.json").read_text())["mode"] == "exact"

    def test_matrix_file(self, tmp_path):
        rho = random_density(3, np.random.default_rng(0))
        cli.write_matrix_csv(tmp_path / "rho.csv", rho)
        assert (tmp_path / "rho.csv").read_text().splitlines()[0] == "re,im,re,im,re,im"
        np.testing.assert_allclose(cli.read_matrix_csv(tmp_path / "rho.csv"), rho, atol=0)
        text = """
experiment = "extraction-scan"
[system]
energies = [0.0, 0.5, 1.0]
matrix_file = "rho.csv"
[scan]
N = [10]
"""
        code, out = run(tmp_path, text)
        assert code == 0

    def test_config_out_path(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        cfg = write(tmp_path, 'out = "here"\n' + EXTRACTION)
        assert cli.main(["run", str(cfg)]) == 0
        assert (tmp_path / "here" / "results.csv").exists()


class TestOtherExperiments:
    def test_carnot(self, tmp_path):
        text = """
experiment = "carnot"
[bath]
hot = 2.0
cold = 1.0
[scan]
N = [100, 1000, 10000]
"""
        code, out = run(tmp_path, text)
        assert code == 0
        _, rows = read_csv(out / "results.csv")
        eff = [float(r[4]) for r in rows]
        assert eff[0] < eff[1] < eff[2] < 0.5
        assert abs(eff[2] - 0.5) < 1e-3
        summary = json.loads((out / "summary.json").read_text())
        assert summary["results"]["efficiency"] == pytest.approx(eff[2])

    def test_width_scan(self, tmp_path):
        text = """
experiment = "width-scan"
[system]
state = "plus"
[scan]
N = [6]
[weight]
widths = [0.05, 0.5, 5.0]
"""
        code, out = run(tmp_path, text)
        assert code == 0
        _, rows = read_csv(out / "results.csv")
        ds = [float(r[2]) for r in rows]
        assert ds[0] > ds[1] > ds[2]

    def test_strict_deficit(self, tmp_path):
        text = """
experiment = "strict-deficit"
[system]
state = "plus"
[scan]
N = [2000]
"""
        code, out = run(tmp_path, text)
        assert code == 0
        _, rows = read_csv(out / "results.csv")
        assert float(rows[0][1]) == pytest.approx(np.log(2), abs=1e-12)

    def test_spin_demo(self, tmp_path):
        text = """
experiment = "spin-demo"
[scan]
N = [1000]
[spin]
n_grid = 256
dx = 0.1
"""
        code, out = run(tmp_path, text)
        assert code == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["checks"]["energy_conservation"]["value"] < 1e-6

    def test_audit_suite_and_check(self, tmp_path):
        assert cli.main(["check", "--out", str(tmp_path / "chk")]) == 0
        summary = json.loads((tmp_path / "chk" / "summary.json").read_text())
        assert summary["experiment"] == "audit-suite"
        assert all(c["passed"] for c in summary["checks"].values())
        assert "first_law_residual" in summary


class TestErrors:
    def test_unknown_experiment(self, tmp_path, capsys):
        code, _ = run(tmp_path, 'experiment = "bogus"\n')
        assert code == 2
        err = capsys.readouterr().err
        assert "usage" in err and "bogus" in err

    def test_missing_config(self, tmp_path):
        assert cli.main(["run", str(tmp_path / "nope.toml")]) == 2

    def test_missing_matrix_file(self, tmp_path):
        text = EXTRACTION.replace('state = "diag:0.9,0.1"', 'matrix_file = "missing.csv"')
        assert run(tmp_path, text)[0] == 2

    def test_empty_N(self, tmp_path):
        assert run(tmp_path, EXTRACTION.replace("[100, 200, 400, 800]", "[]"))[0] == 2

    def test_dimension_mismatch(self, tmp_path):
        assert run(tmp_path, EXTRACTION.replace("[system]", "[system]\ndimension = 3"))[0] == 2

    def test_bad_state(self, tmp_path):
        assert run(tmp_path, EXTRACTION.replace("diag:0.9,0.1", "diag:0.9,0.3"))[0] == 2

    def test_bad_toml(self, tmp_path):
        assert run(tmp_path, "experiment = \n")[0] == 2

    def test_no_subcommand(self):
        assert cli.main([]) == 2

    def test_infeasible_protocol_names_step(self, tmp_path, capsys):
        text = """
experiment = "extraction-scan"
[system]
energies = [0.0, 0.5, 1.0]
state = "diag:0.5,0.3,0.2"
[scan]
N = [1]
"""
        assert run(tmp_path, text)[0] == 3
        assert "InfeasiblePlan" in capsys.readouterr().err

    def test_branch_overflow(self, tmp_path, capsys):
        text = EXTRACTION.replace("[100, 200, 400, 800]", "[40]")
        assert run(tmp_path, text, "--mode", "exact")[0] == 3
        assert "BranchOverflow" in capsys.readouterr().err
