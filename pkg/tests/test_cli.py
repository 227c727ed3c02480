"""
CLI tests - exit codes, scan output files and figure reproduction.
Run with:  pytest tests/test_cli.py -v
"""
import pytest
import sys
import os
import csv
import json
import math

sys.path.insert(0, os.path.dirname(os.path.dirname(__file__)))

from ospqtm import cli
from ospqtm.cli import (
    EXIT_OK, EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_VALIDATION, SCAN_COLUMNS, main, build_parser,
    config_from_args, reproduce_figure, run_scan, verify,
)
from ospqtm.config import ConfigError, build_config
from ospqtm.fusion import WindingError
from ospqtm.qtm import EigenSolverError


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def read_zeros(path):
    return [complex(float(r["re"]), float(r["im"])) for r in read_rows(path)]


def nearest_curve_counts(zeros, m, tol=1e-6):
    """Zeros off both axes, split by the nearer of |Im v| = (m+1)/2 and m/2 + 1."""
    upper, lower = 0.5 * (m + 1), 0.5 * m + 1
    zeros = [z for z in zeros if abs(z.real) > tol and abs(z.imag) > tol]
    near_upper = sum(1 for z in zeros if abs(abs(z.imag) - upper) < abs(abs(z.imag) - lower))
    near_lower = sum(1 for z in zeros if abs(abs(z.imag) - lower) < abs(abs(z.imag) - upper))
    return near_upper, near_lower


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

class TestMain:
    def test_version(self, capsys):
        assert main(["--version"]) == EXIT_OK
        assert capsys.readouterr().out.startswith("ospqtm ")

    def test_no_command(self, capsys):
        assert main([]) == EXIT_CONFIG
        assert "usage" in capsys.readouterr().out

    def test_decreasing_betas(self, tmp_path, capsys):
        code = main(["tba", "--beta", "1", "0.5", "--out", str(tmp_path)])
        assert code == EXIT_CONFIG
        assert "configuration error" in capsys.readouterr().err

    def test_bad_grid(self, tmp_path):
        assert main(["tba", "--beta", "1", "--grid-h", "0.2", "--out", str(tmp_path)]) == EXIT_CONFIG

    def test_missing_config_file(self, tmp_path):
        assert main(["scan", "--config", str(tmp_path / "none.toml")]) == EXIT_CONFIG

    def test_invalid_config_file(self, tmp_path):
        path = tmp_path / "run.toml"
        path.write_text("[model]\ntrotter = [5]\n")
        assert main(["scan", "--config", str(path), "--out", str(tmp_path)]) == EXIT_CONFIG

    def test_unknown_figure(self):
        with pytest.raises(SystemExit):
            main(["figure", "fig9"])

    @pytest.mark.parametrize("error", [WindingError("winding number mismatch"),
                                       EigenSolverError("ARPACK stalled")])
    def test_solver_failures_are_convergence_errors(self, tmp_path, monkeypatch, error):
        def failing(config):
            raise error
        monkeypatch.setitem(cli.COMMANDS, "dvf-zeros", failing)
        assert main(["dvf-zeros", "--N", "4", "--out", str(tmp_path)]) == EXIT_CONVERGENCE


class TestArguments:
    def test_tol_goes_to_bae_for_solver_commands(self):
        args = build_parser().parse_args(["bae-solve", "--N", "4", "--tol", "1e-11"])
        config = config_from_args(args)
        assert config.bae_tol == 1e-11
        assert config.tba.tol == 1e-10

    def test_tol_goes_to_tba_for_scans(self):
        args = build_parser().parse_args(["tba", "--beta", "1", "--tol", "1e-8", "--m-max", "6"])
        config = config_from_args(args)
        assert config.tba.tol == 1e-8
        assert config.tba.m_max == 6

    def test_excited_flag(self):
        config = config_from_args(build_parser().parse_args(["excited", "--beta", "1"]))
        assert config.excited

    def test_figure_uses_its_own_trotter_number(self):
        assert config_from_args(build_parser().parse_args(["figure", "fig1"])).trotter == (12,)
        assert config_from_args(build_parser().parse_args(["figure", "fig5"])).trotter == (14,)

    def test_figure_keeps_explicit_trotter_number(self):
        args = build_parser().parse_args(["figure", "fig1", "--N", "4"])
        assert config_from_args(args).trotter == (4,)

    def test_flags_override_file(self, tmp_path):
        path = tmp_path / "run.toml"
        path.write_text("[model]\nbetas = [0.5, 1.0]\n[tba]\nm_max = 8\n")
        args = build_parser().parse_args(["scan", "--config", str(path), "--beta", "2"])
        config = config_from_args(args)
        assert config.betas == (2.0,)
        assert config.tba.m_max == 8


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

class TestScan:
    def test_high_temperature_scan(self, tmp_path):
        assert main(["scan", "--beta", "0.001", "--out", str(tmp_path), "-q"]) == EXIT_OK
        rows = read_rows(tmp_path / "data.csv")
        assert list(rows[0]) == SCAN_COLUMNS
        assert rows[0]["status"] == "ok"
        assert float(rows[0]["minus_beta_f"]) == pytest.approx(math.log(3), abs=1e-3)
        record = json.loads((tmp_path / "run.json").read_text())
        assert record["config"]["betas"] == [0.001]
        assert set(record["versions"]) == {"ospqtm", "numpy", "scipy"}
        largest = record["points"][0]["largest"]
        assert largest["history"]
        assert largest["history"][-1] < 1e-10
        assert largest["x"] == []

    @pytest.mark.slow
    def test_reproducible(self, tmp_path):
        config_a = build_config({}, {"betas": [0.01, 0.02], "out": tmp_path / "a"})
        config_b = build_config({}, {"betas": [0.01, 0.02], "out": tmp_path / "b"})
        run_scan(config_a)
        run_scan(config_b)
        assert (tmp_path / "a" / "data.csv").read_text() == (tmp_path / "b" / "data.csv").read_text()

    @pytest.mark.slow
    def test_excited_columns(self, tmp_path):
        report = run_scan(build_config({}, {"betas": [1.0], "excited": True, "out": tmp_path}))
        assert report.ok
        assert report.rows[0]["inv_xi"] > 0
        record = json.loads((tmp_path / "run.json").read_text())
        excited = record["points"][0]["excited"]
        assert len(excited["x"]) == 10
        assert excited["x"][0] == pytest.approx(report.rows[0]["x1"])
        assert excited["history"]


class TestQtmDiag:
    def test_eigenvalues_csv(self, tmp_path, capsys):
        code = main(["qtm-diag", "--N", "4", "--u", "0.05", "--out", str(tmp_path), "-q"])
        assert code == EXIT_OK
        rows = read_rows(tmp_path / "eigenvalues.csv")
        assert [r["k"] for r in rows] == ["1", "2"]
        assert float(rows[0]["re"]) > abs(float(rows[1]["re"]))
        assert "lambda_1" in capsys.readouterr().out


class TestFigure:
    def test_unknown_figure(self, tmp_path):
        with pytest.raises(ConfigError):
            reproduce_figure("fig7", tmp_path)

    @pytest.mark.slow
    def test_fig1(self, tmp_path):
        summary = reproduce_figure("fig1", tmp_path)
        assert summary["pattern"] == {"two-string": 6}
        assert (tmp_path / "roots.csv").exists()
        assert (tmp_path / "roots_k1.json").exists()

    @pytest.mark.slow
    def test_fig2_zeros_lie_on_two_curves(self, tmp_path):
        summary = reproduce_figure("fig2", tmp_path)
        for m in (1, 2, 3):
            zeros = read_zeros(tmp_path / f"zeros_m{m}.csv")
            assert len(zeros) == 24
            assert summary["zeros"][str(m)]["count"] == 24
            assert nearest_curve_counts(zeros, m) == (12, 12)
            assert all(abs(z.imag) > 0.5 for z in zeros)

    @pytest.mark.slow
    def test_fig4_real_and_imaginary_zeros(self, tmp_path):
        reproduce_figure("fig4", tmp_path)
        for m in (1, 2, 3):
            zeros = read_zeros(tmp_path / f"zeros_m{m}.csv")
            assert len(zeros) == 24
            real = [z for z in zeros if abs(z.imag) < 1e-6]
            assert len(real) == 2
            assert real[0].real == pytest.approx(-real[1].real, abs=1e-8)
            axis = [z for z in zeros if abs(z.real) < 1e-6 and abs(z.imag) >= 1e-6]
            assert len(axis) == 2
            assert all(abs(abs(z.imag) - (2 * m + 3) / 4) < 0.2 for z in axis)
            assert nearest_curve_counts(zeros, m) == (10, 10)

    @pytest.mark.slow
    def test_fig6_real_and_imaginary_zeros(self, tmp_path):
        summary = reproduce_figure("fig6", tmp_path, m_values=(1,))
        zeros = read_zeros(tmp_path / "zeros_m1.csv")
        assert summary["N"] == 14
        assert len(zeros) == 28
        assert sum(1 for z in zeros if abs(z.imag) < 1e-6) == 2
        assert nearest_curve_counts(zeros, 1) == (12, 12)


class TestVerify:
    @pytest.mark.slow
    def test_small_trotter(self):
        report = verify([4], m_max=2, points=8)
        assert report["failed"] == 0
        assert any(c["check"] == "qtm-oracle" for c in report["checks"])
        kinds = {c["check"] for c in report["checks"]}
        assert {"tba-qtm", "tba-ed"} <= kinds

    def test_trotter_above_oracle_limit_skips_eigenvalues(self, monkeypatch):
        monkeypatch.setattr(cli, "ORACLE_MAX_TROTTER", 2)
        report = verify([4], m_max=1, points=4, J=1.0)
        assert report["failed"] == 0
        assert {c["check"] for c in report["checks"]} == {"T-system", "Y-system"}

    def test_oracle_mismatch_exits_with_validation_code(self, tmp_path, monkeypatch):
        failing = {"N": 0, "k": 1, "m": 1, "check": "tba-ed", "value": 3.0, "ok": False}
        monkeypatch.setattr(cli, "verify", lambda *args, **kwargs: {"checks": [failing], "failed": 1})
        assert main(["verify", "--N", "4", "--out", str(tmp_path), "-q"]) == EXIT_VALIDATION
        report = json.loads((tmp_path / "verify.json").read_text())
        assert report["failed"] == 1
