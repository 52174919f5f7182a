import io
import json
import shutil
import subprocess
import sys
from pathlib import Path

import pytest

from mixrisk.cli import (EXIT_INVALID, EXIT_MC_DISAGREE, EXIT_NUMERIC, EXIT_OK, EXIT_TABLE, RunConfig,
                         build_parser, config_from_args, run)
from mixrisk.var import CONVENTION

SAMPLES = Path(__file__).resolve().parents[1] / "samples"
STUDENT = SAMPLES / "two_asset_student.json"


def invoke(argv):
    cfg = config_from_args(build_parser().parse_args(argv))
    out, err = io.StringIO(), io.StringIO()
    code = run(cfg, out, err)
    return code, out.getvalue(), err.getvalue()


def test_var_smoke():
    code, out, _ = invoke(["var", "--input", str(STUDENT), "--alpha", "0.01"])
    assert code == EXIT_OK
    report = json.loads(out)["reports"][0]
    assert report["var"] > 0
    assert report["convention"] == CONVENTION


def test_var_incremental_sums_to_var():
    _, out, _ = invoke(["var", "-i", str(STUDENT), "--incremental"])
    report = json.loads(out)["reports"][0]
    assert sum(report["incremental"]) == pytest.approx(report["var"], abs=1e-9)


def test_es_multiple_alphas_and_literal():
    code, out, _ = invoke(["es", "-i", str(STUDENT), "-a", "0.05", "-a", "0.01"])
    reports = json.loads(out)["reports"]
    assert code == EXIT_OK and [r["alpha"] for r in reports] == [0.05, 0.01]
    assert all(r["es"] > r["var"] for r in reports)
    _, lit, _ = invoke(["es", "-i", str(STUDENT), "-a", "0.05", "--literal-es"])
    assert json.loads(lit)["reports"][0]["es_multiplier"] == pytest.approx(2 * reports[0]["es_multiplier"])


def test_output_is_byte_identical():
    first = invoke(["es", "-i", str(SAMPLES / "distinct_components.json"), "-a", "0.01"])
    second = invoke(["es", "-i", str(SAMPLES / "distinct_components.json"), "-a", "0.01"])
    assert first == second


def test_csv_output():
    code, out, _ = invoke(["var", "-i", str(STUDENT), "-a", "0.05", "-a", "0.01", "-f", "csv"])
    lines = out.strip().splitlines()
    assert code == EXIT_OK and len(lines) == 3
    assert lines[0].split(",")[:2] == ["alpha", "convention"]


def test_quantile_from_mix():
    code, out, _ = invoke(["quantile", "--mix", "0.1:t2,0.9:t3", "-a", "0.01"])
    assert code == EXIT_OK
    assert json.loads(out)["reports"][0]["q_alpha"] == pytest.approx(4.7586, abs=1e-3)


def test_tables_pass():
    code, out, _ = invoke(["tables", "--alpha", "0.01"])
    assert code == EXIT_OK
    assert "result: PASS" in out


def test_tables_es_report(tmp_path):
    target = tmp_path / "report.md"
    code, _, _ = invoke(["tables", "-a", "0.001", "--es", "--es-report", str(target)])
    assert code == EXIT_OK
    assert target.read_text().startswith("# Expected Shortfall constant")


def test_tables_unknown_alpha():
    code, _, err = invoke(["tables", "--alpha", "0.02"])
    assert code == EXIT_INVALID and "alpha" in err


def test_table_mismatch_exit_code(monkeypatch):
    from mixrisk import tables
    spec = tables.QUANTILE_TABLES[0.01]
    bad = tables.TableSpec(spec.name, spec.alpha, spec.quantity, spec.nu_pairs[:1], spec.betas[:1], ((9.0,),))
    monkeypatch.setitem(tables.QUANTILE_TABLES, 0.01, bad)
    code, out, _ = invoke(["tables", "--alpha", "0.01"])
    assert code == EXIT_TABLE and "FAIL" in out


def test_mc_check_small():
    code, out, _ = invoke(["mc-check", "-i", str(STUDENT), "--draws", "200000", "--seed", "42", "-a", "0.05"])
    payload = json.loads(out)
    assert code in (EXIT_OK, EXIT_MC_DISAGREE)
    row = payload["reports"][0]
    assert row["pass"] == (abs(row["var_z"]) <= 3 and abs(row["es_z"]) <= 3)
    assert (code == EXIT_OK) == row["pass"]


@pytest.mark.parametrize("argv, fragment", [
    (["mc-check", "-i", str(STUDENT), "--draws", "999"], "--draws"),
    (["var", "-i", str(STUDENT), "--alpha", "0.6"], "--alpha"),
    (["var", "-i", "/nonexistent/model.json"], "No such file"),
])
def test_invalid_config(argv, fragment):
    code, _, err = invoke(argv)
    assert code == EXIT_INVALID and fragment in err


def test_validation_errors_name_fields(tmp_path):
    data = json.loads(STUDENT.read_text())
    data["components"][0]["weight"] = 0.6
    data["components"][1]["scale"] = [[1.0, 2.0], [2.0, 1.0]]
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(data))
    code, _, err = invoke(["var", "-i", str(path)])
    assert code == EXIT_INVALID
    assert "weights sum" in err and "components[1].scale" in err


def test_convergence_exit_code(monkeypatch):
    from mixrisk import cli
    from mixrisk.errors import ConvergenceError

    def boom(*args, **kwargs):
        raise ConvergenceError("quadrature did not converge")

    monkeypatch.setattr(cli, "solve_quantile", boom)
    code, _, err = invoke(["quantile", "--mix", "1:normal"])
    assert code == EXIT_NUMERIC and "converge" in err


def test_aggregate():
    code, out, _ = invoke(["aggregate", "--r1", "3", "--r2", "4", "--phi", "1"])
    assert json.loads(out)["reports"][0]["aggregate"] == pytest.approx(7.0)
    code, _, err = invoke(["aggregate", "--r1", "3", "--r2", "4", "--phi", "1.5"])
    assert code == EXIT_INVALID
    code, out, _ = invoke(["aggregate", "--kind", "es", "--r1", "3", "--r2", "4", "--k", "2", "--cross", "0"])
    assert json.loads(out)["reports"][0]["aggregate"] == pytest.approx(5.0)


def test_run_config_problems():
    assert RunConfig("var").problems() == ["--input: required for this command"]
    assert RunConfig("tables", alphas=[0.01]).problems() == []


def test_module_entry_point():
    result = subprocess.run([sys.executable, "-m", "mixrisk", "quantile", "--mix", "1:normal", "-a", "0.05"],
                            capture_output=True, text=True, check=False)
    assert result.returncode == 0
    assert json.loads(result.stdout)["reports"][0]["q_alpha"] == pytest.approx(1.6448536269514722)


@pytest.mark.skipif(shutil.which("mixrisk") is None, reason="console script not installed")
def test_console_script():
    result = subprocess.run(["mixrisk", "var", "-i", str(STUDENT)], capture_output=True, text=True)
    assert result.returncode == 0
