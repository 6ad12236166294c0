import csv
import sys

import pytest

from roughmild.cli import EXIT_FAILED, EXIT_OK, EXIT_SOLVER, EXIT_USAGE, build_parser, main
from roughmild.controlled import load_controlled


def _records(path):
    lines = [line for line in path.read_text(encoding="utf-8").splitlines() if not line.startswith("#")]
    return list(csv.DictReader(lines))


def _write_config(tmp_path, text):
    path = tmp_path / "run.ini"
    path.write_text(text, encoding="utf-8")
    return str(path)


def test_parser_requires_a_command():
    with pytest.raises(SystemExit):
        build_parser().parse_args([])


def test_verify_with_no_suites(tmp_path):
    config = _write_config(tmp_path, "[verify]\nsuites =\n")
    assert main(["verify", "--config", config, "--out", str(tmp_path / "out")]) == EXIT_OK


def test_verify_writes_suite_csv_and_html(tmp_path):
    config = _write_config(tmp_path, "[verify]\ninstances = 1\nsteps = 16\nhursts = 0.4\n")
    out = tmp_path / "out"
    html = tmp_path / "verify.html"
    code = main(["verify", "--config", config, "--suites", "chen,geometric", "--out", str(out),
                 "--html", str(html), "--reproducible"])
    assert code == EXIT_OK
    rows = _records(out / "verify_chen.csv")
    assert len(rows) == 4 and all(r["pass"] == "true" for r in rows)
    assert (out / "verify_geometric.csv").exists()
    page = html.read_text(encoding="utf-8")
    assert "chen" in page and "Generated:" not in page


def test_verify_broken_driver_file_exits_one(tmp_path):
    broken = tmp_path / "driver.txt"
    broken.write_text("not a rough path\n")
    config = _write_config(tmp_path, f"[verify]\nsuites =\ndriver_file = {broken}\n")
    assert main(["verify", "--config", config, "--out", str(tmp_path / "out")]) == EXIT_FAILED
    assert _records(tmp_path / "out" / "verify_driver_file.csv")[0]["pass"] == "false"


def test_unknown_suite_is_usage_error(tmp_path):
    assert main(["verify", "--suites", "chen,magic", "--out", str(tmp_path)]) == EXIT_USAGE


def test_bad_config_is_usage_error(tmp_path):
    config = _write_config(tmp_path, "[grid]\nsteps = many\n")
    assert main(["solve", "--config", config, "--out", str(tmp_path)]) == EXIT_USAGE


def test_unknown_preset_is_usage_error(tmp_path):
    assert main(["solve", "--preset", "wave", "--out", str(tmp_path)]) == EXIT_USAGE


def test_too_few_seeds_is_usage_error(tmp_path):
    assert main(["montecarlo", "--n-seeds", "5", "--out", str(tmp_path)]) == EXIT_USAGE


def test_xlsx_without_openpyxl_is_usage_error(tmp_path, monkeypatch):
    monkeypatch.setitem(sys.modules, "openpyxl", None)
    config = _write_config(tmp_path, "[verify]\nsuites =\n")
    code = main(["verify", "--config", config, "--out", str(tmp_path / "out"),
                 "--xlsx", str(tmp_path / "rows.xlsx")])
    assert code == EXIT_USAGE
    assert not (tmp_path / "rows.xlsx").exists()


def test_solve_writes_outputs(tmp_path):
    out = tmp_path / "out"
    code = main(["solve", "--preset", "heat_additive", "--size", "8", "--steps", "16",
                 "--seed", "2", "--out", str(out)])
    assert code == EXIT_OK
    solution, meta = load_controlled(out / "solution.txt")
    assert solution.y.values.shape == (17, 8)
    assert meta["preset"] == "heat_additive" and meta["seed"] == "2"
    summary = _records(out / "summary.csv")[0]
    assert float(summary["mild_residual"]) <= 1e-8
    assert summary["wall_time"] != ""
    windows = _records(out / "windows.csv")
    assert windows[0]["window_start"] == "0" and windows[-1]["window_end"] == "16"


def test_solve_linear_preset_reports_closed_form_error(tmp_path):
    out = tmp_path / "out"
    code = main(["solve", "--preset", "linear_scalar_geometric",
                 "--steps", "256", "--out", str(out)])
    assert code == EXIT_OK
    assert float(_records(out / "summary.csv")[0]["closed_form_relative_error"]) <= 5e-2


def test_reproducible_runs_are_byte_identical(tmp_path):
    args = ["solve", "--preset", "rode_flat", "--steps", "16", "--reproducible"]
    assert main(args + ["--out", str(tmp_path / "a")]) == EXIT_OK
    assert main(args + ["--out", str(tmp_path / "b")]) == EXIT_OK
    for name in ("solution.txt", "windows.csv", "summary.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert _records(tmp_path / "a" / "summary.csv")[0]["wall_time"] == ""


def test_solver_failure_exit_code(tmp_path):
    config = _write_config(tmp_path, "[solver]\nmax_picard_iters = 1\n")
    code = main(["solve", "--config", config, "--preset", "heat_additive", "--size", "8",
                 "--steps", "8", "--out", str(tmp_path)])
    assert code == EXIT_SOLVER


def test_montecarlo_low_power_run_succeeds(tmp_path, monkeypatch):
    monkeypatch.setenv("ROUGHMILD_THREADS", "2")
    config = _write_config(tmp_path, "[grid]\nsteps = 32\n[driver]\nspectrum = 1.0, 0.5\n")
    out = tmp_path / "out"
    code = main(["montecarlo", "--config", config, "--experiment", "ito_defect",
                 "--n-seeds", "10", "--out", str(out), "--reproducible"])
    assert code == EXIT_OK
    rows = _records(out / "ito_defect.csv")
    aggregates = [r for r in rows if r["row_kind"] == "aggregate"]
    assert len(rows) == 10 * 4 + 4
    assert all(r["low_power"] == "true" for r in aggregates)
