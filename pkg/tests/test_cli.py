import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from picardbvp.cli import (
    EXIT_BRACKET,
    EXIT_DIVERGED,
    EXIT_MAX_ITERATIONS,
    EXIT_OK,
    EXIT_PARSE,
    EXIT_TOLERANCE,
    gate_rows,
    main,
)

from .conftest import EXAMPLES


def run(tmp_path, *args, name="out"):
    out = tmp_path / name
    status = main([*args, "--out", str(out)])
    return status, out


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_solve_pi8_trace(tmp_path):
    status, out = run(tmp_path, "solve", "--problem", str(EXAMPLES / "ex41_pi8.json"), "--iters", "5")
    assert status == EXIT_MAX_ITERATIONS
    trace = rows(out / "gamma_trace.csv")
    assert list(trace[0]) == ["k", "value", "delta", "error"]
    errors = [float(r["error"]) for r in trace]
    np.testing.assert_allclose(errors, [0.02294, 0.00293, 0.00041, 0.00004, 0.00001], atol=1e-4)
    report = json.loads((out / "report.json").read_text())
    assert {"converged", "iterations", "unknown_trace", "right_residuals", "sup_deltas"} <= set(report)
    assert report["iterations"] == 5 and report["converged"] is False
    sol = rows(out / "solution.csv")
    assert len(sol) == 201 and float(sol[0]["y"]) == 1.0


def test_solve_straight_line(tmp_path):
    status, out = run(tmp_path, "solve", "--problem", str(EXAMPLES / "linear.json"))
    assert status == EXIT_OK
    report = json.loads((out / "report.json").read_text())
    # iterate 1 is already exact; iterate 2 confirms it
    assert report["iterations"] == 2
    sol = rows(out / "solution.csv")
    assert all(abs(float(r["y"]) - (1 + 2 * float(r["t"]))) < 1e-14 for r in sol)


def test_solve_ex43_eight_iterates(tmp_path):
    status, out = run(tmp_path, "solve", "--problem", str(EXAMPLES / "ex43.json"), "--iters", "8")
    assert status == EXIT_MAX_ITERATIONS
    values = [float(r["value"]) for r in rows(out / "gamma_trace.csv")]
    expected = [-0.24594, 0.16011, 0.19297, 0.04165, -0.04272, -0.04012, -0.00923, 0.01030]
    np.testing.assert_allclose(values, expected, atol=1e-4)


def test_outputs_are_byte_identical(tmp_path):
    args = ["solve", "--problem", str(EXAMPLES / "ex42.json"), "--iters", "6"]
    _, a = run(tmp_path, *args, name="a")
    _, b = run(tmp_path, *args, name="b")
    for name in ["gamma_trace.csv", "solution.csv", "report.json"]:
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_format_selection(tmp_path):
    _, out = run(tmp_path, "solve", "--problem", str(EXAMPLES / "linear.json"), "--format", "json")
    assert sorted(p.name for p in out.iterdir()) == ["report.json"]


def test_plot_writes_figures(tmp_path):
    _, out = run(tmp_path, "solve", "--problem", str(EXAMPLES / "ex41_pi8.json"), "--plot")
    assert (out / "solution.png").stat().st_size > 0
    assert (out / "convergence.png").stat().st_size > 0


def test_parse_error_exit(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"interval": [0, 1],\n "equation": {"expr": "2 y"},\n'
                   ' "boundary": {"left": {"kind": "value", "value": 0}, "right": {"kind": "value", "value": 1}}}')
    status, _ = run(tmp_path, "solve", "--problem", str(bad))
    assert status == EXIT_PARSE
    err = capsys.readouterr().err
    assert "line 2" in err and "column" in err


def test_missing_problem_file(tmp_path):
    status, _ = run(tmp_path, "solve", "--problem", str(tmp_path / "nope.json"))
    assert status == EXIT_PARSE


def test_divergence_exit(tmp_path):
    doc = {
        "interval": [0, 3],
        "equation": {"expr": "y^3 + u^2"},
        "boundary": {"left": {"kind": "value", "value": 1}, "right": {"kind": "value", "value": 50}},
    }
    path = tmp_path / "blow.json"
    path.write_text(json.dumps(doc))
    status, _ = run(tmp_path, "solve", "--problem", str(path), "--iters", "50")
    assert status == EXIT_DIVERGED


def test_solve_multi_outputs(tmp_path):
    status, out = run(tmp_path, "solve-multi", "--problem", str(EXAMPLES / "ex41_pi4.json"), "--segments", "2")
    assert status == EXIT_OK
    cont = rows(out / "continuity.csv")
    assert list(cont[0]) == ["node", "t", "value_jump", "slope_jump"]
    assert all(float(r["value_jump"]) < 1e-6 and float(r["slope_jump"]) < 1e-6 for r in cont)
    segs = rows(out / "segments.csv")
    assert {r["segment"] for r in segs} == {"1", "2"}


def test_solve_multi_straight_line(tmp_path):
    status, out = run(tmp_path, "solve-multi", "--problem", str(EXAMPLES / "linear.json"), "--segments", "4")
    assert status == EXIT_OK
    assert all(float(r["value_jump"]) == 0.0 for r in rows(out / "continuity.csv"))


def test_solve_multi_rejects_one_segment(tmp_path, capsys):
    with pytest.raises(SystemExit) as info:
        run(tmp_path, "solve-multi", "--problem", str(EXAMPLES / "ex41_pi8.json"), "--segments", "1")
    assert info.value.code == 2
    assert "use 'solve'" in capsys.readouterr().err


def test_gates_table(tmp_path, capsys):
    status, out = run(tmp_path, "gates", "--problem", str(EXAMPLES / "ex41_pi8.json"), "--lipschitz", "1")
    assert status == EXIT_OK
    table = rows(out / "gates.csv")
    assert table[0]["n"] == "1" and table[0]["passed"] == "true"
    assert len(table) == 8
    assert "smallest passing n: 1" in capsys.readouterr().out
    _, out = run(tmp_path, "gates", "--problem", str(EXAMPLES / "ex41_pi4.json"), "--lipschitz", "1", name="b")
    assert rows(out / "gates.csv")[0]["passed"] == "false"


def test_gate_rows_unit_interval():
    r = gate_rows(1.0, 0.0, 1.0, 3)
    assert r[1]["threshold"] == pytest.approx(10 / 13)
    assert r[0]["threshold"] is None


def test_gates_box_estimate(tmp_path, capsys):
    status, _ = run(tmp_path, "gates", "--problem", str(EXAMPLES / "ex42.json"), "--box=-17,17,-9,9")
    assert status == EXIT_OK
    assert "L = 6.5" in capsys.readouterr().out


def test_gates_needs_lipschitz_or_box(tmp_path):
    with pytest.raises(SystemExit) as info:
        run(tmp_path, "gates", "--problem", str(EXAMPLES / "ex41_pi8.json"))
    assert info.value.code == 2


def test_compare_oracle_pi8(tmp_path):
    status, out = run(tmp_path, "compare-oracle", "--problem", str(EXAMPLES / "ex41_pi8.json"), "--iters", "10")
    assert status == EXIT_OK
    report = json.loads((out / "report.json").read_text())
    assert report["max_diff"] < 1e-5
    table = rows(out / "compare.csv")
    assert list(table[0]) == ["t", "y_picard", "y_oracle", "abs_diff"]


def test_compare_oracle_ex42_eight_iterations(tmp_path):
    status, out = run(tmp_path, "compare-oracle", "--problem", str(EXAMPLES / "ex42.json"), "--iters", "8")
    assert status == EXIT_TOLERANCE
    report = json.loads((out / "report.json").read_text())
    assert report["max_diff"] == pytest.approx(0.024, abs=3e-3)


def test_compare_oracle_straight_line(tmp_path):
    status, out = run(tmp_path, "compare-oracle", "--problem", str(EXAMPLES / "linear.json"), "--tol", "1e-12")
    assert status == EXIT_OK
    assert json.loads((out / "report.json").read_text())["max_diff"] < 1e-12


def test_compare_oracle_bad_bracket(tmp_path):
    status, _ = run(tmp_path, "compare-oracle", "--problem", str(EXAMPLES / "ex43.json"), "--bracket", "3,4")
    assert status == EXIT_BRACKET


def test_compare_oracle_finds_bracket(tmp_path):
    # pendulum.json has a bracket; drop it to exercise the search
    doc = json.loads((EXAMPLES / "pendulum.json").read_text())
    del doc["bracket"]
    path = tmp_path / "p.json"
    path.write_text(json.dumps(doc))
    status, _ = run(tmp_path, "compare-oracle", "--problem", str(path))
    assert status == EXIT_OK


def test_console_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "picardbvp.cli", "solve", "--problem", str(EXAMPLES / "linear.json"),
         "--out", str(tmp_path / "o")],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    assert "converged=True" in proc.stdout
