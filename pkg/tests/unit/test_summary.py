"""Unit tests for the plain-text run summary."""

from summary import RULE, _fmt, format_table, generate_run_summary, summary_lines


def _report(passed=True):
    return {
        "command": "teleport",
        "seed": 7,
        "config": {"postulate": "luders", "dim": 8},
        "checks": [
            {"name": "min_fidelity", "value": 1.0, "bound": 0.9999999999, "relation": ">=", "passed": passed},
            {"name": "spread", "value": 0.2, "bound": None, "relation": "info", "passed": True},
        ],
        "table": {"columns": ["outcome", "fidelity"], "rows": [[k, 1.0] for k in range(45)]},
        "notes": ["a note"],
        "passed": passed,
    }


def test_fmt():
    assert _fmt(1.0) == "1.0"
    assert _fmt(0.0) == "0.0"
    assert _fmt(0.25) == "0.25"
    assert _fmt(3e-13) == "3.000e-13"
    assert _fmt(3) == "3"


def test_format_table_aligns_columns():
    lines = format_table(["a", "long"], [[1, "x"], [22, "y"]])
    assert lines[0] == "a   long"
    assert lines[1] == "--  ----"
    assert lines[3] == "22  y   "


def test_summary_lines_sections():
    lines = summary_lines(_report())
    assert lines[0] == RULE
    assert lines[1] == " teleport Summary"
    assert "Seed: 7" in lines
    assert "postulate: luders" in lines
    assert any(line.startswith("min_fidelity") and line.rstrip().endswith("PASS") for line in lines)
    assert any(line.startswith("spread") and line.rstrip().endswith("INFO") for line in lines)
    assert "... 5 more rows in the report" in lines
    assert "a note" in lines
    assert lines[-1] == "Result: PASS"


def test_summary_reports_failure():
    lines = summary_lines(_report(passed=False))
    assert any(line.startswith("min_fidelity") and line.rstrip().endswith("FAIL") for line in lines)
    assert lines[-1] == "Result: FAIL"


def test_generate_run_summary_writes_file(tmp_path, capsys):
    path = tmp_path / "summary.txt"
    lines = generate_run_summary(_report(), summary_file=path)
    assert capsys.readouterr().out.splitlines() == lines
    assert path.read_text().splitlines() == lines
