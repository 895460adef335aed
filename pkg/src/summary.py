"""
Projection Postulate Engine

Plain-text summary table printed after every CLI run.

A report is the dict the CLI writes with --output. The summary shows the
tolerance checks first, then an optional result table and commentary:

    report["checks"]  = [{"name", "value", "bound", "relation", "passed"}, ...]
    report["table"]   = {"columns": [...], "rows": [[...], ...]}
    report["notes"]   = ["...", ...]
"""

import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

logger = logging.getLogger(__name__)

RULE = "=" * 80
MAX_TABLE_ROWS = 40


def _fmt(value: Any) -> str:
    if isinstance(value, float):
        if value == 0.0 or 1e-4 <= abs(value) < 1e6:
            return repr(round(value, 12))
        return f"{value:.3e}"
    return str(value)


def format_table(columns: Sequence[str], rows: Sequence[Sequence[Any]]) -> List[str]:
    cells = [[_fmt(v) for v in row] for row in rows]
    widths = [max([len(c)] + [len(r[k]) for r in cells]) for k, c in enumerate(columns)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(columns, widths)),
             "  ".join("-" * w for w in widths)]
    lines.extend("  ".join(v.ljust(w) for v, w in zip(r, widths)) for r in cells)
    return lines


def check_lines(checks: Sequence[Dict[str, Any]]) -> List[str]:
    rows = []
    for check in checks:
        status = "PASS" if check["passed"] else "FAIL"
        if check.get("relation") == "info":
            status = "INFO"
        rows.append([check["name"], check["value"], f"{check.get('relation', '<=')} {_fmt(check['bound'])}"
                     if check.get("bound") is not None else "-", status])
    return format_table(["check", "value", "bound", "status"], rows)


def summary_lines(report: Dict[str, Any]) -> List[str]:
    command = report.get("command", "run")
    lines = [RULE, f" {command} Summary", RULE]
    lines.append(f"Seed: {report.get('seed')}")
    for key, value in sorted(report.get("config", {}).items()):
        lines.append(f"{key}: {value}")
    lines.append(RULE)

    checks = report.get("checks", [])
    if checks:
        lines.extend(check_lines(checks))
        lines.append(RULE)

    table = report.get("table")
    if table and table.get("rows"):
        rows = table["rows"]
        lines.extend(format_table(table["columns"], rows[:MAX_TABLE_ROWS]))
        if len(rows) > MAX_TABLE_ROWS:
            lines.append(f"... {len(rows) - MAX_TABLE_ROWS} more rows in the report")
        lines.append(RULE)

    for note in report.get("notes", []):
        lines.append(note)
    if report.get("notes"):
        lines.append(RULE)

    lines.append("Result: " + ("PASS" if report.get("passed", False) else "FAIL"))
    return lines


def generate_run_summary(report: Dict[str, Any], summary_file: Optional[Path] = None) -> List[str]:
    """Print the summary table and optionally save it next to the report."""
    lines = summary_lines(report)
    print("\n".join(lines))
    if summary_file is not None:
        try:
            Path(summary_file).write_text("\n".join(lines) + "\n")
            logger.info(f"Run summary saved to: {summary_file}")
        except OSError as e:
            logger.warning(f"Failed to save summary to file: {e}")
    return lines
