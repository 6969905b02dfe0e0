"""Human-readable tables and machine-readable JSON Lines reports."""

import json
from pathlib import Path

from .amplifier import AmplificationResult
from .composition import display_name
from .errors import DataError

AMPLIFY_COLUMNS = ("name", "validation_score", "test_score", "depth", "stage", "tokens", "time")
MAS_COLUMNS = ("kind", "NUM", "rounds", "score", "all_tokens", "sim_time_ms")


def amplification_rows(result: AmplificationResult, test_scores: dict | None = None) -> list[dict]:
    """One row per validated candidate, in creation order."""
    rows = []
    for entry in sorted(result.library, key=lambda e: e.created_step):
        name = display_name(entry.tree)
        row = {
            "name": name,
            "validation_score": entry.score,
            "depth": entry.depth,
            "stage": entry.stage,
            "tokens": entry.ledger.all_tokens,
            "time": entry.ledger.sim_time_ms,
        }
        if test_scores and name in test_scores:
            row["test_score"] = test_scores[name]
        rows.append(row)
    return rows


def render_table(rows: list[dict], columns) -> str:
    """Fixed-width text table; floats shown to 4 places."""
    def fmt(value):
        if isinstance(value, float):
            return f"{value:.4f}"
        return "" if value is None else str(value)

    header = list(columns)
    body = [[fmt(row.get(col)) for col in header] for row in rows]
    widths = [
        max(len(col), *(len(line[i]) for line in body)) if body else len(col)
        for i, col in enumerate(header)
    ]
    lines = [
        "  ".join(col.ljust(width) for col, width in zip(header, widths)),
        "  ".join("-" * width for width in widths),
    ]
    for line in body:
        lines.append("  ".join(cell.ljust(width) for cell, width in zip(line, widths)))
    return "\n".join(lines)


def write_rows(rows: list[dict], path) -> None:
    text = "".join(json.dumps(row, sort_keys=True) + "\n" for row in rows)
    Path(path).write_text(text, encoding="utf-8")


def read_rows(path) -> list[dict]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"report file not found: {path}")
    rows = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rows.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: line {lineno}: {exc}") from exc
    return rows


def run_report(rows: list[dict], columns, out_path=None) -> str:
    """Render the table; optionally persist the machine-readable file."""
    table = render_table(rows, columns)
    if out_path is not None:
        write_rows(rows, out_path)
    return table
