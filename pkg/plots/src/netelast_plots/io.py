"""CSV intake with schema checks.

The harness guarantees a header row, comma separation and %.12g
numbers; everything here validates against that contract and fails
loudly on drift, naming the offending column.
"""

from __future__ import annotations

from pathlib import Path

from . import PlotDataError


def read_table(path, required: tuple[str, ...]) -> list[dict[str, str]]:
    """Parse a harness CSV into row dicts, checking required columns."""
    text = Path(path).read_text()
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines:
        raise PlotDataError(f"{path}: file is empty")
    header = lines[0].split(",")
    missing = [c for c in required if c not in header]
    if missing:
        raise PlotDataError(f"{path}: missing column {missing[0]!r}")
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        if len(cells) != len(header):
            raise PlotDataError(
                f"{path}: line {lineno} has {len(cells)} cells, header has {len(header)}"
            )
        rows.append(dict(zip(header, cells)))
    if not rows:
        raise PlotDataError(f"{path}: no data rows")
    return rows


def column(rows: list[dict], name: str) -> list[float]:
    """Extract one numeric column."""
    try:
        return [float(row[name]) for row in rows]
    except ValueError as exc:
        raise PlotDataError(f"column {name!r} holds a non-numeric cell") from exc
