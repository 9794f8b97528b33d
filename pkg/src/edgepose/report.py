"""Benchmark report tables with exact aggregation.

Cells are stored as ``fractions.Fraction`` and the summary row is the
exact arithmetic mean of the defined cells in each column; rounding
happens once, at render time, half up. Undefined cells render as a dash
and are excluded from the mean. Markdown and CSV renderings share the
same formatting code, so their numeric content is identical.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from fractions import Fraction

UNDEFINED_CELL = "—"  # em dash


def _to_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, float, str)):
        return Fraction(value)
    raise TypeError(f"cannot store {type(value).__name__} in a report cell")


def round_half_up(value: Fraction, decimals: int) -> str:
    """Render a Fraction with fixed decimals, rounding halves away from zero.

    Pure integer arithmetic, so 0.265 -> "0.27" regardless of any binary
    float representation the value started from.
    """
    if decimals < 0:
        raise ValueError("decimals must be non-negative")
    scaled = value * Fraction(10) ** decimals
    sign = "-" if scaled < 0 else ""
    magnitude = -scaled if scaled < 0 else scaled
    units, remainder = divmod(magnitude.numerator, magnitude.denominator)
    if 2 * remainder >= magnitude.denominator:
        units += 1
    if decimals == 0:
        return f"{sign}{units}"
    digits = str(units).rjust(decimals + 1, "0")
    return f"{sign}{digits[:-decimals]}.{digits[-decimals:]}"


@dataclass
class ReportTable:
    """A keyed table with one summary row, e.g. per-object metric columns.

    ``percent`` scales cells by 100 at render time (cells then hold plain
    ratios). ``decimals`` is the rendered precision.
    """

    key_label: str
    columns: list[str]
    decimals: int = 2
    summary_label: str = "Mean"
    percent: bool = False
    rows: dict = field(default_factory=dict)  # key -> list[Fraction | None]

    def add_row(self, key, values) -> None:
        cells = [None if v is None else _to_fraction(v) for v in values]
        if len(cells) != len(self.columns):
            raise ValueError(f"expected {len(self.columns)} cells, got {len(cells)}")
        if key in self.rows:
            raise ValueError(f"duplicate row key {key!r}")
        self.rows[key] = cells

    def summary_cells(self) -> list[Fraction | None]:
        """Exact per-column mean over defined cells; None for empty columns."""
        out = []
        for j in range(len(self.columns)):
            defined = [cells[j] for cells in self.rows.values() if cells[j] is not None]
            if not defined:
                out.append(None)
            else:
                out.append(sum(defined, Fraction(0)) / len(defined))
        return out

    def format_cell(self, value: Fraction | None) -> str:
        if value is None:
            return UNDEFINED_CELL
        if self.percent:
            value = value * 100
        return round_half_up(value, self.decimals)

    def _formatted_rows(self) -> list[list[str]]:
        body = [
            [str(key)] + [self.format_cell(v) for v in cells] for key, cells in self.rows.items()
        ]
        body.append([self.summary_label] + [self.format_cell(v) for v in self.summary_cells()])
        return body

    def render_markdown(self) -> str:
        header = [self.key_label] + list(self.columns)
        lines = [
            "| " + " | ".join(header) + " |",
            "| " + " | ".join("---" for _ in header) + " |",
        ]
        for row in self._formatted_rows():
            lines.append("| " + " | ".join(row) + " |")
        return "\n".join(lines) + "\n"

    def render_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow([self.key_label] + list(self.columns))
        for row in self._formatted_rows():
            writer.writerow(row)
        return buffer.getvalue()

    def render(self, fmt: str) -> str:
        if fmt == "md":
            return self.render_markdown()
        if fmt == "csv":
            return self.render_csv()
        raise ValueError(f"unknown report format {fmt!r}")
