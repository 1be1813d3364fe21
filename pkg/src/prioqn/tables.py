"""Plain-text and CSV rendering of result tables."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

DECIMALS = 4


def fmt(value, decimals: int = DECIMALS) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, int):
        return str(value)
    return f"{value:.{decimals}f}"


@dataclass
class OutputTable:
    title: str
    headers: list[str]
    rows: list[list] = field(default_factory=list)
    decimals: int = DECIMALS

    def add_row(self, *cells):
        self.rows.append(list(cells))

    def cells(self) -> list[list[str]]:
        return [[fmt(v, self.decimals) for v in row] for row in self.rows]

    def to_text(self) -> str:
        body = self.cells()
        widths = [len(h) for h in self.headers]
        for row in body:
            for i, cell in enumerate(row):
                widths[i] = max(widths[i], len(cell))
        sep = "  "
        lines = []
        if self.title:
            lines.append(self.title)
        lines.append(sep.join(h.rjust(w) for h, w in zip(self.headers, widths)))
        lines.append(sep.join("-" * w for w in widths))
        for row in body:
            lines.append(sep.join(c.rjust(w) for c, w in zip(row, widths)))
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\r\n")
        writer.writerow(self.headers)
        writer.writerows(self.cells())
        return buf.getvalue()

    def render(self, fmt_name: str = "text") -> str:
        if fmt_name == "csv":
            return self.to_csv()
        return self.to_text()
