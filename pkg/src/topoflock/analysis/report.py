"""Tabular check reports shared by the analysis studies."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

COLUMNS = (
    "check",
    "case",
    "param",
    "lhs",
    "lower",
    "upper",
    "ratio",
    "env_lo",
    "env_hi",
    "slack",
    "margin",
    "status",
)

PASS, FAIL, WARN, INFO = "PASS", "FAIL", "WARN", "INFO"


def _cell(value) -> str:
    if isinstance(value, str):
        return value
    if value is None:
        return "nan"
    return format(float(value), ".17g")


@dataclass
class CheckReport:
    """Rows of one family of inequality checks; both sides are always recorded.

    ``hard`` reports turn any FAIL row into a failed command; soft reports
    only ever WARN.
    """

    name: str
    description: str = ""
    hard: bool = True
    rows: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    def add(self, **row) -> dict:
        unknown = set(row) - set(COLUMNS)
        if unknown:
            raise KeyError(f"unknown report columns {sorted(unknown)}")
        row.setdefault("check", self.name)
        self.rows.append(row)
        return row

    def count(self, status: str) -> int:
        return sum(1 for r in self.rows if r.get("status") == status)

    @property
    def failures(self) -> int:
        return self.count(FAIL)

    @property
    def passed(self) -> bool:
        return not self.hard or self.failures == 0

    def worst_margin(self) -> float:
        margins = [
            r["margin"]
            for r in self.rows
            if r.get("status") != INFO and r.get("margin") is not None and not math.isnan(r["margin"])
        ]
        return min(margins) if margins else float("nan")

    def csv_lines(self, header: bool = True) -> list:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        if header:
            writer.writerow(COLUMNS)
        for r in self.rows:
            writer.writerow([_cell(r.get(c, "" if c in ("case", "check", "status") else None)) for c in COLUMNS])
        return buf.getvalue().splitlines()

    def summary(self) -> str:
        kind = "hard" if self.hard else "informational"
        counts = ", ".join(f"{s}={self.count(s)}" for s in (PASS, FAIL, WARN, INFO) if self.count(s))
        lines = [f"[{self.name}] {kind}: {len(self.rows)} rows ({counts or 'empty'}); worst margin {self.worst_margin():.3e}"]
        if self.description:
            lines.append(f"  {self.description}")
        lines += [f"  note: {n}" for n in self.notes]
        return "\n".join(lines)


CoercivityReport = CheckReport


def write_reports(reports, path) -> None:
    """All reports into one CSV with a single header row (LF endings)."""
    lines = []
    for i, rep in enumerate(reports):
        lines += rep.csv_lines(header=i == 0)
    if not lines:
        lines = [",".join(COLUMNS)]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
