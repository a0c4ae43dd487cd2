"""Convergence reports shared by the exponent, form and simulation checks."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

SCHEMA_VERSION = 1


def format_float(x) -> str:
    """Round-trip text for CSV cells; integers and strings pass through."""
    if x is None:
        return ""
    if isinstance(x, np.generic):
        x = x.item()
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        return "%.17g" % x
    return str(x)


def strictly_decreasing(values: Sequence[float]) -> bool:
    return all(b < a for a, b in zip(values[:-1], values[1:]))


def non_increasing_tail(errors: Sequence[float], steps: int, floor: float) -> bool:
    """True when the last ``steps`` changes never increase by more than ``floor``."""
    tail = list(errors)[-(steps + 1):]
    return all(b <= a + floor for a, b in zip(tail[:-1], tail[1:]))


@dataclass
class ConvergenceReport:
    """Rows of (scale, measured, limit, error) with a pass/fail verdict."""

    check: str
    columns: tuple
    rows: list = field(default_factory=list)
    tolerance: float = math.nan
    passed: bool = False
    monotone_deltas: bool = True
    final_error: float = math.nan
    notes: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([format_float(r.get(c)) for c in self.columns])
        return buf.getvalue()

    def summary(self) -> dict:
        return {"check": self.check, "passed": bool(self.passed),
                "final_error": None if math.isnan(self.final_error) else self.final_error,
                "tolerance": None if math.isnan(self.tolerance) else self.tolerance,
                "monotone_deltas": self.monotone_deltas, "rows": len(self.rows), **self.notes}
