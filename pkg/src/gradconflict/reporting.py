"""CSV emission with a frozen float format."""

from __future__ import annotations

import csv
import math

import numpy as np


def fmt_float(x: float) -> str:
    """17 significant digits, '.' decimal separator."""
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    return format(x, ".17g")


def write_csv(out, columns, rows) -> None:
    def emit(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([v if isinstance(v, str) else fmt_float(v) for v in row])

    if hasattr(out, "write"):
        emit(out)
    else:
        with open(out, "w", newline="", encoding="utf-8") as fh:
            emit(fh)
