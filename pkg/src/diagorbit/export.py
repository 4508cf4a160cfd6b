"""CSV and JSON writers for supports, sum series and certificates."""

from __future__ import annotations

import csv
import enum
import math
from fractions import Fraction
from pathlib import Path

import numpy as np


def jsonable(value):
    """Convert results to JSON-safe values; Fractions become ``"a/b"`` strings."""
    if isinstance(value, enum.Enum):
        return value.value
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, Fraction):
        return str(value) if value.denominator != 1 else value.numerator
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        if math.isnan(value):
            return "nan"
        return value
    if isinstance(value, np.ndarray):
        return [jsonable(v) for v in value.tolist()]
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    return value


def cell(value) -> str:
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _ratio(w):
    f = Fraction(w)
    return f.numerator, f.denominator


def write_support(path: Path, support) -> None:
    H = support.system.H
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow([f"x{i + 1}" for i in range(H)] + ["nu_weight_numerator", "nu_weight_denominator"])
        for z, w in zip(support.points, support.weights):
            out.writerow([cell(c) for c in z] + list(_ratio(w)))


def write_sums(path: Path, series, norms=None) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        header = ["N", "S_N", "running_sup"]
        if norms is not None:
            header.append("norm_S_N")
        out.writerow(header)
        for k, (s, sup) in enumerate(zip(series.values, series.running_sup)):
            row = [k + 1, cell(s), cell(sup)]
            if norms is not None:
                row.append(cell(norms[k]))
            out.writerow(row)


def write_certificate(path: Path, points, values, H: int, shifts=None) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        lead = ["n"] if shifts is not None else []
        out.writerow(lead + [f"x{i + 1}" for i in range(H)] + ["V"])
        for k, (z, v) in enumerate(zip(points, values)):
            row = [int(shifts[k])] if shifts is not None else []
            out.writerow(row + [cell(c) for c in z] + [cell(v)])
