"""Batch ingestion: CSV files of weighted records.

Column layout is fixed by the element kind. Scalar: ``x,weight``; complex:
``re,im,weight``; vector of dimension d: ``x0,...,x{d-1},weight``. Every
field must parse as a finite decimal.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

from .accumulator import Batch
from .elements import Kind
from .errors import BatchFormatError, EmptyBatch


def expected_header(kind: Kind, dim: int | None) -> list[str]:
    if kind is Kind.SCALAR:
        return ["x", "weight"]
    if kind is Kind.COMPLEX:
        return ["re", "im", "weight"]
    return [f"x{i}" for i in range(dim)] + ["weight"]


def _parse_field(text: str, where: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise BatchFormatError(f"{where}: {text!r} is not a decimal number") from None
    if not math.isfinite(v):
        raise BatchFormatError(f"{where}: {text!r} is not finite")
    return v


def read_batch_csv(path: str | Path, kind: Kind, dim: int | None = None) -> Batch:
    path = Path(path)
    header = expected_header(kind, dim)
    try:
        fh = path.open(newline="", encoding="utf-8")
    except FileNotFoundError:
        raise BatchFormatError(f"batch file not found: {path}") from None
    with fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise EmptyBatch(f"batch file {path} is empty")
    got = [c.strip() for c in rows[0]]
    if got != header:
        raise BatchFormatError(
            f"batch file {path} has header {got}, expected {header} for kind "
            f"{kind.value}" + (f" (dim {dim})" if kind is Kind.VECTOR else "")
        )
    values = []
    weights = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise BatchFormatError(
                f"{path}:{lineno}: expected {len(header)} columns, got {len(row)}"
            )
        fields = [_parse_field(c, f"{path}:{lineno}") for c in row]
        weights.append(fields[-1])
        if kind is Kind.SCALAR:
            values.append(fields[0])
        elif kind is Kind.COMPLEX:
            values.append(complex(fields[0], fields[1]))
        else:
            values.append(fields[:-1])
    if not values:
        raise EmptyBatch(f"batch file {path} has a header but no records")
    return Batch.from_values(kind, values, weights, dim=dim)
