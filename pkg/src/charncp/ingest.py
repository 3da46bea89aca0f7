"""Reading series from delimited text files."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import IngestError
from .model import Series

__all__ = ["Transform", "IngestSpec", "ingest", "ingest_text", "export_series"]


class Transform(str, Enum):
    NONE = "none"
    DIFF = "diff"
    DIFFLOG = "difflog"


@dataclass(frozen=True)
class IngestSpec:
    """Where and how to read one column.

    ``column`` is a header name or a 0-based index. ``label_column`` names a
    column (dates, timestamps) carried through as row labels; with a header,
    a column called ``date``/``time``/``timestamp`` is picked up automatically.
    """

    path: str | Path
    column: str | int = 0
    transform: Transform = Transform.NONE
    delimiter: str = ","
    header: bool = True
    label_column: str | int | None = None


_AUTO_LABELS = ("date", "time", "timestamp", "datetime", "observation_date")


def _resolve(col: str | int, names: list[str] | None, width: int, what: str) -> int:
    if isinstance(col, int) or (isinstance(col, str) and col.lstrip("-").isdigit() and (names is None or col not in names)):
        idx = int(col)
        if not -width <= idx < width:
            raise IngestError(f"{what} index {idx} out of range for {width} columns")
        return idx % width
    if names is None:
        raise IngestError(f"{what} {col!r} given by name but the file has no header")
    try:
        return names.index(col)
    except ValueError:
        raise IngestError(f"missing {what} {col!r}; available: {', '.join(names)}") from None


def ingest_text(
    text: str,
    column: str | int = 0,
    transform: Transform | str = Transform.NONE,
    delimiter: str = ",",
    header: bool = True,
    label_column: str | int | None = None,
    name: str | None = None,
) -> Series:
    transform = Transform(transform)
    rows = [(i, r) for i, r in enumerate(csv.reader(io.StringIO(text), delimiter=delimiter), start=1) if r]
    names: list[str] | None = None
    if header:
        if not rows:
            raise IngestError("empty file")
        names = [c.strip() for c in rows[0][1]]
        rows = rows[1:]
    if not rows:
        raise IngestError("no data rows")
    width = len(names) if names is not None else len(rows[0][1])
    vcol = _resolve(column, names, width, "column")
    lcol = None
    if label_column is not None:
        lcol = _resolve(label_column, names, width, "label column")
    elif names is not None:
        lower = [c.lower() for c in names]
        for cand in _AUTO_LABELS:
            if cand in lower and lower.index(cand) != vcol:
                lcol = lower.index(cand)
                break

    values = []
    labels = []
    for lineno, row in rows:
        if vcol >= len(row):
            raise IngestError(f"row has {len(row)} fields, column {vcol} missing", lineno)
        cell = row[vcol].strip()
        try:
            v = float(cell)
        except ValueError:
            raise IngestError(f"cannot parse {cell!r} as a number", lineno) from None
        if not math.isfinite(v):
            raise IngestError(f"non-finite value {cell!r}", lineno)
        values.append(v)
        if lcol is not None:
            labels.append(row[lcol].strip() if lcol < len(row) else "")

    x = np.asarray(values)
    if transform is Transform.DIFFLOG:
        bad = np.flatnonzero(x <= 0)
        if bad.size:
            i = int(bad[0])
            raise IngestError(f"difflog needs positive values; row {i} has {x[i]!r}", rows[i][0])
        x = np.diff(np.log(x))
    elif transform is Transform.DIFF:
        x = np.diff(x)
    if transform is not Transform.NONE and labels:
        labels = labels[1:]

    label = name if name is not None else (names[vcol] if names is not None else None)
    try:
        return Series(x, label=label, row_labels=tuple(labels) if lcol is not None else None)
    except Exception as exc:
        raise IngestError(str(exc)) from exc


def ingest(spec: IngestSpec) -> Series:
    try:
        text = Path(spec.path).read_text()
    except OSError as exc:
        raise IngestError(f"cannot read {spec.path}: {exc}") from exc
    return ingest_text(text, spec.column, spec.transform, spec.delimiter, spec.header, spec.label_column)


def export_series(series: Series, delimiter: str = ",") -> str:
    """Write a series so that ``ingest_text`` reads it back unchanged."""
    buf = io.StringIO()
    writer = csv.writer(buf, delimiter=delimiter, lineterminator="\n")
    name = series.label or "value"
    if series.row_labels is not None:
        writer.writerow(["date", name])
        for lab, v in zip(series.row_labels, series.values):
            writer.writerow([lab, repr(float(v))])
    else:
        writer.writerow([name])
        for v in series.values:
            writer.writerow([repr(float(v))])
    return buf.getvalue()
