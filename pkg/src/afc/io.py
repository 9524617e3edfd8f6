"""CSV and JSON input/output for samples, grids and results."""

from __future__ import annotations

import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from .errors import CsvFormatError
from .sampling import BivariateSample, Provenance

__all__ = [
    "SCHEMA_VERSION",
    "read_sample_csv",
    "write_sample_csv",
    "write_grid_csv",
    "dump_json",
    "write_json",
    "preprocess",
]

SCHEMA_VERSION = 1


def _fmt(v: float) -> str:
    # shortest repr that round-trips, so output is byte-stable across runs
    return repr(float(v))


def read_sample_csv(source, drop_invalid: bool = False) -> BivariateSample:
    """Read a two-column ``x,y`` CSV with a header row.

    Empty, non-numeric or non-positive values raise :class:`CsvFormatError`
    with the offending line number, unless ``drop_invalid`` is set, in which
    case empty and non-positive entries drop their row. Non-numeric text is
    always an error.
    """
    if isinstance(source, (str, Path)):
        with open(source, newline="", encoding="utf-8-sig") as fh:
            text = fh.read()
        name = str(source)
    else:
        text = source.read()
        name = getattr(source, "name", "<stream>")
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise CsvFormatError(f"{name}: line 1: empty file, expected header 'x,y'") from None
    if [h.strip().lstrip("﻿").lower() for h in header] != ["x", "y"]:
        raise CsvFormatError(f"{name}: line 1: expected header 'x,y', got {','.join(header)!r}")
    xs, ys = [], []
    dropped = 0
    for line_no, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 2:
            raise CsvFormatError(f"{name}: line {line_no}: expected 2 fields, got {len(row)}")
        vals = []
        missing = False
        for cell in row:
            cell = cell.strip()
            if cell == "" or cell.lower() in ("na", "nan"):
                missing = True
                vals.append(math.nan)
                continue
            try:
                vals.append(float(cell))
            except ValueError:
                raise CsvFormatError(f"{name}: line {line_no}: cannot parse {cell!r} as a number") from None
        bad = missing or not all(math.isfinite(v) and v > 0 for v in vals)
        if bad:
            if drop_invalid:
                dropped += 1
                continue
            raise CsvFormatError(
                f"{name}: line {line_no}: values must be positive and present, got {','.join(row)!r}"
            )
        xs.append(vals[0])
        ys.append(vals[1])
    return BivariateSample(
        np.array(xs, dtype=float),
        np.array(ys, dtype=float),
        Provenance.EXTERNAL,
        {"source": name, "dropped_rows": dropped},
    )


def preprocess(sample: BivariateSample, scale=(), log=(), drop_nonpositive: bool = False) -> BivariateSample:
    """Apply log transforms, then division by the column maximum, to the named columns.

    ``log`` and ``scale`` are collections of column names (``"x"``, ``"y"``).
    Scaling maps a positive column into ``(0, 1]``. Log transforms can make
    values non-positive; such rows are dropped when ``drop_nonpositive`` is
    set and rejected otherwise.
    """
    cols = {"x": sample.x.copy(), "y": sample.y.copy()}
    for c in log:
        cols[c] = np.log(cols[c])
    keep = (cols["x"] > 0) & (cols["y"] > 0) & np.isfinite(cols["x"]) & np.isfinite(cols["y"])
    if not np.all(keep):
        if not drop_nonpositive:
            bad = int(np.flatnonzero(~keep)[0])
            raise CsvFormatError(
                f"row {bad + 1} is non-positive after transforms; pass --drop-nonpositive to drop such rows"
            )
        cols = {k: v[keep] for k, v in cols.items()}
    for c in scale:
        cols[c] = cols[c] / np.max(cols[c])
    meta = dict(sample.metadata)
    meta.update(
        {
            "log": sorted(log),
            "scale": sorted(scale),
            "dropped_after_transform": int(np.sum(~keep)),
        }
    )
    return BivariateSample(cols["x"], cols["y"], sample.provenance, meta)


def _open_out(path):
    if path is None or (isinstance(path, str) and path == "-"):
        return sys.stdout, False
    if hasattr(path, "write"):
        return path, False
    return open(path, "w", newline="", encoding="utf-8"), True


def write_sample_csv(sample: BivariateSample, path=None) -> None:
    """Write ``x,y`` rows with round-trip float formatting."""
    fh, close = _open_out(path)
    try:
        fh.write("x,y\n")
        fh.writelines(f"{_fmt(a)},{_fmt(b)}\n" for a, b in zip(sample.x.tolist(), sample.y.tolist()))
    finally:
        if close:
            fh.close()


def write_grid_csv(xs, ys, values, path=None) -> int:
    """Write a row-major ``x,y,density`` grid; non-finite cells become empty fields.

    Returns the number of empty cells.
    """
    fh, close = _open_out(path)
    empty = 0
    try:
        fh.write("x,y,density\n")
        for i, xv in enumerate(np.asarray(xs).tolist()):
            row = values[i]
            for j, yv in enumerate(np.asarray(ys).tolist()):
                v = float(row[j])
                if math.isfinite(v):
                    fh.write(f"{_fmt(xv)},{_fmt(yv)},{_fmt(v)}\n")
                else:
                    empty += 1
                    fh.write(f"{_fmt(xv)},{_fmt(yv)},\n")
    finally:
        if close:
            fh.close()
    return empty


def _default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (set, frozenset)):
        return sorted(o)
    if hasattr(o, "value"):
        return o.value
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _clean(o):
    # JSON has no NaN or infinity; emit null instead
    if isinstance(o, float) and not math.isfinite(o):
        return None
    if isinstance(o, dict):
        return {k: _clean(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_clean(v) for v in o]
    return o


def dump_json(obj: dict) -> str:
    payload = {"schema_version": SCHEMA_VERSION, **obj}
    return json.dumps(_clean(json.loads(json.dumps(payload, default=_default))), indent=2, allow_nan=False)


def write_json(obj: dict, path=None) -> None:
    text = dump_json(obj) + "\n"
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")
