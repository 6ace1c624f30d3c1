"""File formats for external data and result tables.

* complex vector CSV: header ``index,re,im``, one row per entry;
* complex matrix CSV: header ``row,col,re,im``, every entry listed once;
* measurement CSV: header ``index,magnitude[,phase_diff]`` (phase
  differences in radians, relative to the group anchor, default 0);
* coherence JSON: ``[[0], [1, 2], ...]`` or ``{"groups": [...]}``.

Floats are written with ``repr`` so reading back is lossless. Parse errors
name the file, the line and the offending field.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from ..coherence import CoherenceError, CoherenceStructure, MagnitudePhaseData
from ..metrics import to_db_floor

VECTOR_HEADER = ("index", "re", "im")
MATRIX_HEADER = ("row", "col", "re", "im")
MEASUREMENT_HEADER = ("index", "magnitude", "phase_diff")


class FormatError(ValueError):
    """A data file violates its format."""


def _rows(path, header: tuple, optional: int = 0):
    """Yield ``(line_number, fields)`` after checking the header.

    ``optional`` trailing header columns may be absent from the file; the
    returned width is that of the file's header.
    """
    path = Path(path)
    try:
        fh = path.open(newline="")
    except OSError as exc:
        raise FormatError(f"cannot open {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            got = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty file, expected header {','.join(header)}") from None
        got = tuple(h.strip() for h in got)
        allowed = [header[: len(header) - k] for k in range(optional + 1)]
        if got not in allowed:
            raise FormatError(f"{path}:1: header {','.join(got)!r}, expected {','.join(header)!r}")
        width = len(got)
        for fields in reader:
            line = reader.line_num
            if not fields or all(not f.strip() for f in fields):
                continue
            if len(fields) != width:
                raise FormatError(f"{path}:{line}: expected {width} fields, got {len(fields)}")
            yield line, width, fields


def _int(path, line, name, text) -> int:
    try:
        v = int(text)
    except ValueError:
        raise FormatError(f"{path}:{line}: field {name!r} is not an integer: {text!r}") from None
    if v < 0:
        raise FormatError(f"{path}:{line}: field {name!r} is negative")
    return v


def _float(path, line, name, text) -> float:
    try:
        v = float(text)
    except ValueError:
        raise FormatError(f"{path}:{line}: field {name!r} is not a number: {text!r}") from None
    if not math.isfinite(v):
        raise FormatError(f"{path}:{line}: field {name!r} is not finite")
    return v


def _collect_indexed(path, entries: dict, what: str):
    n = len(entries)
    if n == 0:
        raise FormatError(f"{path}: no {what} records")
    missing = sorted(set(range(n)) - set(entries))
    if missing:
        raise FormatError(f"{path}: {what} indices not contiguous from 0; first missing {missing[0]}")
    return [entries[i] for i in range(n)]


# -- complex vectors and matrices ---------------------------------------------------------

def write_vector_csv(path, v) -> None:
    v = np.asarray(v, dtype=np.complex128).ravel()
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(VECTOR_HEADER)
        for i, x in enumerate(v):
            w.writerow([i, repr(float(x.real)), repr(float(x.imag))])


def read_vector_csv(path) -> np.ndarray:
    entries = {}
    for line, _, (i, re, im) in _rows(path, VECTOR_HEADER):
        idx = _int(path, line, "index", i)
        if idx in entries:
            raise FormatError(f"{path}:{line}: duplicate index {idx}")
        entries[idx] = complex(_float(path, line, "re", re), _float(path, line, "im", im))
    return np.array(_collect_indexed(path, entries, "vector"), dtype=np.complex128)


def write_matrix_csv(path, M) -> None:
    M = np.asarray(M, dtype=np.complex128)
    if M.ndim != 2:
        raise ValueError("expected a 2-D array")
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MATRIX_HEADER)
        for r in range(M.shape[0]):
            for c in range(M.shape[1]):
                x = M[r, c]
                w.writerow([r, c, repr(float(x.real)), repr(float(x.imag))])


def read_matrix_csv(path) -> np.ndarray:
    """Dense complex matrix; every (row, col) pair must appear exactly once."""
    entries = {}
    last_line = 1
    for line, _, (r, c, re, im) in _rows(path, MATRIX_HEADER):
        key = (_int(path, line, "row", r), _int(path, line, "col", c))
        if key in entries:
            raise FormatError(f"{path}:{line}: duplicate entry {key}")
        entries[key] = complex(_float(path, line, "re", re), _float(path, line, "im", im))
        last_line = line
    if not entries:
        raise FormatError(f"{path}: no matrix entries")
    rows = 1 + max(k[0] for k in entries)
    cols = 1 + max(k[1] for k in entries)
    if len(entries) != rows * cols:
        missing = next((r, c) for r in range(rows) for c in range(cols) if (r, c) not in entries)
        raise FormatError(
            f"{path}: {len(entries)} of {rows}x{cols} entries present "
            f"(file truncated after line {last_line}?); first missing entry {missing}"
        )
    M = np.empty((rows, cols), dtype=np.complex128)
    for (r, c), x in entries.items():
        M[r, c] = x
    return M


# -- measurements and coherence -----------------------------------------------------------

def write_measurements_csv(path, data: MagnitudePhaseData) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MEASUREMENT_HEADER)
        for i, (mag, d) in enumerate(zip(data.magnitudes, data.phase_diffs)):
            w.writerow([i, repr(float(mag)), repr(float(d))])


def read_measurements_csv(path) -> MagnitudePhaseData:
    entries = {}
    for line, width, fields in _rows(path, MEASUREMENT_HEADER, optional=1):
        idx = _int(path, line, "index", fields[0])
        if idx in entries:
            raise FormatError(f"{path}:{line}: duplicate index {idx}")
        mag = _float(path, line, "magnitude", fields[1])
        if mag < 0:
            raise FormatError(f"{path}:{line}: field 'magnitude' is negative")
        diff = _float(path, line, "phase_diff", fields[2]) if width == 3 else 0.0
        entries[idx] = (mag, diff)
    values = _collect_indexed(path, entries, "measurement")
    mags, diffs = (np.array(v, dtype=float) for v in zip(*values))
    return MagnitudePhaseData(mags, diffs)


def write_coherence_json(path, structure: CoherenceStructure) -> None:
    Path(path).write_text(json.dumps({"groups": structure.to_lists()}) + "\n")


def read_coherence_json(path, m: int | None = None) -> CoherenceStructure:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise FormatError(f"cannot open {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    groups = doc.get("groups") if isinstance(doc, dict) else doc
    if not isinstance(groups, list):
        raise FormatError(f"{path}: expected a list of groups or an object with 'groups'")
    for g, grp in enumerate(groups):
        if not isinstance(grp, list) or not all(isinstance(k, int) and not isinstance(k, bool) for k in grp):
            raise FormatError(f"{path}: group {g} is not a list of integers")
    try:
        return CoherenceStructure.from_groups(groups, m)
    except CoherenceError as exc:
        raise FormatError(f"{path}: {exc}") from exc


# -- result tables -------------------------------------------------------------------------

def format_db(value: float) -> str:
    """Deviation in dB with four decimals; -inf becomes the floor value."""
    return f"{to_db_floor(value):.4f}"


def write_table(path, header, rows) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def read_table(path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))
