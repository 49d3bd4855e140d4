"""Snapshots and CSV series.

Snapshot layout (little endian):

    bytes 0-3    magic b"NSP2"
    bytes 4-7    u32  N
    bytes 8-15   f64  L
    bytes 16-23  f64  time
    bytes 24-27  u32  field count
    bytes 28-31  zero padding
    then each field as N*N f64 physical samples, row-major (x1 index slowest)

Fields are written in the order (rho, u1, u2, phi).

CSV files start with a ``# format=1`` line and a header row; floats use
``%.17g`` so they round-trip exactly.  All writes go to a temporary file in
the target directory and are renamed into place.
"""
from __future__ import annotations

import csv
import io as _io
import os
import struct
import tempfile
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .solver import PrimitiveState
from .spectral import Grid2D

MAGIC = b"NSP2"
HEADER = struct.Struct("<4sIddI4x")
CSV_FORMAT_LINE = "# format=1"
SNAPSHOT_FIELDS = ("rho", "u1", "u2", "phi")


def atomic_write(path, data: bytes) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def snapshot_bytes(state: PrimitiveState) -> bytes:
    g = state.grid
    fields = np.concatenate([state.data, state.phi.coefficients[None]])
    phys = np.ascontiguousarray(g.inverse(fields), dtype="<f8")
    return HEADER.pack(MAGIC, g.n, g.length, float(state.time), len(SNAPSHOT_FIELDS)) + phys.tobytes()


def write_snapshot(path, state: PrimitiveState) -> Path:
    return atomic_write(path, snapshot_bytes(state))


def read_snapshot(path):
    """Return (N, L, time, fields[count, N, N])."""
    raw = Path(path).read_bytes()
    if len(raw) < HEADER.size:
        raise ValueError(f"{path}: file too short for a snapshot header")
    magic, n, length, time, count = HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    expected = HEADER.size + 8 * count * n * n
    if len(raw) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, found {len(raw)}")
    fields = np.frombuffer(raw, dtype="<f8", offset=HEADER.size).reshape(count, n, n)
    return n, length, time, fields


def load_state(path, dealias_fraction: float = 2.0 / 3.0, params=None) -> PrimitiveState:
    n, length, time, fields = read_snapshot(path)
    g = Grid2D(n, length, dealias_fraction)
    return PrimitiveState(g, g.forward(fields[:3]), time, params)


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def csv_text(header: Sequence[str], rows: Iterable[Sequence], footer: Optional[List[Sequence]] = None) -> str:
    buf = _io.StringIO()
    buf.write(CSV_FORMAT_LINE + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    for row in footer or []:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def write_csv(path, header, rows, footer=None) -> Path:
    return atomic_write(path, csv_text(header, rows, footer).encode())


def read_csv(path) -> Tuple[List[str], List[List[str]]]:
    lines = Path(path).read_text().splitlines()
    body = [ln for ln in lines if not ln.startswith("#")]
    if not body:
        raise ValueError(f"{path}: no header row")
    reader = list(csv.reader(body))
    return reader[0], reader[1:]


def read_series(path, column: Optional[str] = None):
    """(t, value) pairs from a CSV; the first column is time.

    ``column`` picks the value column by name (default: the second).
    Rows whose entries do not parse as numbers are skipped.
    """
    header, rows = read_csv(path)
    if len(header) < 2:
        raise ValueError(f"{path}: need a time column and a value column")
    idx = 1 if column is None else header.index(column)
    out = []
    for r in rows:
        try:
            out.append((float(r[0]), float(r[idx])))
        except (ValueError, IndexError):
            continue
    return out
