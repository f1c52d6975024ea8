"""Reading and writing slip fields as CSV or a small binary format.

CSV rows are ``x_index, y_index, u_1, ..., u_N`` with a header line.
The binary layout is a 32-byte little-endian header

    ``b"SF"``, ``uint16 N``, ``uint16 nx``, ``uint16 ny``, ``float64 spacing``,
    ``float64 origin_x``, ``float64 origin_y``

followed by ``float64`` values in
``(nx, ny, N)`` C order.
"""

from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

from .energy import SlipField
from .errors import DomainError

_HEADER = struct.Struct("<2sHHHddd")
MAGIC = b"SF"


def write_csv(field, path):
    path = Path(path)
    n = field.n_components
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x_index", "y_index"] + [f"u_{i + 1}" for i in range(n)])
        for i in range(field.nx):
            for j in range(field.ny):
                w.writerow([i, j] + [repr(float(v)) for v in field.values[i, j]])


def read_csv(path, spacing, origin=(0.0, 0.0)):
    """Read a CSV field; every cell of the bounding index box must appear once."""
    rows = []
    with Path(path).open(newline="") as fh:
        r = csv.reader(fh)
        head = next(r, None)
        if not head or head[:2] != ["x_index", "y_index"] or len(head) < 3:
            raise DomainError(f"{path}: expected header x_index,y_index,u_1,...")
        n = len(head) - 2
        for lineno, row in enumerate(r, start=2):
            if len(row) != n + 2:
                raise DomainError(f"{path}:{lineno}: expected {n + 2} columns, got {len(row)}")
            rows.append((int(row[0]), int(row[1]), [float(v) for v in row[2:]]))
    if not rows:
        raise DomainError(f"{path}: no data rows")
    nx = max(r[0] for r in rows) + 1
    ny = max(r[1] for r in rows) + 1
    vals = np.full((nx, ny, n), np.nan)
    for i, j, u in rows:
        if i < 0 or j < 0:
            raise DomainError(f"{path}: negative cell index ({i}, {j})")
        vals[i, j] = u
    if np.isnan(vals).any():
        raise DomainError(f"{path}: missing cells in the {nx}x{ny} grid")
    return SlipField(vals, spacing, origin)


def write_binary(field, path):
    h = _HEADER.pack(MAGIC, field.n_components, field.nx, field.ny, field.spacing, *field.origin)
    with Path(path).open("wb") as fh:
        fh.write(h)
        fh.write(np.ascontiguousarray(field.values, dtype="<f8").tobytes())


def read_binary(path):
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise DomainError(f"{path}: truncated header")
    magic, n, nx, ny, h, ox, oy = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise DomainError(f"{path}: bad magic {magic!r}")
    payload = np.frombuffer(data, dtype="<f8", offset=_HEADER.size)
    if payload.size != n * nx * ny:
        raise DomainError(f"{path}: payload has {payload.size} values, header announces {n * nx * ny}")
    return SlipField(payload.reshape(nx, ny, n).astype(float), h, (ox, oy))


def read_field(path, spacing=None, origin=(0.0, 0.0)):
    """Dispatch on the file suffix (``.csv`` needs ``spacing``)."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        if spacing is None:
            raise DomainError("CSV fields need an explicit spacing")
        return read_csv(path, spacing, origin)
    return read_binary(path)
