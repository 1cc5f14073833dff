"""Point-cloud file formats.

Two interchangeable formats:

* CSV — one point per row, comma-separated decimals with 17 significant
  digits, no header (enough digits to round-trip float64 exactly);
* binary — magic ``TSTL``, then little-endian u32 ambient dimension,
  u64 point count, and the raw float64 coordinates row-major.

``load_points`` sniffs the magic, so readers never need to know which one
they were handed.
"""

from __future__ import annotations

import struct

import numpy as np

from .geometry import GeometryError
from .util import format_float

MAGIC = b"TSTL"


def write_points_csv(points, path) -> None:
    points = np.atleast_2d(np.asarray(points, dtype=float))
    lines = [",".join(format_float(x) for x in row) for row in points]
    with open(path, "w", newline="\n") as fh:
        if lines:
            fh.write("\n".join(lines) + "\n")


def read_points_csv(path) -> np.ndarray:
    rows = []
    width = None
    with open(path, "r") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                row = [float(tok) for tok in line.split(",")]
            except ValueError as exc:
                raise GeometryError(f"{path}:{line_no}: not a number row: {exc}")
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise GeometryError(
                    f"{path}:{line_no}: row has {len(row)} fields, expected {width}")
            rows.append(row)
    if not rows:
        return np.empty((0, 0))
    return np.asarray(rows, dtype=float)


def write_points_tstl(points, path) -> None:
    points = np.atleast_2d(np.ascontiguousarray(points, dtype="<f8"))
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", points.shape[1]))
        fh.write(struct.pack("<Q", points.shape[0]))
        fh.write(points.tobytes())


def read_points_tstl(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise GeometryError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
        dim = struct.unpack("<I", fh.read(4))[0]
        count = struct.unpack("<Q", fh.read(8))[0]
        payload = fh.read(8 * dim * count)
        if len(payload) != 8 * dim * count:
            raise GeometryError(
                f"{path}: truncated payload, expected {8 * dim * count} bytes")
        extra = fh.read(1)
        if extra:
            raise GeometryError(f"{path}: trailing bytes after the payload")
    return np.frombuffer(payload, dtype="<f8").reshape(count, dim).copy()


def load_points(path) -> np.ndarray:
    """Read either format; the binary magic decides."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
    if magic == MAGIC:
        return read_points_tstl(path)
    return read_points_csv(path)


def save_points(points, path, binary: bool | None = None) -> None:
    """Write CSV by default; binary when asked or when the path ends .tstl."""
    if binary is None:
        binary = str(path).endswith(".tstl")
    if binary:
        write_points_tstl(points, path)
    else:
        write_points_csv(points, path)
