"""Field files: CSV (coordinates plus one column per component) and a flat binary format.

Binary layout, little-endian::

    magic     8 bytes  b"SJFIELD1"
    d         uint32
    n0        uint32
    n1        uint32   (1 when d == 1)
    p         uint32   number of components
    spacing   float64
    data      p * n0 * n1 float64, component-major, C order

Grids are assumed centered at the origin when read back.
"""

from __future__ import annotations

import csv
import os
import struct
from pathlib import Path

import numpy as np

from .field_sim import GridSpec, VectorFieldSample

__all__ = ["MAGIC", "HEADER", "write_binary", "read_binary", "write_csv", "read_csv", "save_field", "load_field"]

MAGIC = b"SJFIELD1"
HEADER = struct.Struct("<8sIIIId")
assert HEADER.size == 32


def write_binary(v: VectorFieldSample, path: str | os.PathLike) -> None:
    g = v.grid
    n0 = g.shape[0]
    n1 = g.shape[1] if g.d == 2 else 1
    with open(path, "wb") as fh:
        fh.write(HEADER.pack(MAGIC, g.d, n0, n1, v.p, g.spacing))
        fh.write(np.ascontiguousarray(v.stacked(), dtype="<f8").tobytes())


def read_binary(path: str | os.PathLike) -> VectorFieldSample:
    with open(path, "rb") as fh:
        head = fh.read(HEADER.size)
        if len(head) != HEADER.size:
            raise ValueError(f"{path}: truncated header")
        magic, d, n0, n1, p, spacing = HEADER.unpack(head)
        if magic != MAGIC:
            raise ValueError(f"{path}: not a field file (bad magic {magic!r})")
        shape = (n0,) if d == 1 else (n0, n1)
        count = p * n0 * n1
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != count:
        raise ValueError(f"{path}: expected {count} values, found {data.size}")
    arr = data.astype(float).reshape((p,) + shape)
    return VectorFieldSample(GridSpec(d, shape, spacing), list(arr))


def _coords(g: GridSpec) -> list[np.ndarray]:
    axes = g.axes()
    if g.d == 1:
        return [axes[0]]
    xx, yy = np.meshgrid(axes[0], axes[1], indexing="ij")
    return [xx.ravel(), yy.ravel()]


def write_csv(v: VectorFieldSample, path: str | os.PathLike) -> None:
    g = v.grid
    names = ["x"] if g.d == 1 else ["x", "y"]
    comps = [f"v{j}" for j in range(v.p)] if v.p > 1 else ["value"]
    cols = _coords(g) + [c.ravel() for c in v.components]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(names + comps)
        for row in zip(*cols):
            wr.writerow([repr(float(x)) for x in row])


def read_csv(path: str | os.PathLike) -> VectorFieldSample:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], np.array(rows[1:], dtype=float)
    d = 2 if "y" in header else 1
    coords = body[:, :d]
    vals = body[:, d:]
    axes = [np.unique(coords[:, j]) for j in range(d)]
    shape = tuple(a.size for a in axes)
    spacing = float(axes[0][1] - axes[0][0])
    origin = tuple(float(a[0]) for a in axes)
    comps = [vals[:, j].reshape(shape) for j in range(vals.shape[1])]
    return VectorFieldSample(GridSpec(d, shape, spacing, origin), comps)


def save_field(v: VectorFieldSample, path: str | os.PathLike) -> None:
    """Write CSV when the suffix is ``.csv``, binary otherwise."""
    if Path(path).suffix.lower() == ".csv":
        write_csv(v, path)
    else:
        write_binary(v, path)


def load_field(path: str | os.PathLike) -> VectorFieldSample:
    if Path(path).suffix.lower() == ".csv":
        return read_csv(path)
    return read_binary(path)
