"""Periodic lattices of square matrices and their on-disk snapshot format.

Snapshots use the MACF1 layout: magic bytes "MACF1", then little-endian
header {n: uint32, m: uint32, sizes: m x uint32, time: float64}, then the
field entries as row-major float64. Grid lengths are not part of the
header; loaders default to the unit torus unless told otherwise.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

MAGIC = b"MACF1"


@dataclass(frozen=True)
class PeriodicGrid:
    """Uniform periodic lattice: sizes per axis, domain extents per axis."""

    sizes: tuple
    lengths: tuple

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.sizes)
        lengths = tuple(float(l) for l in self.lengths)
        if len(sizes) not in (1, 2):
            raise ValueError("spatial dimension must be 1 or 2")
        if len(lengths) != len(sizes):
            raise ValueError("sizes and lengths must have the same dimension")
        if any(s < 16 for s in sizes):
            raise ValueError("need at least 16 points per axis")
        if any(l <= 0 for l in lengths):
            raise ValueError("domain extents must be positive")
        object.__setattr__(self, "sizes", sizes)
        object.__setattr__(self, "lengths", lengths)

    @property
    def m(self) -> int:
        return len(self.sizes)

    @property
    def spacing(self) -> tuple:
        return tuple(l / s for l, s in zip(self.lengths, self.sizes))

    def axes(self) -> list:
        return [np.arange(s) * h for s, h in zip(self.sizes, self.spacing)]

    def meshgrid(self) -> list:
        return list(np.meshgrid(*self.axes(), indexing="ij"))

    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))


@dataclass
class MatrixField:
    """State of the evolution: one n x n matrix per lattice cell."""

    grid: PeriodicGrid
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        expect = tuple(self.grid.sizes)
        if v.shape[: self.grid.m] != expect or v.ndim != self.grid.m + 2 or v.shape[-1] != v.shape[-2]:
            raise ValueError(f"values shape {v.shape} does not match grid {expect} + (n, n)")
        if not np.all(np.isfinite(v)):
            raise ValueError("field has non-finite entries")
        self.values = v

    @property
    def n(self) -> int:
        return self.values.shape[-1]

    def copy(self) -> "MatrixField":
        return MatrixField(grid=self.grid, values=self.values.copy(), time=self.time)


def save_field(field: MatrixField, path) -> None:
    sizes = field.grid.sizes
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", field.n, field.grid.m))
        fh.write(struct.pack(f"<{field.grid.m}I", *sizes))
        fh.write(struct.pack("<d", field.time))
        fh.write(np.ascontiguousarray(field.values, dtype="<f8").tobytes())


def load_field(path, lengths: tuple | None = None) -> MatrixField:
    with open(path, "rb") as fh:
        magic = fh.read(5)
        if magic != MAGIC:
            raise ValueError(f"not a MACF1 snapshot (magic {magic!r})")
        n, m = struct.unpack("<II", fh.read(8))
        sizes = struct.unpack(f"<{m}I", fh.read(4 * m))
        (time,) = struct.unpack("<d", fh.read(8))
        count = int(np.prod(sizes)) * n * n
        data = np.frombuffer(fh.read(8 * count), dtype="<f8")
        if data.size != count:
            raise ValueError("truncated snapshot")
    if lengths is None:
        lengths = (1.0,) * m
    grid = PeriodicGrid(sizes=tuple(sizes), lengths=tuple(lengths))
    values = data.reshape(*sizes, n, n).astype(float)
    return MatrixField(grid=grid, values=values, time=time)
