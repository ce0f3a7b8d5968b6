"""Regular georeferenced grids and the ESRI-style ASCII raster format.

Row 0 of every in-memory array is the northernmost row, matching the
file layout, so arrays can be written without flipping.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InputError

NODATA = -9999.0


@dataclass(frozen=True)
class GridSpec:
    """Lower-left origin, square cell size and shape of a raster grid."""

    x_ll: float
    y_ll: float
    cell_size: float = 200.0
    n_rows: int = 1
    n_cols: int = 1

    def __post_init__(self):
        if not self.cell_size > 0:
            raise InputError(f"cell_size must be positive, got {self.cell_size}")
        if self.n_rows < 1 or self.n_cols < 1:
            raise InputError(f"grid shape must be positive, got {self.n_rows}x{self.n_cols}")

    @classmethod
    def covering(cls, bounds, cell_size=200.0):
        """Smallest grid anchored at the lower-left corner of ``bounds`` covering it."""
        x0, y0, x1, y1 = bounds
        n_cols = max(1, math.ceil((x1 - x0) / cell_size - 1e-9))
        n_rows = max(1, math.ceil((y1 - y0) / cell_size - 1e-9))
        return cls(float(x0), float(y0), float(cell_size), int(n_rows), int(n_cols))

    @property
    def shape(self):
        return (self.n_rows, self.n_cols)

    @property
    def n_cells(self):
        return self.n_rows * self.n_cols

    @property
    def x_ur(self):
        return self.x_ll + self.n_cols * self.cell_size

    @property
    def y_ur(self):
        return self.y_ll + self.n_rows * self.cell_size

    @property
    def bounds(self):
        return (self.x_ll, self.y_ll, self.x_ur, self.y_ur)

    def cell_centers(self):
        """Return ``(x, y)`` arrays of shape ``(n_rows, n_cols)``."""
        xs = self.x_ll + (np.arange(self.n_cols) + 0.5) * self.cell_size
        ys = self.y_ll + (self.n_rows - np.arange(self.n_rows) - 0.5) * self.cell_size
        return np.meshgrid(xs, ys)

    def locate(self, x, y):
        """Map points to ``(row, col)``; points outside the grid get -1.

        A point on an edge shared by two cells belongs to the one with the
        lower row/column index (north and west win).
        """
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        col = np.ceil((x - self.x_ll) / self.cell_size).astype(np.int64) - 1
        row = np.ceil((self.y_ur - y) / self.cell_size).astype(np.int64) - 1
        col = np.maximum(col, 0)
        row = np.maximum(row, 0)
        inside = (
            (x >= self.x_ll) & (x <= self.x_ur) & (y >= self.y_ll) & (y <= self.y_ur)
            & (col < self.n_cols) & (row < self.n_rows)
        )
        return np.where(inside, row, -1), np.where(inside, col, -1)


@dataclass
class RasterGrid:
    """Values on a :class:`GridSpec`; NaN marks nodata in memory.

    ``values`` has shape ``(n_rows, n_cols)`` for scalar layers or
    ``(n_rows, n_cols, depth)`` for vector-valued cells.
    """

    spec: GridSpec
    values: np.ndarray
    nodata: float = NODATA

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape[:2] != self.spec.shape:
            raise InputError(
                f"raster values {self.values.shape} do not match grid {self.spec.shape}"
            )
        if np.isinf(self.values).any():
            raise InputError("raster values must be finite or nodata")

    @property
    def valid(self):
        v = self.values
        return ~np.isnan(v) if v.ndim == 2 else ~np.isnan(v).any(axis=2)


def _format_rows(values):
    if np.all(np.isnan(values) | (values == np.round(values))) and np.nanmax(np.abs(values), initial=0) < 1e15:
        ints = np.where(np.isnan(values), 0, values).astype(np.int64)
        return [" ".join(map(str, row)) for row in ints.tolist()]
    return [" ".join(repr(v) for v in row) for row in values.tolist()]


def write_ascii(path, raster: RasterGrid):
    """Write a scalar raster; float values are written with round-trip precision."""
    if raster.values.ndim != 2:
        raise InputError("ASCII rasters hold one scalar layer")
    spec = raster.spec
    values = np.where(np.isnan(raster.values), raster.nodata, raster.values)
    lines = [
        f"ncols {spec.n_cols}",
        f"nrows {spec.n_rows}",
        f"xllcorner {spec.x_ll!r}",
        f"yllcorner {spec.y_ll!r}",
        f"cellsize {spec.cell_size!r}",
        f"NODATA_value {_format_nodata(raster.nodata)}",
    ]
    lines.extend(_format_rows(values))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _format_nodata(v):
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def read_ascii(path) -> RasterGrid:
    text = Path(path).read_text(encoding="utf-8")
    lines = text.split("\n")
    header = {}
    i = 0
    while i < len(lines) and len(header) < 6:
        parts = lines[i].split()
        if not parts:
            i += 1
            continue
        if parts[0][0].isalpha():
            header[parts[0].lower()] = parts[1]
            i += 1
        else:
            break
    try:
        n_cols = int(header["ncols"])
        n_rows = int(header["nrows"])
        cell = float(header["cellsize"])
        nodata = float(header.get("nodata_value", NODATA))
        if "xllcorner" in header:
            x_ll, y_ll = float(header["xllcorner"]), float(header["yllcorner"])
        else:
            x_ll = float(header["xllcenter"]) - cell / 2
            y_ll = float(header["yllcenter"]) - cell / 2
    except KeyError as exc:
        raise InputError(f"{path}: missing raster header field {exc}") from None
    data = np.array(" ".join(lines[i:]).split(), dtype=float)
    if data.size != n_rows * n_cols:
        raise InputError(f"{path}: expected {n_rows * n_cols} values, found {data.size}")
    values = data.reshape(n_rows, n_cols)
    values[values == nodata] = np.nan
    return RasterGrid(GridSpec(x_ll, y_ll, cell, n_rows, n_cols), values, nodata)
