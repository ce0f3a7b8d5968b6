"""Tower tessellation, areal call density and IDW gridding."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.spatial import Delaunay, QhullError, cKDTree

from .errors import DuplicateSiteError, EmptySamplesError, EmptySitesError, InputError, MissingTowerError
from .raster import GridSpec, RasterGrid

EXACT_HIT = 1e-9


@dataclass(frozen=True)
class TowerSite:
    tower_id: str
    x: float
    y: float

    @property
    def position(self):
        return (self.x, self.y)


def site_array(sites: Sequence[TowerSite]):
    return np.array([(s.x, s.y) for s in sites], dtype=float).reshape(-1, 2)


def check_sites(sites: Sequence[TowerSite]):
    """Reject empty lists, repeated ids, non-finite or repeated positions."""
    if not sites:
        raise EmptySitesError("no tower sites")
    ids = [s.tower_id for s in sites]
    if len(set(ids)) != len(ids):
        raise InputError("tower ids must be unique")
    xy = site_array(sites)
    if not np.isfinite(xy).all():
        raise InputError("tower positions must be finite")
    order = np.lexsort((xy[:, 1], xy[:, 0]))
    same = np.all(xy[order[1:]] == xy[order[:-1]], axis=1)
    if same.any():
        i = order[1:][same][0]
        raise DuplicateSiteError(f"tower {ids[i]} duplicates the position {tuple(xy[i])}")
    return xy


def study_bounds(sites: Sequence[TowerSite], margin=200.0):
    """Bounding rectangle of the sites expanded by ``margin`` on every side."""
    xy = site_array(sites)
    return (
        float(xy[:, 0].min() - margin),
        float(xy[:, 1].min() - margin),
        float(xy[:, 0].max() + margin),
        float(xy[:, 1].max() + margin),
    )


@dataclass
class VoronoiDiagram:
    tower_ids: list
    sites: np.ndarray
    polygons: list
    areas: np.ndarray
    bounds: tuple

    def index(self):
        return {t: i for i, t in enumerate(self.tower_ids)}


def _clip(poly, a, b):
    """Sutherland-Hodgman clip of a convex polygon to ``a . p <= b``."""
    if len(poly) == 0:
        return poly
    s = poly @ a - b
    inside = s <= 0
    if inside.all():
        return poly
    if not inside.any():
        return poly[:0]
    out = []
    n = len(poly)
    for i in range(n):
        j = (i + 1) % n
        p, q = poly[i], poly[j]
        if inside[i]:
            out.append(p)
        if inside[i] != inside[j]:
            t = s[i] / (s[i] - s[j])
            out.append(p + t * (q - p))
    return np.array(out)


def polygon_area(poly):
    if len(poly) < 3:
        return 0.0
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def _neighbours(xy):
    n = len(xy)
    if n >= 4:
        try:
            tri = Delaunay(xy)
        except QhullError:
            pass
        else:
            indptr, indices = tri.vertex_neighbor_vertices
            return [indices[indptr[i]:indptr[i + 1]] for i in range(n)]
    everyone = np.arange(n)
    return [everyone[everyone != i] for i in range(n)]


def build_voronoi(sites: Sequence[TowerSite], bounds) -> VoronoiDiagram:
    """Voronoi cells of the sites clipped to the rectangle ``bounds``.

    Each cell is the bounding rectangle cut by the bisector half-planes of
    the site's Delaunay neighbours (all other sites when the triangulation
    is degenerate).
    """
    xy = check_sites(sites)
    x0, y0, x1, y1 = bounds
    if not (x1 > x0 and y1 > y0):
        raise InputError(f"invalid bounds {bounds}")
    outside = (xy[:, 0] < x0) | (xy[:, 0] > x1) | (xy[:, 1] < y0) | (xy[:, 1] > y1)
    if outside.any():
        raise InputError(f"{int(outside.sum())} sites lie outside the study bounds")
    rect = np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]], dtype=float)
    sq = np.einsum("ij,ij->i", xy, xy)
    polygons = []
    for i, nbrs in enumerate(_neighbours(xy)):
        poly = rect
        for j in nbrs:
            poly = _clip(poly, xy[j] - xy[i], 0.5 * (sq[j] - sq[i]))
        polygons.append(poly)
    areas = np.array([polygon_area(p) for p in polygons])
    return VoronoiDiagram([s.tower_id for s in sites], xy, polygons, areas, tuple(map(float, bounds)))


def volume_density(diagram: VoronoiDiagram, tower_totals):
    """Divide per-tower volumes by their polygon area.

    ``tower_totals`` is either an array aligned with ``diagram.tower_ids``
    (1-D, or 2-D with one column per time step) or a mapping from tower id
    to volume; towers absent from the mapping carry zero volume.
    """
    if isinstance(tower_totals, Mapping):
        idx = diagram.index()
        unknown = [t for t in tower_totals if t not in idx]
        if unknown:
            raise MissingTowerError(f"no polygon for tower(s) {unknown[:5]}")
        first = next(iter(tower_totals.values()), 0.0)
        totals = np.zeros((len(idx),) + np.shape(first))
        for t, v in tower_totals.items():
            totals[idx[t]] = v
    else:
        totals = np.asarray(tower_totals, dtype=float)
        if totals.shape[0] != len(diagram.tower_ids):
            raise MissingTowerError(
                f"{totals.shape[0]} totals for {len(diagram.tower_ids)} towers"
            )
    if (totals < 0).any():
        raise InputError("tower volumes must be nonnegative")
    areas = diagram.areas.reshape((-1,) + (1,) * (totals.ndim - 1))
    return totals / areas


def idw_weights(positions, spec: GridSpec, power=2.0, k_neighbors=12):
    """Neighbour indices and normalised IDW weights for every cell center.

    Returns ``(idx, w)`` of shape ``(n_cells, k)`` in row-major cell order.
    A cell center within ``EXACT_HIT`` of a sample takes that sample alone.
    """
    positions = np.asarray(positions, dtype=float).reshape(-1, 2)
    if len(positions) == 0:
        raise EmptySamplesError("IDW needs at least one sample")
    if not power > 0:
        raise InputError("IDW power must be positive")
    if k_neighbors < 1:
        raise InputError("k_neighbors must be >= 1")
    k = min(int(k_neighbors), len(positions))
    cx, cy = spec.cell_centers()
    centers = np.column_stack([cx.ravel(), cy.ravel()])
    dist, idx = cKDTree(positions).query(centers, k=k)
    dist = dist.reshape(len(centers), k)
    idx = idx.reshape(len(centers), k)
    hit = dist[:, 0] <= EXACT_HIT
    with np.errstate(divide="ignore"):
        w = dist ** (-power)
    w[hit] = 0.0
    w[hit, 0] = 1.0
    w /= w.sum(axis=1, keepdims=True)
    return idx, w


def idw_interpolate(positions, values, spec: GridSpec, power=2.0, k_neighbors=12, chunk=4096):
    """Inverse-distance-weighted mean of the ``k_neighbors`` nearest samples.

    ``values`` may be 1-D (one layer) or ``(n_samples, n_layers)``; the
    result has shape ``spec.shape`` or ``spec.shape + (n_layers,)``.
    """
    values = np.asarray(values, dtype=float)
    if values.shape[0] != len(np.asarray(positions).reshape(-1, 2)):
        raise InputError("values must align with sample positions")
    idx, w = idw_weights(positions, spec, power, k_neighbors)
    layers = values.reshape(values.shape[0], -1)
    out = np.empty((len(idx), layers.shape[1]))
    for s in range(0, len(idx), chunk):
        e = s + chunk
        near = layers[idx[s:e]]
        # fixed neighbour order keeps every layer bit-identical to a
        # one-layer run
        mixed = w[s:e, 0, None] * near[:, 0]
        for j in range(1, near.shape[1]):
            mixed += w[s:e, j, None] * near[:, j]
        # weights sum to one only up to rounding
        out[s:e] = np.clip(mixed, near.min(axis=1), near.max(axis=1))
    shape = spec.shape if values.ndim == 1 else spec.shape + values.shape[1:]
    return RasterGrid(spec, out.reshape(shape))


def towers_per_cell(sites: Sequence[TowerSite], spec: GridSpec) -> RasterGrid:
    """Count the sites falling in each cell; sites outside the grid are ignored."""
    counts = np.zeros(spec.shape)
    if sites:
        xy = site_array(sites)
        row, col = spec.locate(xy[:, 0], xy[:, 1])
        ok = row >= 0
        np.add.at(counts, (row[ok], col[ok]), 1)
    return RasterGrid(spec, counts)
