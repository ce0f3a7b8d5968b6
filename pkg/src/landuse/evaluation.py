"""Comparison of predicted land use against a fine-resolution truth map:
detection rate, confusion matrices and the uncertainty breakdowns by
land-use entropy, tower density and membership alpha cut."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError, NoEvaluableCellsError, NoOverlapError
from .raster import GridSpec, RasterGrid
from .training import ClassCenters, nearest_center_classify


def _values(r):
    return r.values if isinstance(r, RasterGrid) else np.asarray(r, dtype=float)


def majority_truth(truth: RasterGrid, spec: GridSpec, n_classes: int):
    """Class area shares of the fine truth cells inside each coarse cell.

    Each fine cell is attributed to the coarse cell containing its center.
    Returns ``(majority, occupancy)``: a raster of the most common class
    (ties to the lowest id, NaN where no valid fine cell falls) and an
    ``(n_rows, n_cols, n_classes)`` share array.
    """
    fx, fy = truth.spec.cell_centers()
    vals = truth.values.ravel()
    ok = ~np.isnan(vals)
    row, col = spec.locate(fx.ravel()[ok], fy.ravel()[ok])
    cls = vals[ok].astype(np.int64)
    inside = row >= 0
    if not inside.any():
        raise NoOverlapError("truth raster does not overlap the grid")
    if cls.min(initial=1) < 1 or cls.max(initial=1) > n_classes:
        raise InputError(f"truth classes must lie in 1..{n_classes}")
    flat = (row * spec.n_cols + col)[inside]
    counts = np.bincount(flat * n_classes + (cls[inside] - 1), minlength=spec.n_cells * n_classes)
    counts = counts.reshape(spec.n_rows, spec.n_cols, n_classes).astype(float)
    support = counts.sum(axis=2, keepdims=True)
    with np.errstate(invalid="ignore"):
        occupancy = counts / support
    majority = np.where(support[..., 0] > 0, np.argmax(counts, axis=2) + 1.0, np.nan)
    return RasterGrid(spec, majority), occupancy


def _pairs(pred, truth):
    p = _values(pred).ravel()
    t = _values(truth).ravel()
    if p.shape != t.shape:
        raise InputError("prediction and truth rasters are not aligned")
    ok = ~np.isnan(p) & ~np.isnan(t)
    return p, t, ok


def detection_rate(pred, truth) -> float:
    """Fraction of cells, among those with both a prediction and a truth
    class, where the two agree."""
    p, t, ok = _pairs(pred, truth)
    if not ok.any():
        raise NoEvaluableCellsError("no cell has both a prediction and a truth class")
    return float(np.mean(p[ok] == t[ok]))


@dataclass
class ConfusionMatrix:
    """Rows are true classes, columns predicted; rows without support are NaN."""

    counts: np.ndarray

    @property
    def support(self):
        return self.counts.sum(axis=1)

    @property
    def rates(self):
        s = self.support[:, None]
        with np.errstate(invalid="ignore"):
            return np.where(s > 0, self.counts / np.where(s > 0, s, 1), np.nan)

    @property
    def detection_rate(self):
        return float(np.trace(self.counts) / self.counts.sum())


def confusion_matrix(pred, truth, n_classes: int) -> ConfusionMatrix:
    p, t, ok = _pairs(pred, truth)
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(counts, (t[ok].astype(np.int64) - 1, p[ok].astype(np.int64) - 1), 1)
    return ConfusionMatrix(counts)


def posterior_confusion(patterns, centers: ClassCenters, truth, active=None) -> ConfusionMatrix:
    """Confusion of a pattern-only nearest-center labelling.

    ``patterns`` is ``(n_rows, n_cols, T)`` (NaN where inactive) or the
    active-cell rows together with the ``active`` mask; ``centers`` may be
    combined-series centers, whose last (volume) component is dropped.
    """
    pattern_centers = centers.centers
    if isinstance(centers, ClassCenters) and pattern_centers.shape[1] == np.shape(patterns)[-1] + 1:
        pattern_centers = centers.pattern_part()
    pc = ClassCenters(centers.class_ids, pattern_centers, centers.counts)
    tv = _values(truth)
    if active is None:
        pats = np.asarray(patterns, dtype=float).reshape(-1, np.shape(patterns)[-1])
        active = ~np.isnan(pats).any(axis=1)
        pats = pats[active]
    else:
        pats = np.asarray(patterns, dtype=float)
    pred = np.full(tv.size, np.nan)
    pred[np.asarray(active).ravel()] = nearest_center_classify(pats, pc)
    return confusion_matrix(pred.reshape(tv.shape), tv, centers.k)


def land_use_entropy(occupancy):
    """Shannon entropy (natural log) of the class shares of every cell."""
    p = np.asarray(occupancy, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, -p * np.log(p), 0.0)
    en = terms.sum(axis=-1)
    return np.where(np.isnan(p).any(axis=-1), np.nan, en)


@dataclass
class BinRow:
    lo: float
    hi: float
    n_cells: int
    error_rate: float


def entropy_analysis(occupancy, pred, truth, n_bins=10, n_classes=None):
    """Entropy per cell and error rate per equal-width entropy bin on [0, ln K].

    Returns ``(entropy, rows)``; empty bins carry a NaN error rate.
    """
    occupancy = np.asarray(occupancy, dtype=float)
    k = n_classes or occupancy.shape[-1]
    en = land_use_entropy(occupancy)
    p, t, ok = _pairs(pred, truth)
    e = en.ravel()
    ok &= ~np.isnan(e)
    top = math.log(k)
    width = top / n_bins
    idx = np.minimum((e[ok] / width).astype(np.int64), n_bins - 1)
    wrong = p[ok] != t[ok]
    rows = []
    for b in range(n_bins):
        sel = idx == b
        n = int(sel.sum())
        rows.append(BinRow(b * width, (b + 1) * width, n, float(wrong[sel].mean()) if n else math.nan))
    return en, rows


@dataclass
class GroupRow:
    key: float
    n_cells: int
    detection_rate: float


def density_analysis(pred, truth, tower_counts):
    """Detection rate grouped by the exact number of towers in each cell."""
    p, t, ok = _pairs(pred, truth)
    counts = _values(tower_counts).ravel()
    rows = []
    for key in np.unique(counts[ok]):
        sel = ok & (counts == key)
        rows.append(GroupRow(float(key), int(sel.sum()), float(np.mean(p[sel] == t[sel]))))
    return rows


@dataclass
class AlphaRow:
    alpha: float
    n_cells: int
    detection_rate: float
    retained_fraction: float


def alpha_cut_analysis(max_membership, pred, truth, alphas):
    """Detection rate over the cells whose largest membership reaches each alpha.

    ``max_membership`` is a raster aligned with ``pred`` (or a fitted model
    scattered onto it beforehand). An alpha retaining nothing yields a row
    with NaN detection rate.
    """
    p, t, ok = _pairs(pred, truth)
    mm = _values(max_membership).ravel()
    total = int(ok.sum())
    if total == 0:
        raise NoEvaluableCellsError("no cell has both a prediction and a truth class")
    rows = []
    for a in alphas:
        keep = ok & (mm >= a)
        n = int(keep.sum())
        rate = float(np.mean(p[keep] == t[keep])) if n else math.nan
        rows.append(AlphaRow(float(a), n, rate, n / total))
    return rows
