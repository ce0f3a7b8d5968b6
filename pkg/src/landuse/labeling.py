"""Cluster-to-class assignment, per-cell labels and the split of each
cell's distance into pattern and volume parts."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from .fcm import ClusterModel, fcm_fit
from .raster import GridSpec, RasterGrid
from .training import ClassCenters, center_distances

log = logging.getLogger(__name__)


@dataclass
class ClusterAssignment:
    """``classes[j]`` is the land-use class of cluster ``j``."""

    classes: np.ndarray
    reclustered: bool = False
    n_classes: int = 0

    @property
    def coverage_warning(self):
        return len(set(self.classes.tolist())) < self.n_classes


def assign_clusters(model: ClusterModel, centers: ClassCenters) -> ClusterAssignment:
    """Send each cluster to the class whose sample center is nearest."""
    d2 = center_distances(model.centers, centers.centers)
    classes = centers.class_ids[np.argmin(d2, axis=1)]
    return ClusterAssignment(classes, False, centers.k)


def cell_labels(model: ClusterModel, assignment: ClusterAssignment):
    """Hard label per row: class of the highest-membership cluster."""
    return assignment.classes[model.hard_labels()]


@dataclass
class ClassifiedRaster:
    classes: RasterGrid
    max_membership: RasterGrid


def to_raster(spec: GridSpec, active, values):
    """Scatter per-active-cell values back onto the grid (NaN elsewhere)."""
    out = np.full(spec.n_cells, np.nan)
    out[np.asarray(active).ravel()] = values
    return RasterGrid(spec, out.reshape(spec.shape))


@dataclass
class Classification:
    raster: ClassifiedRaster
    model: ClusterModel
    assignment: ClusterAssignment
    labels: np.ndarray


def classify_grid(model: ClusterModel, centers: ClassCenters, data, spec: GridSpec, active) -> Classification:
    """Label every active cell, re-clustering once with ``c = K`` when the
    clusters do not reach every class.

    ``data`` holds the combined series of the active cells in row-major
    cell order, matching the rows of ``model.membership``.
    """
    assignment = assign_clusters(model, centers)
    if assignment.coverage_warning:
        log.info(
            "clusters cover %d of %d classes; re-clustering with c=%d",
            len(set(assignment.classes.tolist())), centers.k, centers.k,
        )
        model = fcm_fit(data, replace(model.config, n_clusters=centers.k))
        assignment = assign_clusters(model, centers)
        assignment.reclustered = True
        if assignment.coverage_warning:
            log.warning("after re-clustering only %d of %d classes are represented",
                        len(set(assignment.classes.tolist())), centers.k)
    labels = cell_labels(model, assignment)
    raster = ClassifiedRaster(
        to_raster(spec, active, labels),
        to_raster(spec, active, model.membership.max(axis=1)),
    )
    return Classification(raster, model, assignment, labels)


@dataclass
class DistanceDecomposition:
    class_ids: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    ratio: np.ndarray
    n_cells: np.ndarray

    @property
    def average_ratio(self):
        ok = ~np.isnan(self.ratio)
        return float(self.ratio[ok].mean()) if ok.any() else math.nan


def distance_decomposition(data, model: ClusterModel, assignment: ClusterAssignment, class_ids) -> DistanceDecomposition:
    """Per-class mean pattern distance (d1), mean weighted-volume distance
    (d2) and their ratio, measured from each cell to its own cluster center.

    The last column of ``data`` is the already weighted volume, so d2 is
    simply the gap in that column. Ratios with a zero d2 mean are NaN.
    """
    data = np.asarray(data, dtype=float)
    own = model.hard_labels()
    center = model.centers[own]
    d1 = np.sqrt(((data[:, :-1] - center[:, :-1]) ** 2).sum(axis=1))
    d2 = np.abs(data[:, -1] - center[:, -1])
    labels = assignment.classes[own]
    class_ids = np.asarray(class_ids)
    m1 = np.full(len(class_ids), np.nan)
    m2 = np.full(len(class_ids), np.nan)
    ratio = np.full(len(class_ids), np.nan)
    counts = np.zeros(len(class_ids), dtype=np.int64)
    for i, k in enumerate(class_ids):
        sel = labels == k
        counts[i] = sel.sum()
        if counts[i] == 0:
            continue
        m1[i] = d1[sel].mean()
        m2[i] = d2[sel].mean()
        if m2[i] > 0:
            ratio[i] = m1[i] / m2[i]
    return DistanceDecomposition(class_ids, m1, m2, ratio, counts)
