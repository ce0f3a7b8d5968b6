"""Class centers from labelled cells, nearest-center labelling and the
misclassification count used to choose the pattern/volume weight."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionMismatchError, EmptyClassError, EmptySamplesError, InputError
from .features import check_beta, combine

DEFAULT_CLASS_NAMES = ("Residential", "Business", "Commercial", "OpenSpace", "Others")

_TABLE_POINTS = (0.0, 0.15, 0.30, 0.40, 0.50, 0.60, 0.65, 0.70, 0.75, 0.80, 0.90, 1.00, 1.25, 1.50, 2.50)
DEFAULT_BETA_GRID = tuple(sorted({round(v, 2) for v in _TABLE_POINTS} | {round(0.05 * i, 2) for i in range(21)})) + (math.inf,)


@dataclass(frozen=True)
class LandUseClass:
    class_id: int
    name: str


def check_classes(classes: Sequence[LandUseClass]):
    ids = sorted(c.class_id for c in classes)
    if len(ids) < 2:
        raise InputError("at least two land-use classes are required")
    if ids != list(range(1, len(ids) + 1)):
        raise InputError(f"class ids must be contiguous from 1, got {ids}")
    return sorted(classes, key=lambda c: c.class_id)


@dataclass
class TrainingSet:
    """Labelled cells with their pattern and volume parts.

    The combined series depends on beta, so it is rebuilt on demand.
    """

    cells: np.ndarray
    labels: np.ndarray
    patterns: np.ndarray
    volume: np.ndarray

    def __post_init__(self):
        self.cells = np.asarray(self.cells, dtype=np.int64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.patterns = np.asarray(self.patterns, dtype=float)
        self.volume = np.asarray(self.volume, dtype=float)
        if len(self.labels) == 0:
            raise EmptySamplesError("no training samples")
        if not (len(self.cells) == len(self.labels) == len(self.patterns) == len(self.volume)):
            raise InputError("training arrays must have equal length")

    def __len__(self):
        return len(self.labels)

    def series(self, beta):
        return combine(self.patterns, self.volume, beta)


@dataclass
class ClassCenters:
    class_ids: np.ndarray
    centers: np.ndarray
    counts: np.ndarray

    @property
    def k(self):
        return len(self.class_ids)

    def pattern_part(self):
        return self.centers[:, :-1]


def class_centers(series, labels, class_ids=None) -> ClassCenters:
    """Arithmetic mean of the series of each class.

    ``class_ids`` lists the classes that must be present; it defaults to
    the labels seen.
    """
    series = np.atleast_2d(np.asarray(series, dtype=float))
    labels = np.asarray(labels)
    if class_ids is None:
        class_ids = np.unique(labels)
    class_ids = np.asarray(sorted(class_ids), dtype=np.int64)
    centers = np.empty((len(class_ids), series.shape[1]))
    counts = np.empty(len(class_ids), dtype=np.int64)
    for i, k in enumerate(class_ids):
        members = labels == k
        counts[i] = members.sum()
        if counts[i] == 0:
            raise EmptyClassError(f"class {k} has no samples")
        centers[i] = series[members].mean(axis=0)
    return ClassCenters(class_ids, centers, counts)


def center_distances(series, centers):
    """Squared Euclidean distance from each row to each center, ``(n, K)``."""
    series = np.atleast_2d(np.asarray(series, dtype=float))
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    if series.shape[1] != centers.shape[1]:
        raise DimensionMismatchError(
            f"series has {series.shape[1]} components, centers have {centers.shape[1]}"
        )
    out = np.empty((len(series), len(centers)))
    for k, c in enumerate(centers):
        diff = series - c
        out[:, k] = np.einsum("ij,ij->i", diff, diff)
    return out


def nearest_center_classify(series, centers: ClassCenters):
    """Class id of the nearest center per row; ties go to the lowest id.

    A 1-D ``series`` returns a scalar.
    """
    single = np.ndim(series) == 1
    d2 = center_distances(series, centers.centers)
    labels = centers.class_ids[np.argmin(d2, axis=1)]
    return int(labels[0]) if single else labels


def _loo_predict(series, labels, centers: ClassCenters):
    # remove each sample from its own class mean before comparing
    d2 = center_distances(series, centers.centers)
    pos = np.searchsorted(centers.class_ids, labels)
    n_own = centers.counts[pos]
    own = centers.centers[pos]
    with np.errstate(divide="ignore", invalid="ignore"):
        loo_center = (own * n_own[:, None] - series) / (n_own[:, None] - 1)
    diff = series - loo_center
    d_own = np.einsum("ij,ij->i", diff, diff)
    d_own[n_own <= 1] = np.inf
    d2[np.arange(len(series)), pos] = d_own
    return centers.class_ids[np.argmin(d2, axis=1)]


def beta_objective(training: TrainingSet, beta, class_ids=None, leave_one_out=False) -> int:
    """Number of training samples whose nearest class center is the wrong class."""
    beta = check_beta(beta)
    z = training.series(beta)
    centers = class_centers(z, training.labels, class_ids)
    if leave_one_out:
        pred = _loo_predict(z, training.labels, centers)
    else:
        pred = nearest_center_classify(z, centers)
    return int(np.count_nonzero(pred != training.labels))


@dataclass
class BetaSweepResult:
    grid: tuple
    errors: tuple
    beta_star: float
    plateau: tuple

    @property
    def f_star(self):
        return min(self.errors)

    def error_at(self, beta):
        return self.errors[self.grid.index(beta)]


def check_grid(grid):
    grid = tuple(check_beta(b) for b in grid)
    if not grid:
        raise InputError("beta grid is empty")
    if any(b >= a for a, b in zip(grid[1:], grid[:-1])):
        raise InputError("beta grid must be strictly ascending")
    return grid


def beta_sweep(training: TrainingSet, grid=DEFAULT_BETA_GRID, class_ids=None, leave_one_out=False) -> BetaSweepResult:
    """Evaluate the objective over ``grid`` and pick the smallest minimiser.

    The plateau is the contiguous run of minimisers starting at the
    selected beta.
    """
    grid = check_grid(grid)
    errors = tuple(beta_objective(training, b, class_ids, leave_one_out) for b in grid)
    best = min(errors)
    i = errors.index(best)
    j = i
    while j + 1 < len(grid) and errors[j + 1] == best:
        j += 1
    return BetaSweepResult(grid, errors, grid[i], (grid[i], grid[j]))
