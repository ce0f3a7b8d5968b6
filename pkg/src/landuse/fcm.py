"""Fuzzy c-means clustering, cluster-count selection and alpha cuts."""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InputError, SingleClusterError, TooFewPointsError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FcmConfig:
    n_clusters: int = 2
    m: float = 2.0
    tol: float = 1e-5
    max_iter: int = 300
    restarts: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.n_clusters < 1:
            raise InputError("n_clusters must be >= 1")
        if not self.m > 1:
            raise InputError("fuzzifier m must be > 1")
        if not self.tol > 0:
            raise InputError("tol must be > 0")
        if self.max_iter < 1 or self.restarts < 1:
            raise InputError("max_iter and restarts must be >= 1")


@dataclass
class ClusterModel:
    centers: np.ndarray
    membership: np.ndarray
    objective: float
    trace: list
    config: FcmConfig
    n_iter: int = 0
    converged: bool = False
    degenerate: bool = False
    restart: int = 0

    @property
    def n_clusters(self):
        return self.centers.shape[0]

    def hard_labels(self):
        """Index of the largest membership per row (ties -> lowest index)."""
        return np.argmax(self.membership, axis=1)


def squared_distances(data, centers, data_sq=None):
    """Pairwise squared Euclidean distances, shape ``(n, c)``.

    ``data_sq`` optionally supplies the precomputed squared row norms.
    """
    if data_sq is None:
        data_sq = np.einsum("ij,ij->i", data, data)
    xx = data_sq[:, None]
    cc = np.einsum("ij,ij->i", centers, centers)[None, :]
    d2 = xx + cc - 2.0 * (data @ centers.T)
    np.maximum(d2, 0.0, out=d2)
    # the expanded form cannot produce exact zeros; recover them where a
    # row coincides with a center to within rounding
    close = d2 <= 1e-13 * (xx + cc)
    if close.any():
        for i, k in zip(*np.nonzero(close)):
            diff = data[i] - centers[k]
            d2[i, k] = float(diff @ diff)
    return d2


def memberships(d2, m=2.0):
    """Membership matrix from squared distances.

    Rows with a zero distance put all their weight on the coinciding
    center(s), split evenly when several coincide.
    """
    zero = d2 < 1e-300
    with np.errstate(divide="ignore"):
        if m == 2.0:
            w = 1.0 / d2
        else:
            w = d2 ** (-1.0 / (m - 1.0))
    hit = zero.any(axis=1)
    if hit.any():
        w[hit] = zero[hit].astype(float)
    u = w / w.sum(axis=1, keepdims=True)
    return u


def _objective(u, d2, m):
    um = u * u if m == 2.0 else u ** m
    return float(np.sum(um * d2))


def _centers(data, u, m):
    um = u * u if m == 2.0 else u ** m
    return (um.T @ data) / um.sum(axis=0)[:, None]


class _Workspace:
    """Data prepared once per fit, in a cluster-major ``(c, n)`` layout.

    The data are centred and constant columns dropped; neither changes a
    distance, but both cut rounding error and memory traffic.
    """

    def __init__(self, data):
        self.offset = data.mean(axis=0)
        self.keep = np.ptp(data, axis=0) > 0
        x = data[:, self.keep] - self.offset[self.keep]
        self.x = np.ascontiguousarray(x)
        self.xt = np.ascontiguousarray(x.T)
        self.xx = np.einsum("ij,ij->i", x, x)

    def distances(self, v):
        """Squared distances ``(c, n)`` from reduced centers ``v``."""
        vv = np.einsum("ij,ij->i", v, v)[:, None]
        d2 = v @ self.xt
        d2 *= -2.0
        d2 += self.xx
        d2 += vv
        np.maximum(d2, 0.0, out=d2)
        close = d2 <= 1e-13 * (self.xx + vv)
        if close.any():
            for k, i in zip(*np.nonzero(close)):
                diff = self.x[i] - v[k]
                d2[k, i] = float(diff @ diff)
        return d2

    def full_centers(self, v):
        out = np.repeat(self.offset[None, :], len(v), axis=0)
        out[:, self.keep] += v
        return out


def _memberships_t(d2, m):
    """Column-normalised memberships from ``(c, n)`` distances, plus the objective."""
    zero = d2 < 1e-300
    with np.errstate(divide="ignore"):
        w = 1.0 / d2 if m == 2.0 else d2 ** (-1.0 / (m - 1.0))
    hit = np.flatnonzero(zero.any(axis=0)) if zero.any() else ()
    if len(hit):
        w[:, hit] = zero[:, hit]
    s = w.sum(axis=0)
    u = w / s
    if m == 2.0:
        # sum_k u^2 d = 1/s per point; points on a center contribute 0
        inv = 1.0 / s
        if len(hit):
            inv[hit] = 0.0
        obj = float(inv.sum())
    else:
        obj = float(np.sum(u ** m * d2))
    return u, obj


def _single_run(ws: _Workspace, cfg: FcmConfig, seed):
    n = ws.x.shape[0]
    c = cfg.n_clusters
    rng = np.random.default_rng(seed)
    u = np.ascontiguousarray(rng.dirichlet(np.ones(c), size=n).T)
    centers = None
    trace = []
    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        um = u * u if cfg.m == 2.0 else u ** cfg.m
        new_centers = (um @ ws.x) / um.sum(axis=1)[:, None]
        u, obj = _memberships_t(ws.distances(new_centers), cfg.m)
        trace.append(obj)
        shift = np.inf if centers is None else float(np.max(np.linalg.norm(new_centers - centers, axis=1)))
        centers = new_centers
        if shift < cfg.tol:
            converged = True
            break
    return ws.full_centers(centers), np.ascontiguousarray(u.T), trace, it, converged


def fcm_fit(data, config: FcmConfig) -> ClusterModel:
    """Fit FCM with ``config.restarts`` Dirichlet-initialised runs.

    Restart ``r`` is seeded with ``config.seed + r``; the run with the
    lowest final objective wins, ties going to the earliest restart.
    """
    data = np.ascontiguousarray(data, dtype=float)
    if data.ndim != 2:
        raise InputError("data must be a 2-D array")
    if not np.isfinite(data).all():
        raise InputError("data must be finite")
    n = data.shape[0]
    c = config.n_clusters
    if n < c:
        raise TooFewPointsError(f"{n} points cannot form {c} clusters")

    if c == 1:
        center = data.mean(axis=0, keepdims=True)
        d2 = squared_distances(data, center)
        obj = float(d2.sum())
        return ClusterModel(center, np.ones((n, 1)), obj, [obj], config, 1, True)

    ws = _Workspace(data)
    best = None
    for r in range(config.restarts):
        centers, u, trace, n_iter, converged = _single_run(ws, config, config.seed + r)
        if best is None or trace[-1] < best.objective:
            best = ClusterModel(centers, u, trace[-1], trace, config, n_iter, converged, restart=r)
    if not ws.keep.any():
        best.degenerate = True
        warnings.warn("all points identical: centers duplicated, memberships uniform", RuntimeWarning)
    if not best.converged:
        log.info("FCM c=%d stopped at max_iter=%d", c, config.max_iter)
    return best


def predict_memberships(model: ClusterModel, data):
    return memberships(squared_distances(np.asarray(data, float), model.centers), model.config.m)


@dataclass(frozen=True)
class ValidityScore:
    c: int
    score: float
    intra: float = float("nan")
    inter: float = float("nan")


def validity_index(model: ClusterModel, data) -> ValidityScore:
    """Compactness over separation: mean squared distance to the nearest
    center divided by the smallest squared distance between two centers."""
    c = model.n_clusters
    if c < 2:
        raise SingleClusterError("validity index needs at least two clusters")
    data = np.asarray(data, dtype=float)
    intra = float(squared_distances(data, model.centers).min(axis=1).mean())
    cd = squared_distances(model.centers, model.centers)
    inter = float(cd[np.triu_indices(c, k=1)].min())
    score = intra / inter if inter > 0 else float("inf")
    return ValidityScore(c, score, intra, inter)


@dataclass
class SelectionResult:
    best_c: int
    scores: list
    models: dict = field(repr=False, default_factory=dict)

    @property
    def best_model(self):
        return self.models[self.best_c]


def select_cluster_count(data, c_range, config: FcmConfig) -> SelectionResult:
    """Fit FCM for every ``c`` in the inclusive range and keep the lowest score."""
    lo, hi = c_range
    n = len(data)
    if lo < 2 or hi > n - 1 or lo > hi:
        raise InputError(f"cluster range [{lo}, {hi}] must lie within [2, {n - 1}]")
    scores = []
    models = {}
    for c in range(lo, hi + 1):
        model = fcm_fit(data, replace(config, n_clusters=c))
        models[c] = model
        scores.append(validity_index(model, data))
        log.debug("c=%d validity=%.6g", c, scores[-1].score)
    best = min(scores, key=lambda s: (s.score, s.c))
    return SelectionResult(best.c, scores, models)


def alpha_cut(model: ClusterModel, alpha):
    """Cells whose largest membership reaches ``alpha``."""
    return model.membership.max(axis=1) >= alpha
