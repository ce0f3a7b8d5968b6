"""Pipeline stages.

Each stage reads its inputs from files (the raw data or artifacts an
earlier stage left in ``out_dir``) and writes its own artifacts there,
so running the stages one by one produces exactly what :func:`run_pipeline`
produces.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import io
from .config import PipelineConfig
from .errors import InputError, LandUseError, StageError
from .evaluation import (
    alpha_cut_analysis,
    confusion_matrix,
    density_analysis,
    detection_rate,
    entropy_analysis,
    majority_truth,
    posterior_confusion,
)
from .fcm import ClusterModel, FcmConfig, select_cluster_count
from .features import DayMode, combine, day_distance_matrix, day_mode_aggregate, pattern_layers, volume_transform
from .labeling import ClusterAssignment, classify_grid, distance_decomposition, to_raster
from .raster import GridSpec, RasterGrid, read_ascii, write_ascii
from .spatial import build_voronoi, idw_interpolate, study_bounds, towers_per_cell, volume_density
from .training import ClassCenters, TrainingSet, beta_sweep, class_centers

log = logging.getLogger(__name__)

DAY_NAMES = ("mon", "tue", "wed", "thu", "fri", "sat", "sun")
STAGES = ("grid", "train", "cluster", "classify", "evaluate")


def _stage(name):
    def wrap(fn):
        def run(cfg: PipelineConfig, *args, **kwargs):
            log.info("stage %s", name)
            try:
                return fn(cfg, *args, **kwargs)
            except StageError:
                raise
            except (LandUseError, FileNotFoundError, OSError, ValueError) as exc:
                raise StageError(name, exc) from exc
        run.__name__ = fn.__name__
        run.__doc__ = fn.__doc__
        return run
    return wrap


def _out(cfg, name):
    return Path(cfg.out_dir) / name


def _grid_spec(cfg: PipelineConfig, sites):
    if None not in (cfg.x_ll, cfg.y_ll, cfg.n_rows, cfg.n_cols):
        spec = GridSpec(cfg.x_ll, cfg.y_ll, cfg.cell_size, cfg.n_rows, cfg.n_cols)
        return spec, cfg.bounds or spec.bounds
    if cfg.bounds is not None:
        return GridSpec.covering(cfg.bounds, cfg.cell_size), cfg.bounds
    truth = cfg.path("truth")
    if truth.is_file():
        bounds = read_ascii(truth).spec.bounds
        return GridSpec.covering(bounds, cfg.cell_size), bounds
    bounds = study_bounds(sites, cfg.cell_size)
    return GridSpec.covering(bounds, cfg.cell_size), bounds


def gridded_weekly(cfg: PipelineConfig, sites, counts, spec: GridSpec, bounds):
    """Hourly call densities interpolated onto the grid, ``(n_rows, n_cols, 168)``."""
    diagram = build_voronoi(sites, bounds)
    density = volume_density(diagram, counts)
    positions = np.array([(s.x, s.y) for s in sites])
    return diagram, idw_interpolate(positions, density, spec, cfg.idw_power, cfg.idw_k).values


@_stage("grid")
def stage_grid(cfg: PipelineConfig):
    """Towers + calls -> pattern layers, volume layer, tower counts."""
    sites = io.read_towers(cfg.path("towers"))
    counts = io.read_calls(cfg.path("calls"), sites)
    spec, bounds = _grid_spec(cfg, sites)
    diagram, weekly = gridded_weekly(cfg, sites, counts, spec, bounds)
    series = day_mode_aggregate(weekly, cfg.day_mode)
    patterns, active = pattern_layers(series)
    totals = series.sum(axis=2) if cfg.volume_totals == "mode" else weekly.sum(axis=2)
    volume = np.full(spec.shape, np.nan)
    volume[active] = volume_transform(totals[active])

    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    np.save(out / "pattern.npy", patterns)
    np.save(out / "totals.npy", np.where(active, totals, np.nan))
    write_ascii(out / "volume.asc", RasterGrid(spec, volume))
    write_ascii(out / "tower_counts.asc", towers_per_cell(sites, spec))
    dd = day_distance_matrix(weekly.reshape(-1, weekly.shape[-1]), cfg.day_distance_city)
    io.write_csv(out / "day_distance.csv", ("day",) + DAY_NAMES,
                 ([DAY_NAMES[i]] + dd[i].tolist() for i in range(7)))
    io.write_csv(out / "voronoi.csv", ("tower_id", "area", "weekly_density"),
                 ((t, a, d) for t, a, d in zip(diagram.tower_ids, diagram.areas.tolist(),
                                               (counts.sum(axis=1) / diagram.areas).tolist())))
    io.write_keyvalue(out / "grid.txt", {
        "x_ll": spec.x_ll, "y_ll": spec.y_ll, "cell_size": spec.cell_size,
        "n_rows": spec.n_rows, "n_cols": spec.n_cols,
        "bounds": ",".join(io.fmt(b) for b in bounds),
        "day_mode": cfg.day_mode.value, "series_length": cfg.day_mode.length,
        "active_cells": int(active.sum()), "inactive_cells": int((~active).sum()),
        "n_towers": len(sites),
    })
    if (~active).any():
        log.warning("%d cells without activity are excluded", int((~active).sum()))


@dataclass
class Features:
    spec: GridSpec
    patterns: np.ndarray  # (n_rows, n_cols, T), NaN where inactive
    volume: np.ndarray  # (n_rows, n_cols), NaN where inactive

    @property
    def active(self):
        return ~np.isnan(self.volume)

    def active_rows(self):
        a = self.active
        return self.patterns[a], self.volume[a]

    def series(self, beta):
        x, y = self.active_rows()
        return combine(x, y, beta)


def load_features(cfg: PipelineConfig) -> Features:
    vol = read_ascii(_out(cfg, "volume.asc"))
    patterns = np.load(_out(cfg, "pattern.npy"))
    if patterns.shape[:2] != vol.spec.shape:
        raise InputError("pattern.npy does not match volume.asc")
    return Features(vol.spec, patterns, vol.values)


def training_set(cfg: PipelineConfig, feats: Features) -> TrainingSet:
    xy, labels = io.read_samples(cfg.path("samples"))
    row, col = feats.spec.locate(xy[:, 0], xy[:, 1])
    inside = row >= 0
    cell = np.where(inside, row * feats.spec.n_cols + col, -1)
    ok = inside.copy()
    ok[inside] = feats.active.ravel()[cell[inside]]
    if (~ok).any():
        log.warning("dropping %d samples outside the grid or in inactive cells", int((~ok).sum()))
    cell = cell[ok]
    r, c = np.divmod(cell, feats.spec.n_cols)
    return TrainingSet(cell, labels[ok], feats.patterns[r, c], feats.volume[r, c])


def _class_ids(cfg):
    return [c.class_id for c in io.read_classes(cfg.path("classes"))]


def _centers_rows(centers: ClassCenters):
    for k, n, z in zip(centers.class_ids.tolist(), centers.counts.tolist(), centers.centers.tolist()):
        yield [k, n] + z


def _read_centers(path) -> ClassCenters:
    _, t = io.read_table(path)
    return ClassCenters(t[:, 0].astype(np.int64), t[:, 2:], t[:, 1].astype(np.int64))


def _read_beta(cfg):
    kv = io.read_keyvalue(_out(cfg, "training.txt"))
    return float(kv["beta_star"])


@_stage("train")
def stage_train(cfg: PipelineConfig):
    """Labelled samples -> beta curve, selected beta and class centers."""
    feats = load_features(cfg)
    ids = _class_ids(cfg)
    ts = training_set(cfg, feats)
    sweep = beta_sweep(ts, cfg.beta_grid, ids, cfg.leave_one_out)
    centers = class_centers(ts.series(sweep.beta_star), ts.labels, ids)
    T = feats.patterns.shape[2]
    io.write_csv(_out(cfg, "beta_curve.csv"), ("beta", "f"), zip(sweep.grid, sweep.errors))
    io.write_csv(_out(cfg, "class_centers.csv"),
                 ("class_id", "n_samples") + tuple(f"z_{j + 1}" for j in range(T + 1)),
                 _centers_rows(centers))
    io.write_keyvalue(_out(cfg, "training.txt"), {
        "beta_star": sweep.beta_star, "f_star": sweep.f_star,
        "plateau_lo": sweep.plateau[0], "plateau_hi": sweep.plateau[1],
        "n_samples": len(ts), "f_beta0": sweep.errors[0], "f_last": sweep.errors[-1],
        "leave_one_out": cfg.leave_one_out,
    })
    return sweep


def fcm_config(cfg: PipelineConfig, c=2) -> FcmConfig:
    return FcmConfig(c, cfg.fcm_m, cfg.fcm_tol, cfg.fcm_max_iter, cfg.fcm_restarts, cfg.seed)


def cluster_range(cfg: PipelineConfig, k, n):
    lo, hi = cfg.c_range if cfg.c_range is not None else (k, 2 * k)
    return max(2, lo), min(hi, n - 1)


def cluster_data(cfg, data, k):
    return select_cluster_count(data, cluster_range(cfg, k, len(data)), fcm_config(cfg))


def _write_model(cfg, spec, active, model, centers_name, membership_name):
    rows, cols = np.nonzero(active)
    c = model.n_clusters
    io.write_csv(_out(cfg, centers_name), ("cluster",) + tuple(f"z_{j + 1}" for j in range(model.centers.shape[1])),
                 ([j + 1] + model.centers[j].tolist() for j in range(c)))
    io.write_csv(_out(cfg, membership_name), ("cell_row", "cell_col") + tuple(f"u_{j + 1}" for j in range(c)),
                 ([r, q] + u for r, q, u in zip(rows.tolist(), cols.tolist(), model.membership.tolist())))


def _read_model(cfg, centers_name, membership_name, active) -> ClusterModel:
    _, centers = io.read_table(_out(cfg, centers_name))
    _, mem = io.read_table(_out(cfg, membership_name))
    rows, cols = np.nonzero(active)
    if len(mem) != len(rows) or not (np.array_equal(mem[:, 0], rows) and np.array_equal(mem[:, 1], cols)):
        raise InputError(f"{membership_name} does not match the active cells")
    centers = centers[:, 1:]
    return ClusterModel(centers, mem[:, 2:], math.nan, [], fcm_config(cfg, len(centers)))


@_stage("cluster")
def stage_cluster(cfg: PipelineConfig):
    """Combined series at the selected beta -> FCM with cluster-count selection."""
    feats = load_features(cfg)
    beta = _read_beta(cfg)
    k = len(_class_ids(cfg))
    data = feats.series(beta)
    sel = cluster_data(cfg, data, k)
    io.write_csv(_out(cfg, "validity.csv"), ("c", "score", "intra", "inter"),
                 ((s.c, s.score, s.intra, s.inter) for s in sel.scores))
    _write_model(cfg, feats.spec, feats.active, sel.best_model, "cluster_centers.csv", "membership.csv")
    io.write_keyvalue(_out(cfg, "cluster.txt"), {
        "c_star": sel.best_c, "beta": beta, "objective": sel.best_model.objective,
        "iterations": sel.best_model.n_iter, "converged": sel.best_model.converged,
    })
    return sel


@_stage("classify")
def stage_classify(cfg: PipelineConfig):
    """Clusters -> land-use classes, classified and max-membership rasters."""
    feats = load_features(cfg)
    beta = _read_beta(cfg)
    centers = _read_centers(_out(cfg, "class_centers.csv"))
    model = _read_model(cfg, "cluster_centers.csv", "membership.csv", feats.active)
    result = classify_grid(model, centers, feats.series(beta), feats.spec, feats.active)
    io.write_csv(_out(cfg, "assignment.csv"), ("cluster", "class_id"),
                 ((j + 1, k) for j, k in enumerate(result.assignment.classes.tolist())))
    _write_model(cfg, feats.spec, feats.active, result.model, "final_centers.csv", "final_membership.csv")
    write_ascii(_out(cfg, "classified.asc"), result.raster.classes)
    write_ascii(_out(cfg, "max_membership.asc"), result.raster.max_membership)
    io.write_keyvalue(_out(cfg, "classify.txt"), {
        "reclustered": result.assignment.reclustered,
        "c_final": result.model.n_clusters,
        "coverage_warning": result.assignment.coverage_warning,
    })
    return result


def baseline_detection(cfg, feats: Features, ts: TrainingSet, ids, beta, truth_major):
    """Full cluster/label run at a fixed beta, scored against the truth."""
    data = feats.series(beta)
    centers = class_centers(ts.series(beta), ts.labels, ids)
    sel = cluster_data(cfg, data, len(ids))
    result = classify_grid(sel.best_model, centers, data, feats.spec, feats.active)
    return sel.best_c, detection_rate(result.raster.classes, truth_major)


def _rate(v):
    return "" if v is None or (isinstance(v, float) and math.isnan(v)) else v


@_stage("evaluate")
def stage_evaluate(cfg: PipelineConfig):
    """Predictions vs truth -> report and uncertainty tables."""
    feats = load_features(cfg)
    classes = io.read_classes(cfg.path("classes"))
    ids = [c.class_id for c in classes]
    k = len(ids)
    truth = read_ascii(cfg.path("truth"))
    major, occupancy = majority_truth(truth, feats.spec, k)
    pred = read_ascii(_out(cfg, "classified.asc"))
    mm = read_ascii(_out(cfg, "max_membership.asc"))
    towers = read_ascii(_out(cfg, "tower_counts.asc"))
    beta = _read_beta(cfg)
    c_star = int(io.read_keyvalue(_out(cfg, "cluster.txt"))["c_star"])
    model = _read_model(cfg, "final_centers.csv", "final_membership.csv", feats.active)
    _, amap = io.read_table(_out(cfg, "assignment.csv"))
    assignment = ClusterAssignment(amap[:, 1].astype(np.int64), n_classes=k)
    ts = training_set(cfg, feats)

    rate = detection_rate(pred, major)
    cm = confusion_matrix(pred, major, k)
    pattern_centers = class_centers(ts.patterns, ts.labels, ids)
    post = posterior_confusion(feats.patterns, pattern_centers, major)
    entropy, bins = entropy_analysis(occupancy, pred, major, cfg.entropy_bins, k)
    density = density_analysis(pred, major, towers)
    alpha = alpha_cut_analysis(mm, pred, major, cfg.alphas)
    dd = distance_decomposition(feats.series(beta), model, assignment, ids)

    names = [c.name for c in classes]
    _write_confusion(_out(cfg, "confusion.csv"), cm, names)
    _write_confusion(_out(cfg, "posterior_confusion.csv"), post, names)
    io.write_csv(_out(cfg, "entropy_bins.csv"), ("bin", "entropy_lo", "entropy_hi", "n_cells", "error_rate"),
                 ((i + 1, b.lo, b.hi, b.n_cells, _rate(b.error_rate)) for i, b in enumerate(bins)))
    io.write_csv(_out(cfg, "density.csv"), ("towers", "n_cells", "detection_rate"),
                 ((int(r.key), r.n_cells, r.detection_rate) for r in density))
    io.write_csv(_out(cfg, "alpha_cut.csv"), ("alpha", "n_cells", "detection_rate", "retained_fraction"),
                 ((r.alpha, r.n_cells, _rate(r.detection_rate), r.retained_fraction) for r in alpha))
    io.write_csv(_out(cfg, "d1_d2.csv"), ("class_id", "name", "n_cells", "mean_d1", "mean_d2", "ratio"),
                 ((i, n, c, _rate(a), _rate(b), _rate(r)) for i, n, c, a, b, r in
                  zip(ids, names, dd.n_cells.tolist(), dd.d1.tolist(), dd.d2.tolist(), dd.ratio.tolist())))
    write_ascii(_out(cfg, "entropy.asc"), RasterGrid(feats.spec, entropy))
    write_ascii(_out(cfg, "truth_majority.asc"), major)

    report = {
        "detection_rate": rate,
        "beta_star": beta,
        "c_star": c_star,
        "average_d1_d2_ratio": dd.average_ratio,
        "evaluated_cells": int((~np.isnan(pred.values) & ~np.isnan(major.values)).sum()),
    }
    if cfg.baselines:
        rows = []
        for label, b in (("pattern_only", 0.0), ("volume_only", math.inf)):
            if b == beta:
                # identical data and seed: the main run is this baseline
                c_b, r_b = c_star, rate
            else:
                c_b, r_b = baseline_detection(cfg, feats, ts, ids, b, major)
            report[f"{label}_detection_rate"] = r_b
            report[f"{label}_c_star"] = c_b
            rows.append((label, b, c_b, r_b))
        io.write_csv(_out(cfg, "baselines.csv"), ("label", "beta", "c_star", "detection_rate"), rows)
    io.write_keyvalue(_out(cfg, "report.txt"), report)
    return report


def _write_confusion(path, cm, names):
    rates = cm.rates
    io.write_csv(path, ("true_class",) + tuple(names) + ("support",),
                 ([names[i]] + [_rate(v) for v in rates[i].tolist()] + [int(cm.support[i])]
                  for i in range(len(names))))


def run_pipeline(cfg: PipelineConfig):
    """All stages in order; evaluation runs only when a truth raster exists."""
    Path(cfg.out_dir).mkdir(parents=True, exist_ok=True)
    stage_grid(cfg)
    stage_train(cfg)
    stage_cluster(cfg)
    stage_classify(cfg)
    if cfg.path("truth").is_file():
        return stage_evaluate(cfg)
    log.warning("no truth raster at %s; skipping evaluation", cfg.path("truth"))
    return None


def write_dataset(ds, out_dir):
    """Write a synthetic dataset in the pipeline's input formats."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    io.write_towers(out / "towers.csv", ds.towers)
    io.write_calls(out / "calls.csv", ds.towers, ds.counts)
    write_ascii(out / "truth.asc", ds.truth)
    io.write_samples(out / "samples.csv", ds.samples)
    io.write_classes(out / "classes.csv", ds.classes)
    io.write_keyvalue(out / "manifest.txt", ds.config.manifest())
