import numpy as np
import pytest

from landuse.errors import DimensionMismatchError
from landuse.fcm import ClusterModel, FcmConfig
from landuse.labeling import assign_clusters, cell_labels, classify_grid, distance_decomposition
from landuse.raster import GridSpec
from landuse.training import ClassCenters


def centers_of(rows):
    rows = np.asarray(rows, dtype=float)
    return ClassCenters(np.arange(1, len(rows) + 1), rows, np.ones(len(rows), int))


def model_of(centers, membership):
    centers = np.asarray(centers, dtype=float)
    return ClusterModel(centers, np.asarray(membership, dtype=float), 0.0, [], FcmConfig(len(centers)))


def test_cluster_on_class_center():
    cls = centers_of([[0, 0], [5, 5], [9, 0]])
    a = assign_clusters(model_of([[5, 5], [8, 1]], np.eye(2)), cls)
    assert a.classes.tolist() == [2, 3]


def test_pigeonhole_extra_cluster():
    cls = centers_of([[0, 0], [10, 0], [0, 10]])
    a = assign_clusters(model_of([[0, 1], [10, 1], [1, 10], [0, -1]], np.eye(4)), cls)
    counts = np.bincount(a.classes, minlength=4)[1:]
    assert sorted(counts.tolist()) == [1, 1, 2]
    assert not a.coverage_warning


def test_assign_tie_goes_to_lowest_class():
    a = assign_clusters(model_of([[5, 0]], [[1.0]]), centers_of([[0, 0], [10, 0]]))
    assert a.classes.tolist() == [1]


def test_assign_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        assign_clusters(model_of([[0, 0, 0]], [[1.0]]), centers_of([[0, 0]]))


def test_crisp_membership_labels():
    u = np.array([[1, 0, 0], [0, 0, 1], [0, 1, 0], [0, 0, 1]], dtype=float)
    m = model_of([[0, 0], [5, 5], [9, 0]], u)
    a = assign_clusters(m, centers_of([[9, 0], [0, 0], [5, 5]]))
    assert a.classes.tolist() == [2, 3, 1]
    assert cell_labels(m, a).tolist() == [2, 1, 3, 1]


def test_membership_ties_go_to_lowest_cluster():
    m = model_of([[0.0], [10.0]], [[0.5, 0.5]])
    a = assign_clusters(m, centers_of([[0.0], [10.0]]))
    assert cell_labels(m, a).tolist() == [1]


def test_classify_grid_scatters_and_keeps_nodata():
    spec = GridSpec(0, 0, 1, 2, 2)
    active = np.array([[True, False], [True, True]])
    data = np.array([[0.0, 0.0], [0.0, 0.1], [9.0, 9.0]])
    m = model_of([[0.0, 0.05], [9.0, 9.0]], [[0.9, 0.1], [0.8, 0.2], [0.3, 0.7]])
    r = classify_grid(m, centers_of([[0, 0], [9, 9]]), data, spec, active)
    assert not r.assignment.reclustered
    v = r.raster.classes.values
    assert v[0, 0] == 1 and np.isnan(v[0, 1]) and v[1, 0] == 1 and v[1, 1] == 2
    assert r.raster.max_membership.values[1, 1] == 0.7


def test_collapse_triggers_single_recluster():
    rng = np.random.default_rng(0)
    data = np.concatenate([rng.normal(0, 0.1, (30, 2)), rng.normal(10, 0.1, (30, 2))])
    # both clusters sit near class 1, so the assignment collapses
    m = model_of([[0.0, 0.0], [0.5, 0.5]], np.tile([0.5, 0.5], (60, 1)))
    spec = GridSpec(0, 0, 1, 6, 10)
    r = classify_grid(m, centers_of([[0, 0], [10, 10]]), data, spec, np.ones((6, 10), bool))
    assert r.assignment.reclustered
    assert r.model.n_clusters == 2
    assert sorted(set(r.labels.tolist())) == [1, 2]
    assert r.labels[:30].tolist() == [1] * 30 and r.labels[30:].tolist() == [2] * 30


def test_decomposition_zero_pattern_distance():
    data = np.array([[0.5, 0.5, 0.2], [0.5, 0.5, 0.6]])
    m = model_of([[0.5, 0.5, 0.4]], [[1.0], [1.0]])
    a = assign_clusters(m, centers_of([[0.5, 0.5, 0.4], [0, 1, 0]]))
    dd = distance_decomposition(data, m, a, [1, 2])
    assert dd.d1[0] == 0 and dd.ratio[0] == 0
    assert dd.d2[0] == pytest.approx(0.2)
    assert np.isnan(dd.ratio[1]) and dd.n_cells.tolist() == [2, 0]


def test_decomposition_beta_zero_undefined():
    data = np.array([[0.2, 0.8, 0.0], [0.6, 0.4, 0.0]])
    m = model_of([[0.4, 0.6, 0.0]], [[1.0], [1.0]])
    a = assign_clusters(m, centers_of([[0.4, 0.6, 0.0], [1, 0, 0]]))
    dd = distance_decomposition(data, m, a, [1, 2])
    assert dd.d2[0] == 0 and np.isnan(dd.ratio[0]) and np.isnan(dd.average_ratio)


def test_decomposition_identity_per_cell():
    rng = np.random.default_rng(3)
    data = rng.random((50, 6))
    centers = rng.random((3, 6))
    u = rng.dirichlet(np.ones(3), size=50)
    m = model_of(centers, u)
    own = centers[m.hard_labels()]
    d1 = np.linalg.norm(data[:, :-1] - own[:, :-1], axis=1)
    d2 = np.abs(data[:, -1] - own[:, -1])
    assert np.allclose(((data - own) ** 2).sum(axis=1), d1**2 + d2**2, rtol=0, atol=1e-12)


def test_average_ratio_is_mean_of_class_ratios():
    data = np.array([[0.0, 0.0, 1.0], [3.0, 0.0, 0.5], [10.0, 10.0, 3.0]])
    m = model_of([[0.0, 0.0, 0.0], [10.0, 10.0, 1.0]], [[1, 0], [1, 0], [0, 1]])
    a = assign_clusters(m, centers_of([[0, 0, 0], [10, 10, 1]]))
    dd = distance_decomposition(data, m, a, [1, 2])
    # class 1: d1 mean 1.5, d2 mean 0.75 ; class 2: d1 0, d2 2
    assert dd.ratio.tolist() == [2.0, 0.0]
    assert dd.average_ratio == 1.0
