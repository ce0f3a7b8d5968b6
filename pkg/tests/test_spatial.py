import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.spatial import cKDTree

from landuse.errors import DuplicateSiteError, EmptySamplesError, EmptySitesError, InputError, MissingTowerError
from landuse.raster import GridSpec
from landuse.spatial import (
    TowerSite,
    build_voronoi,
    idw_interpolate,
    study_bounds,
    towers_per_cell,
    volume_density,
)


def sites_from(xy):
    return [TowerSite(f"t{i}", float(x), float(y)) for i, (x, y) in enumerate(xy)]


def raster_areas(xy, bounds, res):
    """Nearest-site pixel counting at resolution ``res``."""
    x0, y0, x1, y1 = bounds
    gx = np.arange(x0 + res / 2, x1, res)
    gy = np.arange(y0 + res / 2, y1, res)
    px, py = np.meshgrid(gx, gy)
    _, owner = cKDTree(xy).query(np.column_stack([px.ravel(), py.ravel()]))
    return np.bincount(owner, minlength=len(xy)) * res * res


def test_two_sites_bisector():
    d = build_voronoi(sites_from([(0, 0), (10, 0)]), (-5, -5, 15, 5))
    assert d.areas.tolist() == [100.0, 100.0]
    assert np.allclose(sorted(set(d.polygons[0][:, 0])), [-5.0, 5.0])


def test_single_site_is_whole_rectangle():
    d = build_voronoi(sites_from([(3, 4)]), (0, 0, 20, 20))
    assert d.areas[0] == 400.0


def test_five_sites_match_fine_rasterization():
    rng = np.random.default_rng(7)
    bounds = (0.0, 0.0, 60.0, 40.0)
    xy = rng.uniform((0, 0), (60, 40), size=(5, 2))
    d = build_voronoi(sites_from(xy), bounds)
    oracle = raster_areas(xy, bounds, 0.1)
    assert np.all(np.abs(d.areas - oracle) <= 0.01 * oracle)


def test_collinear_sites():
    xy = [(i * 10.0, 5.0) for i in range(6)]
    d = build_voronoi(sites_from(xy), (-5, 0, 55, 10))
    assert np.allclose(d.areas, 100.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 300), st.integers(0, 2**32 - 1))
def test_area_conservation(n, seed):
    rng = np.random.default_rng(seed)
    xy = rng.uniform(0, 1000, size=(n, 2))
    bounds = study_bounds(sites_from(xy), 50.0)
    d = build_voronoi(sites_from(xy), bounds)
    total = (bounds[2] - bounds[0]) * (bounds[3] - bounds[1])
    assert np.all(d.areas > 0)
    assert abs(d.areas.sum() - total) <= 1e-6 * total


def test_nearest_site_owns_polygon_vertices_interior():
    rng = np.random.default_rng(3)
    xy = rng.uniform(0, 100, size=(30, 2))
    d = build_voronoi(sites_from(xy), (0, 0, 100, 100))
    tree = cKDTree(xy)
    for i, poly in enumerate(d.polygons):
        centroid = poly.mean(axis=0)
        assert tree.query(centroid)[1] == i


def test_site_errors():
    with pytest.raises(EmptySitesError):
        build_voronoi([], (0, 0, 1, 1))
    with pytest.raises(DuplicateSiteError):
        build_voronoi(sites_from([(1, 1), (1, 1)]), (0, 0, 2, 2))
    with pytest.raises(InputError):
        build_voronoi(sites_from([(5, 5)]), (0, 0, 2, 2))


def test_volume_density_examples():
    one = build_voronoi([TowerSite("a", 5, 5)], (0, 0, 20, 20))
    assert volume_density(one, {"a": 800.0}).tolist() == [2.0]
    assert volume_density(one, {"a": 0.0}).tolist() == [0.0]
    two = build_voronoi(sites_from([(0, 0), (10, 0)]), (-5, -5, 15, 5))
    assert volume_density(two, np.array([100.0, 300.0])).tolist() == [1.0, 3.0]
    with pytest.raises(MissingTowerError):
        volume_density(two, {"zz": 1.0})


def test_volume_density_layers():
    two = build_voronoi(sites_from([(0, 0), (10, 0)]), (-5, -5, 15, 5))
    dens = volume_density(two, np.array([[100.0, 200.0], [300.0, 0.0]]))
    assert dens.tolist() == [[1.0, 2.0], [3.0, 0.0]]


def test_idw_single_sample_constant():
    spec = GridSpec(0, 0, 10, 4, 5)
    r = idw_interpolate([(13.0, 7.0)], [7.0], spec)
    assert np.all(r.values == 7.0)


def test_idw_exact_hit():
    spec = GridSpec(0, 0, 10, 1, 3)
    r = idw_interpolate([(15.0, 5.0), (0.0, 0.0), (30.0, 10.0)], [3.5, 100.0, -4.0], spec)
    assert r.values[0, 1] == 3.5


def test_idw_hand_value():
    # cell center at (1, 0): weights 1/1 and 1/9
    spec = GridSpec(0.5, -0.5, 1.0, 1, 1)
    r = idw_interpolate([(0.0, 0.0), (4.0, 0.0)], [0.0, 8.0], spec, power=2, k_neighbors=2)
    assert r.values[0, 0] == pytest.approx(0.8, abs=1e-15)


def test_idw_errors():
    spec = GridSpec(0, 0, 1, 1, 1)
    with pytest.raises(EmptySamplesError):
        idw_interpolate(np.zeros((0, 2)), [], spec)
    with pytest.raises(InputError):
        idw_interpolate([(0, 0)], [1.0], spec, power=0)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 40), st.integers(0, 2**32 - 1), st.integers(1, 15))
def test_idw_bounded_and_translation_invariant(n, seed, k):
    rng = np.random.default_rng(seed)
    pos = rng.uniform(0, 500, size=(n, 2))
    vals = rng.normal(size=n)
    spec = GridSpec(0, 0, 50, 10, 10)
    a = idw_interpolate(pos, vals, spec, 2.0, k).values
    assert a.min() >= vals.min() and a.max() <= vals.max()
    shift = np.array([1234.0, -5678.0])
    moved = GridSpec(spec.x_ll + shift[0], spec.y_ll + shift[1], 50, 10, 10)
    b = idw_interpolate(pos + shift, vals, moved, 2.0, k).values
    assert np.allclose(a, b, rtol=0, atol=1e-12)


def test_idw_vector_layers_match_scalar():
    rng = np.random.default_rng(1)
    pos = rng.uniform(0, 100, size=(20, 2))
    vals = rng.random((20, 3))
    spec = GridSpec(0, 0, 10, 10, 10)
    stacked = idw_interpolate(pos, vals, spec).values
    for j in range(3):
        assert np.array_equal(stacked[..., j], idw_interpolate(pos, vals[:, j], spec).values)


def test_towers_per_cell():
    spec = GridSpec(0, 0, 10, 3, 3)
    assert towers_per_cell([], spec).values.sum() == 0
    r = towers_per_cell(sites_from([(1, 1), (2, 2), (3, 3)]), spec)
    assert r.values[2, 0] == 3 and r.values.sum() == 3
    # shared edge at x=10 goes to the western cell, y=20 to the northern one
    r = towers_per_cell(sites_from([(10, 25), (5, 20)]), spec)
    assert r.values[0, 0] == 2


def test_towers_per_cell_conservation():
    rng = np.random.default_rng(5)
    xy = rng.uniform(-20, 120, size=(100, 2))
    spec = GridSpec(0, 0, 10, 10, 10)
    inside = np.sum((xy >= 0).all(axis=1) & (xy <= 100).all(axis=1))
    assert towers_per_cell(sites_from(xy), spec).values.sum() == inside
