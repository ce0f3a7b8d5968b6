import numpy as np
import pytest
from hypothesis import given, strategies as st

from landuse.errors import InputError
from landuse.raster import GridSpec, RasterGrid, read_ascii, write_ascii


def test_covering_grid():
    spec = GridSpec.covering((0.0, 0.0, 1000.0, 450.0), 200.0)
    assert spec.shape == (3, 5)
    assert spec.bounds == (0.0, 0.0, 1000.0, 600.0)


def test_cell_centers_north_first():
    spec = GridSpec(100.0, 50.0, 10.0, 2, 3)
    x, y = spec.cell_centers()
    assert x[0].tolist() == [105.0, 115.0, 125.0]
    assert y[:, 0].tolist() == [65.0, 55.0]


def test_locate_edges_go_north_west():
    spec = GridSpec(0.0, 0.0, 10.0, 2, 2)
    row, col = spec.locate([10.0, 5.0, 0.0, 20.0, 20.1], [10.0, 15.0, 0.0, 20.0, 5.0])
    assert row.tolist() == [0, 0, 1, 0, -1]
    assert col.tolist() == [0, 0, 0, 1, -1]


def test_bad_specs():
    with pytest.raises(InputError):
        GridSpec(0, 0, 0.0, 1, 1)
    with pytest.raises(InputError):
        GridSpec(0, 0, 1.0, 0, 1)
    with pytest.raises(InputError):
        RasterGrid(GridSpec(0, 0, 1.0, 2, 2), np.zeros((2, 3)))
    with pytest.raises(InputError):
        RasterGrid(GridSpec(0, 0, 1.0, 1, 1), np.array([[np.inf]]))


def test_ascii_round_trip(tmp_path):
    spec = GridSpec(12.5, -3.0, 200.0, 2, 3)
    vals = np.array([[0.1, np.nan, 1 / 3], [2.0, -7.25, 1e-17]])
    write_ascii(tmp_path / "r.asc", RasterGrid(spec, vals))
    back = read_ascii(tmp_path / "r.asc")
    assert back.spec == spec
    assert np.array_equal(back.values, vals, equal_nan=True)
    text = (tmp_path / "r.asc").read_text()
    assert text.splitlines()[0] == "ncols 3"
    assert "NODATA_value -9999" in text


def test_ascii_integers_written_plain(tmp_path):
    spec = GridSpec(0.0, 0.0, 200.0, 1, 3)
    write_ascii(tmp_path / "c.asc", RasterGrid(spec, np.array([[1.0, np.nan, 3.0]])))
    assert (tmp_path / "c.asc").read_text().splitlines()[-1] == "1 -9999 3"


def test_ascii_center_header(tmp_path):
    (tmp_path / "c.asc").write_text(
        "ncols 2\nnrows 1\nxllcenter 100\nyllcenter 100\ncellsize 200\nNODATA_value -1\n4 -1\n"
    )
    r = read_ascii(tmp_path / "c.asc")
    assert (r.spec.x_ll, r.spec.y_ll) == (0.0, 0.0)
    assert np.isnan(r.values[0, 1]) and r.values[0, 0] == 4


@given(st.lists(st.floats(-1e6, 1e6, allow_nan=False).filter(lambda v: v != -9999.0), min_size=6, max_size=6))
def test_ascii_float_round_trip_property(tmp_path_factory, values):
    path = tmp_path_factory.mktemp("r") / "x.asc"
    spec = GridSpec(0.0, 0.0, 5.0, 2, 3)
    vals = np.array(values).reshape(2, 3)
    write_ascii(path, RasterGrid(spec, vals))
    assert np.array_equal(read_ascii(path).values, vals)
