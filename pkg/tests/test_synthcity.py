import filecmp
from dataclasses import replace

import numpy as np
import pytest

from landuse.errors import InputError, UnsatisfiableError
from landuse.features import DayMode, day_mode_aggregate
from landuse.io import read_keyvalue, read_table
from landuse.pipeline import write_dataset
from landuse.synthcity import (
    SHAPES,
    ClassProfile,
    SynthConfig,
    apply_overrides,
    config_from_manifest,
    generate_city,
    matched_volume,
    preset,
    scenario_presets,
)

from conftest import run_cli


def small(**kw):
    base = dict(
        classes=(ClassProfile(1, "A", "residential", 2000.0, 0.1), ClassProfile(2, "B", "business", 1500.0, 0.1)),
        area_shares=(0.5, 0.5),
        sample_counts=(3, 3),
        zone_size=2000.0,
        n_rows=20,
        n_cols=20,
    )
    base.update(kw)
    return SynthConfig(**base)


def test_presets_exist_and_validate():
    p = scenario_presets()
    for name in ("clean", "paper_shaped", "pattern_degenerate", "volume_degenerate", "entropy_sweep", "degenerate_merged"):
        assert p[name].validate() is p[name]
    assert p["clean"].mixing_bandwidth == 0
    with pytest.raises(InputError):
        preset("nope")


def test_paper_shaped_sample_counts():
    assert preset("paper_shaped").sample_counts == (25, 25, 20, 25, 10)


def test_validation_rejects_bad_configs():
    for bad in (
        dict(classes=()),
        dict(area_shares=(1.0,)),
        dict(sample_counts=(0, 3)),
        dict(layout="hex"),
        dict(truth_resolution=30.0),
        dict(mixing_spread=2.0),
        dict(tower_intensity=0.0),
    ):
        with pytest.raises(InputError):
            small(**bad).validate()


def test_zero_noise_single_class_is_prototype():
    cfg = SynthConfig(
        classes=(ClassProfile(1, "R", "residential", 3000.0, 0.0),),
        area_shares=(1.0,),
        sample_counts=(2,),
        n_rows=15,
        n_cols=15,
    )
    ds = generate_city(cfg)
    proto = SHAPES["residential"]()
    proto = proto / proto.sum()
    shares = ds.expected / ds.expected.sum(axis=1, keepdims=True)
    assert np.allclose(shares, proto, rtol=0, atol=1e-15)
    assert np.array_equal(ds.counts, np.rint(ds.expected))


def test_generation_is_deterministic(tmp_path):
    cfg = small(seed=5, mixing_bandwidth=200.0, layout="voronoi")
    write_dataset(generate_city(cfg), tmp_path / "a")
    write_dataset(generate_city(cfg), tmp_path / "b")
    names = ["towers.csv", "calls.csv", "truth.asc", "samples.csv", "classes.csv", "manifest.txt"]
    match, mismatch, errors = filecmp.cmpfiles(tmp_path / "a", tmp_path / "b", names, shallow=False)
    assert match == names and not mismatch and not errors


def test_manifest_regenerates(tmp_path):
    cfg = preset("entropy_sweep", n_rows=40, n_cols=40, sample_counts=(1,) * 5, seed=9)
    write_dataset(generate_city(cfg), tmp_path)
    back = config_from_manifest(read_keyvalue(tmp_path / "manifest.txt"))
    assert back == cfg


def test_area_shares_realized():
    shares = (0.3, 0.3, 0.2, 0.1, 0.1)
    cfg = replace(preset("clean"), area_shares=shares, sample_counts=(1,) * 5, layout="voronoi",
                  zone_size=1500.0, n_rows=60, n_cols=60)
    for seed in range(3):
        ds = generate_city(replace(cfg, seed=seed))
        fine = ds.truth.values.ravel()
        got = np.bincount(fine.astype(int), minlength=6)[1:] / fine.size
        assert np.all(np.abs(got - shares) <= 0.05), got


def test_samples_are_pure_interior_and_have_towers():
    ds = generate_city(preset("paper_shaped", seed=1))
    grid = ds.config.grid
    r = int(ds.config.cell_size / ds.config.truth_resolution)
    fine = ds.truth.values
    tx = np.array([t.x for t in ds.towers])
    ty = np.array([t.y for t in ds.towers])
    for x, y, k in ds.samples:
        row, col = (int(v[0]) for v in grid.locate(np.array([x]), np.array([y])))
        r0, r1 = max(row - 2, 0), min(row + 3, grid.n_rows)
        c0, c1 = max(col - 2, 0), min(col + 3, grid.n_cols)
        # ascii rows run north to south; locate() counts rows the same way
        block = fine[r0 * r:r1 * r, c0 * r:c1 * r]
        assert np.all(block == k)
        half = ds.config.cell_size / 2
        inside = (np.abs(tx - x) <= half) & (np.abs(ty - y) <= half)
        assert inside.any()


def test_unsatisfiable_samples():
    with pytest.raises(UnsatisfiableError):
        generate_city(small(sample_counts=(500, 3)))


def test_two_zone_mixing_is_linear():
    bw = 400.0
    cfg = small(n_rows=10, n_cols=20, mixing_bandwidth=bw, sample_counts=(1, 1), seed=2)
    ds = generate_city(cfg)
    fine = ds.truth.values
    xs = ds.truth.spec.cell_centers()[0][0]
    left_class = fine[:, 0][0]
    assert np.all(fine[:, 0] == left_class) and np.all(fine[:, -1] != left_class)
    d = np.abs(xs - 2000.0)
    near = d < bw
    other = np.where(xs < 2000.0, fine != left_class, fine == left_class)
    for lo in range(0, int(bw), 100):
        cols = (d >= lo) & (d < lo + 100)
        expect = np.mean((1 - d[cols] / bw) / 2)
        assert other[:, cols].mean() == pytest.approx(expect, abs=0.07)
    assert not other[:, ~near].any()


def test_matched_volume_equalizes_four_day_totals():
    v = matched_volume("others", "business", 2500.0)

    def total(shape, vol):
        s = SHAPES[shape]()
        return day_mode_aggregate(vol * s / s.sum(), DayMode.FOUR_DAY).sum()

    assert total("others", v) == pytest.approx(total("business", 2500.0), rel=1e-12)


def test_apply_overrides():
    cfg = apply_overrides(preset("clean"), {"n_rows": "10", "area_shares": "1,1,1,1,1"})
    assert cfg.n_rows == 10 and cfg.area_shares == (1.0,) * 5
    with pytest.raises(InputError):
        apply_overrides(cfg, {"bogus": "1"})


def _beta_curve(out_dir, name):
    code, _, err = run_cli("--out-dir", out_dir, "synth", "--preset", name)
    assert code == 0, err
    for stage in ("grid", "train"):
        code, _, err = run_cli("--out-dir", out_dir, stage)
        assert code == 0, err
    _, curve = read_table(out_dir / "beta_curve.csv")
    return dict(zip(curve[:, 0].tolist(), curve[:, 1].tolist()))


def test_pattern_degenerate_needs_volume(tmp_path):
    f = _beta_curve(tmp_path, "pattern_degenerate")
    assert f[0.0] > 0
    assert min(v for b, v in f.items() if b > 0) == 0


def test_volume_degenerate_needs_pattern(tmp_path):
    f = _beta_curve(tmp_path, "volume_degenerate")
    assert f[0.0] == 0 and f[np.inf] > 0
