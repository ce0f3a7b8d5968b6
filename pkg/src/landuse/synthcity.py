"""Deterministic synthetic city: zoning, towers, hourly call counts,
fine-resolution truth map and training samples.

Every tower's weekly series is the activity of the land it serves, i.e.
the fine truth cells nearest to it, so the Voronoi/density/IDW chain of
the pipeline sees the same geometry it tries to invert.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.spatial import cKDTree

from .errors import InputError, UnsatisfiableError
from .features import HOURS, WEEK, DayMode, day_mode_aggregate
from .raster import GridSpec, RasterGrid
from .spatial import TowerSite
from .training import LandUseClass


def _bump(hours, centre, width):
    return np.exp(-0.5 * ((hours - centre) / width) ** 2)


def daily_curve(base, *bumps):
    """24-hour curve: a constant floor plus ``(amplitude, centre, width)`` bumps."""
    h = np.arange(HOURS, dtype=float)
    out = np.full(HOURS, float(base))
    for amp, centre, width in bumps:
        out += amp * _bump(h, centre, width)
    return out


def weekly_shape(weekday, friday=None, saturday=None, sunday=None):
    friday = weekday if friday is None else friday
    saturday = weekday if saturday is None else saturday
    sunday = saturday if sunday is None else sunday
    return np.concatenate([weekday] * 4 + [friday, saturday, sunday])


# Qualitative prototypes: residential has similar days with morning and
# evening peaks, business a tall working-day profile and quiet weekend,
# commercial a broad daytime-to-evening plateau, open space a low flat
# curve, and "others" an early-shift weekday profile.
def residential_shape():
    wd = daily_curve(0.25, (1.0, 8.0, 1.5), (1.6, 20.5, 2.5))
    we = daily_curve(0.3, (0.9, 11.0, 3.0), (1.5, 20.0, 3.0))
    return weekly_shape(wd, daily_curve(0.25, (1.0, 8.0, 1.5), (1.7, 21.5, 2.5)), we)


def business_shape():
    wd = daily_curve(0.1, (2.5, 10.0, 1.5), (2.2, 15.0, 1.8))
    return weekly_shape(
        wd,
        daily_curve(0.1, (2.3, 10.0, 1.5), (1.6, 14.5, 1.8)),
        daily_curve(0.1, (0.5, 12.0, 3.0)),
        daily_curve(0.08, (0.3, 13.0, 3.0)),
    )


def commercial_shape():
    wd = daily_curve(0.2, (1.6, 13.0, 3.0), (1.5, 19.0, 2.5))
    we = daily_curve(0.25, (2.2, 14.0, 3.0), (2.0, 19.5, 2.5))
    return weekly_shape(wd, daily_curve(0.2, (1.7, 13.0, 3.0), (2.0, 20.0, 2.5)), we)


def open_space_shape():
    wd = daily_curve(0.5, (0.4, 14.0, 4.0))
    we = daily_curve(0.55, (0.7, 13.0, 4.0))
    return weekly_shape(wd, wd, we)


def others_shape():
    wd = daily_curve(0.3, (1.8, 6.5, 1.2), (1.2, 17.0, 1.5))
    we = daily_curve(0.3, (0.8, 7.0, 1.5), (0.6, 16.0, 2.0))
    return weekly_shape(wd, wd, we)


SHAPES = {
    "residential": residential_shape,
    "business": business_shape,
    "commercial": commercial_shape,
    "open_space": open_space_shape,
    "others": others_shape,
}


@dataclass(frozen=True)
class ClassProfile:
    """Activity of one land-use class.

    ``volume`` is the mean call density in calls per km² per hour and
    ``sigma`` the log-scale standard deviation of the multiplicative
    tower-hour noise.
    """

    class_id: int
    name: str
    shape: str
    volume: float
    sigma: float = 0.05

    def weekly(self):
        s = SHAPES[self.shape]()
        return s / s.sum()


def matched_volume(shape, reference, volume, mode=DayMode.FOUR_DAY):
    """Volume for ``shape`` whose day-mode total equals that of
    ``reference`` at ``volume``; the two are then indistinguishable by
    magnitude once folded into ``mode``."""
    def folded(name):
        s = SHAPES[name]()
        return day_mode_aggregate(s / s.sum(), mode).sum()

    return volume * folded(reference) / folded(shape)


@dataclass(frozen=True)
class SynthConfig:
    name: str = "custom"
    classes: tuple = ()
    area_shares: tuple = ()
    sample_counts: tuple = ()
    layout: str = "blocks"  # "blocks" or "voronoi"
    zone_size: float = 3000.0
    mixing_bandwidth: float = 0.0
    mixing_spread: float = 0.0  # per-zone bandwidth varies in bandwidth * [1 - spread, 1 + spread]
    zone_volume_sigma: float = 0.0
    tower_intensity: float = 30.0  # towers per km²
    truth_resolution: float = 20.0
    cell_size: float = 200.0
    n_rows: int = 60
    n_cols: int = 60
    seed: int = 0

    def validate(self):
        k = len(self.classes)
        if k < 1:
            raise InputError("a synthetic city needs at least one class")
        if [c.class_id for c in self.classes] != list(range(1, k + 1)):
            raise InputError("class ids must be 1..K in order")
        if len(self.area_shares) != k or len(self.sample_counts) != k:
            raise InputError("area_shares and sample_counts need one entry per class")
        if any(s <= 0 for s in self.area_shares) or any(n < 1 for n in self.sample_counts):
            raise InputError("area shares and sample counts must be positive")
        if self.layout not in ("blocks", "voronoi"):
            raise InputError(f"unknown layout {self.layout!r}")
        for f in ("zone_size", "tower_intensity", "truth_resolution", "cell_size"):
            if not getattr(self, f) > 0:
                raise InputError(f"{f} must be positive")
        if self.mixing_bandwidth < 0 or self.zone_volume_sigma < 0:
            raise InputError("mixing_bandwidth and zone_volume_sigma must be >= 0")
        if not 0 <= self.mixing_spread <= 1:
            raise InputError("mixing_spread must lie in [0, 1]")
        ratio = self.cell_size / self.truth_resolution
        if abs(ratio - round(ratio)) > 1e-9:
            raise InputError("truth_resolution must divide cell_size")
        for c in self.classes:
            if c.shape not in SHAPES:
                raise InputError(f"unknown class shape {c.shape!r}")
            if c.volume <= 0 or c.sigma < 0:
                raise InputError("class volume must be positive and sigma >= 0")
        return self

    @property
    def grid(self):
        return GridSpec(0.0, 0.0, self.cell_size, self.n_rows, self.n_cols)

    def manifest(self):
        """Flat ``key -> text`` description sufficient to regenerate the city."""
        d = asdict(self)
        out = {}
        for key, value in d.items():
            if key == "classes":
                for c in value:
                    p = f"class_{c['class_id']}"
                    out[f"{p}_name"] = c["name"]
                    out[f"{p}_shape"] = c["shape"]
                    out[f"{p}_volume"] = repr(float(c["volume"]))
                    out[f"{p}_sigma"] = repr(float(c["sigma"]))
            elif isinstance(value, tuple):
                out[key] = ",".join(repr(float(v)) if isinstance(v, float) else str(v) for v in value)
            else:
                out[key] = repr(value) if isinstance(value, float) else str(value)
        return out


def config_from_manifest(entries) -> SynthConfig:
    """Inverse of :meth:`SynthConfig.manifest`."""
    entries = dict(entries)
    ids = sorted({int(k.split("_")[1]) for k in entries if k.startswith("class_")})
    classes = tuple(
        ClassProfile(i, entries[f"class_{i}_name"], entries[f"class_{i}_shape"],
                     float(entries[f"class_{i}_volume"]), float(entries[f"class_{i}_sigma"]))
        for i in ids
    )
    kw = {"classes": classes}
    for f in SynthConfig.__dataclass_fields__.values():
        if f.name == "classes" or f.name not in entries:
            continue
        kw[f.name] = _coerce(f.name, entries[f.name])
    return SynthConfig(**kw)


_INT_FIELDS = {"n_rows", "n_cols", "seed"}
_FLOAT_TUPLES = {"area_shares"}
_INT_TUPLES = {"sample_counts"}
_STR_FIELDS = {"name", "layout"}


def _coerce(name, text):
    text = str(text).strip()
    if name in _STR_FIELDS:
        return text
    if name in _INT_FIELDS:
        return int(text)
    if name in _FLOAT_TUPLES:
        return tuple(float(v) for v in text.split(","))
    if name in _INT_TUPLES:
        return tuple(int(v) for v in text.split(","))
    return float(text)


def apply_overrides(cfg: SynthConfig, entries) -> SynthConfig:
    """Replace top-level fields from ``key -> text`` entries (unknown keys rejected)."""
    kw = {}
    for key, text in entries.items():
        if key not in SynthConfig.__dataclass_fields__ or key == "classes":
            raise InputError(f"unknown synthetic-city setting {key!r}")
        kw[key] = _coerce(key, text)
    return replace(cfg, **kw)


@dataclass
class SynthDataset:
    config: SynthConfig
    towers: list
    counts: np.ndarray  # (n_towers, 168) integer calls, day 0 = Monday
    truth: RasterGrid
    samples: list  # (x, y, class_id)
    classes: list
    expected: np.ndarray = field(repr=False, default=None)  # noise-free, unrounded series
    zone_classes: np.ndarray = field(repr=False, default=None)


def _zone_seeds(cfg: SynthConfig, rng):
    width = cfg.n_cols * cfg.cell_size
    height = cfg.n_rows * cfg.cell_size
    if cfg.layout == "blocks":
        nx = max(1, math.ceil(width / cfg.zone_size - 1e-9))
        ny = max(1, math.ceil(height / cfg.zone_size - 1e-9))
        gx, gy = np.meshgrid((np.arange(nx) + 0.5) * cfg.zone_size, (np.arange(ny) + 0.5) * cfg.zone_size)
        return np.column_stack([gx.ravel(), gy.ravel()])
    n = max(2, int(round(width * height / cfg.zone_size ** 2)))
    return rng.uniform((0.0, 0.0), (width, height), size=(n, 2))


def _allocate_classes(zone_area, shares, rng):
    """Greedy zone-to-class allocation tracking the requested area shares."""
    shares = np.asarray(shares, dtype=float)
    target = shares / shares.sum() * zone_area.sum()
    got = np.zeros(len(shares))
    out = np.zeros(len(zone_area), dtype=np.int64)
    for z in rng.permutation(len(zone_area)):
        k = int(np.argmax(target - got - 0.5 * zone_area[z]))
        out[z] = k
        got[k] += zone_area[z]
    return out


def _fine_classes(cfg: SynthConfig, fine_xy, seeds, rng):
    k_near = min(8, len(seeds))
    dist, idx = cKDTree(seeds).query(fine_xy, k=k_near)
    dist = dist.reshape(len(fine_xy), k_near)
    idx = idx.reshape(len(fine_xy), k_near)
    own = idx[:, 0]
    counts = np.bincount(own, minlength=len(seeds)).astype(float)
    zone_class = _allocate_classes(counts, cfg.area_shares, rng)
    source = own.copy()
    if cfg.mixing_bandwidth > 0 and k_near > 1:
        # Each other class within the bandwidth gets weight (1-t)/(1+t),
        # t = distance to its nearest bisector / bandwidth, against 1 for
        # the own zone: between two zones the mixture falls linearly from
        # 50/50 on the border to pure at the bandwidth. With a spread, each
        # zone uses its own bandwidth.
        bw = np.full(len(seeds), cfg.mixing_bandwidth)
        if cfg.mixing_spread > 0:
            bw *= 1.0 + cfg.mixing_spread * rng.uniform(-1.0, 1.0, len(seeds))
        bw_own = np.maximum(bw[own], 1e-9)
        k = len(cfg.area_shares)
        n = len(fine_xy)
        s0 = seeds[own]
        own_class = zone_class[own]
        t_best = np.full((n, k), np.inf)
        zone_of = np.repeat(own[:, None], k, axis=1)
        rows = np.arange(n)
        for j in range(1, k_near):
            sj = seeds[idx[:, j]]
            sep = np.linalg.norm(sj - s0, axis=1)
            t = (dist[:, j] ** 2 - dist[:, 0] ** 2) / (2.0 * np.maximum(sep, 1e-12)) / bw_own
            cj = zone_class[idx[:, j]]
            better = (cj != own_class) & (t < t_best[rows, cj])
            t_best[rows[better], cj[better]] = t[better]
            zone_of[rows[better], cj[better]] = idx[better, j]
        t_best = np.minimum(t_best, 1.0)
        w = (1.0 - t_best) / (1.0 + t_best)
        w[rows, own_class] = 1.0
        cum = np.cumsum(w, axis=1)
        draw = rng.random(n) * cum[:, -1]
        pick = np.minimum((cum <= draw[:, None]).sum(axis=1), k - 1)
        source = zone_of[rows, pick]
    return zone_class, source


def _place_towers(cfg: SynthConfig, rng):
    width = cfg.n_cols * cfg.cell_size
    height = cfg.n_rows * cfg.cell_size
    n = max(1, int(round(cfg.tower_intensity * width * height / 1e6)))
    xy = np.round(rng.uniform((0.0, 0.0), (width, height), size=(n, 2)), 1)
    while True:
        _, first = np.unique(xy, axis=0, return_index=True)
        if len(first) == n:
            return xy
        dup = np.setdiff1d(np.arange(n), first)
        xy[dup] = np.round(rng.uniform((0.0, 0.0), (width, height), size=(len(dup), 2)), 1)


def _pick_samples(cfg: SynthConfig, fine_class, tower_xy, rng):
    grid = cfg.grid
    r = int(round(cfg.cell_size / cfg.truth_resolution))
    k = len(cfg.classes)
    blocks = fine_class.reshape(grid.n_rows, r, grid.n_cols, r).transpose(0, 2, 1, 3).reshape(grid.n_rows, grid.n_cols, -1)
    lo = blocks.min(axis=2)
    pure = lo == blocks.max(axis=2)
    cls = np.where(pure, lo, -1)
    row, col = grid.locate(tower_xy[:, 0], tower_xy[:, 1])
    has_tower = np.zeros(grid.shape, dtype=bool)
    has_tower[row[row >= 0], col[row >= 0]] = True
    # pure cells whose 5x5 neighbourhood (clipped to the grid) shares their class
    padded = np.pad(cls, 2, mode="edge")
    same = np.ones(grid.shape, dtype=bool)
    for dr in range(5):
        for dc in range(5):
            same &= padded[dr:dr + grid.n_rows, dc:dc + grid.n_cols] == cls
    eligible = same & pure & has_tower
    cx, cy = grid.cell_centers()
    samples = []
    for i in range(k):
        cells = np.flatnonzero(eligible & (cls == i))
        want = cfg.sample_counts[i]
        if len(cells) < want:
            raise UnsatisfiableError(
                f"class {i + 1} ({cfg.classes[i].name}) has {len(cells)} eligible cells, {want} requested"
            )
        for c in np.sort(rng.choice(cells, size=want, replace=False)):
            samples.append((float(cx.flat[c]), float(cy.flat[c]), i + 1))
    return samples


def generate_city(config: SynthConfig) -> SynthDataset:
    cfg = config.validate()
    rng = np.random.default_rng(cfg.seed)
    k = len(cfg.classes)
    grid = cfg.grid
    fine = GridSpec(0.0, 0.0, cfg.truth_resolution,
                    int(round(grid.n_rows * cfg.cell_size / cfg.truth_resolution)),
                    int(round(grid.n_cols * cfg.cell_size / cfg.truth_resolution)))
    fx, fy = fine.cell_centers()
    fine_xy = np.column_stack([fx.ravel(), fy.ravel()])

    seeds = _zone_seeds(cfg, rng)
    zone_class, source = _fine_classes(cfg, fine_xy, seeds, rng)
    fine_class = zone_class[source]
    zone_gain = np.exp(cfg.zone_volume_sigma * rng.standard_normal(len(seeds)))

    tower_xy = _place_towers(cfg, rng)
    _, nearest = cKDTree(tower_xy).query(fine_xy)
    fine_area_km2 = cfg.truth_resolution ** 2 / 1e6
    served = np.zeros((len(tower_xy), k))
    np.add.at(served, (nearest, fine_class), fine_area_km2 * zone_gain[source])

    profiles = np.array([c.volume * WEEK * c.weekly() for c in cfg.classes])  # calls per km² per hour slot
    sigma = np.array([c.sigma for c in cfg.classes])
    expected = served @ profiles
    noisy = np.zeros((len(tower_xy), WEEK))
    for i in range(k):
        noise = np.exp(sigma[i] * rng.standard_normal((len(tower_xy), WEEK)))
        noisy += served[:, i:i + 1] * profiles[i] * noise
    counts = np.rint(noisy).astype(np.int64)

    width = len(str(len(tower_xy)))
    towers = [TowerSite(f"T{i:0{width}d}", float(x), float(y)) for i, (x, y) in enumerate(tower_xy)]
    truth = RasterGrid(fine, (fine_class + 1).reshape(fine.shape).astype(float))
    samples = _pick_samples(cfg, fine_class, tower_xy, rng)
    classes = [LandUseClass(c.class_id, c.name) for c in cfg.classes]
    return SynthDataset(cfg, towers, counts, truth, samples, classes, expected, zone_class)


def _five_classes(sigma, volumes=(3000.0, 1500.0, 6000.0, 1200.0, 2000.0)):
    names = ("Residential", "Business", "Commercial", "OpenSpace", "Others")
    shapes = ("residential", "business", "commercial", "open_space", "others")
    return tuple(ClassProfile(i + 1, n, s, v, sigma) for i, (n, s, v) in enumerate(zip(names, shapes, volumes)))


def scenario_presets():
    """Named configurations exercising the pipeline's main behaviours."""
    clean = SynthConfig(
        name="clean",
        classes=_five_classes(0.05),
        area_shares=(0.2, 0.2, 0.2, 0.2, 0.2),
        sample_counts=(20, 20, 20, 20, 20),
        layout="blocks",
        zone_size=3000.0,
        tower_intensity=30.0,
        n_rows=75,
        n_cols=75,
    )
    paper_shaped = SynthConfig(
        name="paper_shaped",
        classes=_five_classes(0.2),
        area_shares=(0.25, 0.15, 0.1, 0.35, 0.15),
        sample_counts=(25, 25, 20, 25, 10),
        layout="voronoi",
        zone_size=3000.0,
        mixing_bandwidth=300.0,
        zone_volume_sigma=0.25,
        tower_intensity=12.5,
        n_rows=90,
        n_cols=90,
    )
    pattern_degenerate = SynthConfig(
        name="pattern_degenerate",
        classes=(
            ClassProfile(1, "ResidentialLow", "residential", 1000.0, 0.1),
            ClassProfile(2, "ResidentialHigh", "residential", 4000.0, 0.1),
        ),
        area_shares=(0.5, 0.5),
        sample_counts=(20, 20),
        layout="blocks",
        zone_size=2000.0,
        tower_intensity=30.0,
        n_rows=50,
        n_cols=50,
    )
    volume_degenerate = SynthConfig(
        name="volume_degenerate",
        classes=(
            ClassProfile(1, "Business", "business", 2500.0, 0.1),
            ClassProfile(2, "Others", "others", matched_volume("others", "business", 2500.0), 0.1),
        ),
        area_shares=(0.5, 0.5),
        sample_counts=(20, 20),
        layout="blocks",
        zone_size=2000.0,
        tower_intensity=30.0,
        n_rows=50,
        n_cols=50,
    )
    entropy_sweep = SynthConfig(
        name="entropy_sweep",
        classes=_five_classes(0.1),
        area_shares=(0.2, 0.2, 0.2, 0.2, 0.2),
        sample_counts=(15, 15, 15, 15, 15),
        layout="voronoi",
        zone_size=2400.0,
        mixing_bandwidth=1000.0,
        mixing_spread=1.0,
        tower_intensity=30.0,
        n_rows=90,
        n_cols=90,
    )
    presets = {
        p.name: p
        for p in (clean, paper_shaped, pattern_degenerate, volume_degenerate, entropy_sweep)
    }
    presets["degenerate_merged"] = merge_configs(pattern_degenerate, volume_degenerate, name="degenerate_merged")
    return presets


def merge_configs(a: SynthConfig, b: SynthConfig, name=None) -> SynthConfig:
    """City holding the classes of both configurations with equal total weight.

    Geometry and tower settings come from ``a``.
    """
    ka = len(a.classes)
    classes = a.classes + tuple(replace(c, class_id=c.class_id + ka) for c in b.classes)
    sa, sb = np.asarray(a.area_shares, float), np.asarray(b.area_shares, float)
    shares = tuple((sa / sa.sum() / 2).tolist() + (sb / sb.sum() / 2).tolist())
    return replace(
        a,
        name=name or f"{a.name}+{b.name}",
        classes=classes,
        area_shares=shares,
        sample_counts=a.sample_counts + b.sample_counts,
    )


def preset(name, **overrides) -> SynthConfig:
    presets = scenario_presets()
    if name not in presets:
        raise InputError(f"unknown preset {name!r}; choose from {', '.join(sorted(presets))}")
    return replace(presets[name], **overrides)
