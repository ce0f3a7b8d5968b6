"""Pipeline settings read from a flat ``key = value`` file."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .errors import ConfigError
from .features import DayMode
from .io import parse_keyvalue
from .training import DEFAULT_BETA_GRID, check_grid

DEFAULT_ALPHAS = (0.5, 0.6, 0.7, 0.8, 0.9)


def _floats(text):
    return tuple(math.inf if v.strip().lower() in ("inf", "infinity") else float(v) for v in text.split(",") if v.strip())


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass(frozen=True)
class PipelineConfig:
    out_dir: Path = Path(".")
    data_dir: Path | None = None
    towers: str = "towers.csv"
    calls: str = "calls.csv"
    truth: str = "truth.asc"
    samples: str = "samples.csv"
    classes: str = "classes.csv"
    cell_size: float = 200.0
    bounds: tuple | None = None
    x_ll: float | None = None
    y_ll: float | None = None
    n_rows: int | None = None
    n_cols: int | None = None
    day_mode: DayMode = DayMode.FOUR_DAY
    volume_totals: str = "mode"  # "mode" or "week"
    idw_power: float = 2.0
    idw_k: int = 12
    beta_grid: tuple = DEFAULT_BETA_GRID
    leave_one_out: bool = False
    fcm_m: float = 2.0
    fcm_tol: float = 1e-5
    fcm_max_iter: int = 300
    fcm_restarts: int = 10
    c_range: tuple | None = None
    alphas: tuple = DEFAULT_ALPHAS
    entropy_bins: int = 10
    day_distance_city: bool = False
    baselines: bool = True
    seed: int = 0
    extra: dict = field(default_factory=dict, compare=False, repr=False)

    def path(self, name):
        p = Path(getattr(self, name))
        if p.is_absolute():
            return p
        return (self.data_dir if self.data_dir is not None else self.out_dir) / p

    def validate(self):
        if self.volume_totals not in ("mode", "week"):
            raise ConfigError("volume_totals must be 'mode' or 'week'")
        if not self.idw_power > 0 or self.idw_k < 1:
            raise ConfigError("idw_power must be > 0 and idw_k >= 1")
        if not self.cell_size > 0:
            raise ConfigError("cell_size must be positive")
        if self.c_range is not None and (len(self.c_range) != 2 or self.c_range[0] > self.c_range[1]):
            raise ConfigError("c_range must be 'lo, hi' with lo <= hi")
        if self.entropy_bins < 1:
            raise ConfigError("entropy_bins must be >= 1")
        try:
            check_grid(self.beta_grid)
        except Exception as exc:
            raise ConfigError(str(exc)) from None
        return self


_PARSERS = {
    "out_dir": Path,
    "data_dir": Path,
    "cell_size": float,
    "bounds": _floats,
    "x_ll": float,
    "y_ll": float,
    "n_rows": int,
    "n_cols": int,
    "day_mode": DayMode.parse,
    "idw_power": float,
    "idw_k": int,
    "beta_grid": lambda t: DEFAULT_BETA_GRID if t.strip() == "default" else _floats(t),
    "leave_one_out": _bool,
    "fcm_m": float,
    "fcm_tol": float,
    "fcm_max_iter": int,
    "fcm_restarts": int,
    "c_range": lambda t: tuple(int(v) for v in t.split(",")),
    "alphas": _floats,
    "entropy_bins": int,
    "day_distance_city": _bool,
    "baselines": _bool,
    "seed": int,
}


def config_from_entries(entries, base_dir=None) -> PipelineConfig:
    """Build a config from parsed entries.

    Keys with a ``synth.`` prefix (and ``preset``) belong to the generator
    and are kept aside in ``extra``. Relative ``data_dir``/``out_dir`` are
    resolved against ``base_dir``.
    """
    known = {f.name for f in fields(PipelineConfig)} - {"extra"}
    kw = {}
    extra = {}
    for key, text in entries.items():
        if key.startswith("synth.") or key == "preset":
            extra[key] = text
            continue
        if key not in known:
            raise ConfigError(f"unknown config key {key!r}")
        try:
            kw[key] = _PARSERS.get(key, str)(text)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"bad value for {key}: {exc}") from None
    if base_dir is not None:
        for key in ("data_dir", "out_dir"):
            if key in kw and not kw[key].is_absolute():
                kw[key] = Path(base_dir) / kw[key]
    return PipelineConfig(extra=extra, **kw).validate()


def load_config(path=None, **overrides) -> PipelineConfig:
    if path is None:
        cfg = PipelineConfig()
    else:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file {path} not found")
        cfg = config_from_entries(parse_keyvalue(path.read_text(encoding="utf-8"), str(path)), path.parent)
    overrides = {k: v for k, v in overrides.items() if v is not None}
    return replace(cfg, **overrides).validate()
