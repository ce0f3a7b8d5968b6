"""Day-mode series, normalized patterns, range-transformed volume and the
combined pattern/volume series used for training and clustering."""
from __future__ import annotations

import math
from enum import Enum

import numpy as np

from .errors import InputError, NoActivityError

HOURS = 24
DAYS = 7
WEEK = DAYS * HOURS


class DayMode(Enum):
    """How the 7x24 hourly week is folded into the pattern series."""

    FOUR_DAY = "four"  # mean(Mon..Thu), Fri, Sat, Sun
    TWO_DAY = "two"  # mean(Mon..Fri), mean(Sat, Sun)
    SEVEN_DAY = "seven"

    @property
    def length(self):
        return {"four": 96, "two": 48, "seven": 168}[self.value]

    @classmethod
    def parse(cls, text):
        key = str(text).strip().lower().replace("_day", "").replace("-day", "")
        for mode in cls:
            if mode.value == key or mode.name.lower() == key:
                return mode
        raise InputError(f"unknown day mode {text!r}; expected four, two or seven")


def day_mode_aggregate(weekly, mode: DayMode):
    """Fold raw hourly volumes (``(..., 168)``, day 0 = Monday) into a mode series.

    Averaging happens on raw volumes, before any normalization.
    """
    weekly = np.asarray(weekly, dtype=float)
    if weekly.shape[-1] != WEEK:
        raise InputError(f"weekly series must have {WEEK} entries, got {weekly.shape[-1]}")
    if mode is DayMode.SEVEN_DAY:
        return weekly.copy()
    days = weekly.reshape(weekly.shape[:-1] + (DAYS, HOURS))
    if mode is DayMode.FOUR_DAY:
        parts = [days[..., 0:4, :].mean(axis=-2), days[..., 4, :], days[..., 5, :], days[..., 6, :]]
    else:
        parts = [days[..., 0:5, :].mean(axis=-2), days[..., 5:7, :].mean(axis=-2)]
    return np.concatenate(parts, axis=-1)


def pattern_normalize(b):
    """Share of the series' total falling in each time step."""
    b = np.asarray(b, dtype=float)
    if (b < 0).any():
        raise InputError("call volumes must be nonnegative")
    total = b.sum()
    if not total > 0:
        raise NoActivityError("series has no activity")
    return b / total


def pattern_layers(series):
    """Row-wise :func:`pattern_normalize` for an ``(n, T)`` stack.

    Returns ``(patterns, active)``; rows without activity are NaN and
    flagged inactive rather than raising.
    """
    series = np.asarray(series, dtype=float)
    if (series < 0).any():
        raise InputError("call volumes must be nonnegative")
    totals = series.sum(axis=-1, keepdims=True)
    active = totals[..., 0] > 0
    with np.errstate(invalid="ignore", divide="ignore"):
        patterns = np.where(active[..., None], series / totals, np.nan)
    return patterns, active


def volume_transform(totals):
    """Map totals linearly onto [0, 2]; all zeros when every total is equal."""
    t = np.asarray(totals, dtype=float)
    if t.size == 0:
        raise InputError("volume_transform needs at least one total")
    lo, hi = t.min(), t.max()
    if hi == lo:
        return np.zeros_like(t)
    return 2.0 * (t - lo) / (hi - lo)


def check_beta(beta):
    beta = float(beta)
    if math.isnan(beta) or beta < 0:
        raise InputError(f"beta must be nonnegative or inf, got {beta}")
    return beta


def combine(patterns, volume, beta):
    """Append ``beta * volume`` to each pattern row.

    ``beta = inf`` selects the volume-only series: a zero pattern followed
    by the unweighted volume.
    """
    beta = check_beta(beta)
    X = np.asarray(patterns, dtype=float)
    Y = np.asarray(volume, dtype=float)
    if math.isinf(beta):
        return np.concatenate([np.zeros_like(X), Y[..., None]], axis=-1)
    return np.concatenate([X, (beta * Y)[..., None]], axis=-1)


def daily_patterns(weekly):
    """Per-day 24-point patterns, shape ``(n, 7, 24)``; inactive days are NaN."""
    weekly = np.asarray(weekly, dtype=float).reshape(-1, DAYS, HOURS)
    patterns, _ = pattern_layers(weekly)
    return patterns


def day_distance_matrix(weekly, city_aggregate=False):
    """Mean Euclidean distance between normalized daily patterns of each day pair.

    With ``city_aggregate`` the cells are summed first and a single
    city-wide daily pattern is compared instead of averaging per cell.
    """
    weekly = np.asarray(weekly, dtype=float).reshape(-1, WEEK)
    if city_aggregate:
        weekly = weekly.sum(axis=0, keepdims=True)
    pats = daily_patterns(weekly)
    out = np.zeros((DAYS, DAYS))
    for a in range(DAYS):
        for b in range(a + 1, DAYS):
            d = np.sqrt(((pats[:, a] - pats[:, b]) ** 2).sum(axis=1))
            d = d[~np.isnan(d)]
            out[a, b] = out[b, a] = d.mean() if d.size else np.nan
    return out
