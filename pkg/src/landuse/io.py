"""Readers and writers for the CSV and key=value files exchanged between stages.

Floats are written with ``repr`` so that every value read back is
bit-identical to the one written.
"""
from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .errors import InputError, MissingTowerError
from .features import HOURS, WEEK
from .spatial import TowerSite, check_sites
from .training import LandUseClass, check_classes


def fmt(v):
    """Shortest round-trip text for a number; integers without a decimal point."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(v)


def _open_csv(path, expected):
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"{path} not found")
    f = path.open(newline="", encoding="utf-8")
    reader = csv.reader(f)
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != list(expected):
        f.close()
        raise InputError(f"{path}: expected header {','.join(expected)}, got {header}")
    return f, reader


def write_csv(path, header, rows):
    with Path(path).open("w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else fmt(v) for v in row])


def read_towers(path):
    f, reader = _open_csv(path, ("tower_id", "x", "y"))
    with f:
        try:
            sites = [TowerSite(r[0].strip(), float(r[1]), float(r[2])) for r in reader if r]
        except (ValueError, IndexError) as exc:
            raise InputError(f"{path}: bad tower row ({exc})") from None
    check_sites(sites)
    return sites


def write_towers(path, sites):
    write_csv(path, ("tower_id", "x", "y"), ((s.tower_id, s.x, s.y) for s in sites))


def read_calls(path, sites):
    """Hourly counts as an ``(n_towers, 168)`` array aligned with ``sites``.

    Missing rows count as zero; rows for towers without a site are an error.
    """
    index = {s.tower_id: i for i, s in enumerate(sites)}
    out = np.zeros((len(sites), WEEK))
    f, reader = _open_csv(path, ("tower_id", "day", "hour", "count"))
    with f:
        for n, r in enumerate(reader, start=2):
            if not r:
                continue
            try:
                tid, day, hour, count = r[0].strip(), int(r[1]), int(r[2]), float(r[3])
            except (ValueError, IndexError):
                raise InputError(f"{path}:{n}: malformed row {r}") from None
            if tid not in index:
                raise MissingTowerError(f"{path}:{n}: tower {tid!r} is not in the tower list")
            if not (0 <= day < 7 and 0 <= hour < HOURS):
                raise InputError(f"{path}:{n}: day/hour out of range")
            if count < 0 or not math.isfinite(count):
                raise InputError(f"{path}:{n}: count must be nonnegative")
            out[index[tid], day * HOURS + hour] = count
    return out


def write_calls(path, sites, counts):
    counts = np.asarray(counts)
    lines = ["tower_id,day,hour,count"]
    for s, row in zip(sites, counts.tolist()):
        tid = s.tower_id
        for j, c in enumerate(row):
            lines.append(f"{tid},{j // HOURS},{j % HOURS},{c}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_samples(path):
    """Sample rows as ``(xy, class_id)`` arrays."""
    f, reader = _open_csv(path, ("x", "y", "class_id"))
    with f:
        try:
            rows = [(float(r[0]), float(r[1]), int(r[2])) for r in reader if r]
        except (ValueError, IndexError) as exc:
            raise InputError(f"{path}: bad sample row ({exc})") from None
    xy = np.array([(x, y) for x, y, _ in rows], dtype=float).reshape(-1, 2)
    return xy, np.array([c for _, _, c in rows], dtype=np.int64)


def write_samples(path, samples):
    write_csv(path, ("x", "y", "class_id"), samples)


def read_classes(path):
    f, reader = _open_csv(path, ("class_id", "name"))
    with f:
        try:
            classes = [LandUseClass(int(r[0]), r[1].strip()) for r in reader if r]
        except (ValueError, IndexError) as exc:
            raise InputError(f"{path}: bad class row ({exc})") from None
    return check_classes(classes)


def write_classes(path, classes):
    write_csv(path, ("class_id", "name"), ((c.class_id, c.name) for c in classes))


def read_table(path):
    """Generic numeric CSV: returns ``(header, 2-D float array)``."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"{path} not found")
    with path.open(newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader)
        rows = [[float(v) for v in r] for r in reader if r]
    return header, np.array(rows, dtype=float).reshape(-1, len(header))


def parse_keyvalue(text, source="<text>"):
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for n, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"{source}:{n}: expected 'key = value'")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def read_keyvalue(path):
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"{path} not found")
    return parse_keyvalue(path.read_text(encoding="utf-8"), str(path))


def write_keyvalue(path, entries):
    lines = [f"{k} = {v if isinstance(v, str) else fmt(v)}" for k, v in entries.items()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
