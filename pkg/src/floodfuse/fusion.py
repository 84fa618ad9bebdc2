"""Pixel-wise fusion of per-sensor flood masks and acquisition availability."""

from __future__ import annotations

import csv
import datetime as dt
import enum
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ParameterError
from .raster import (
    DRY, FLOODED, NO_OBS, FloodMask, Raster, Resample, Sensor, align, finest_grid, require_same_grid,
)


class Rule(str, enum.Enum):
    INTERSECT = "intersect"
    MAJORITY = "majority"
    UNION = "union"


def fuse(masks: Sequence[FloodMask], rule=Rule.INTERSECT) -> FloodMask:
    """Combine masks cell by cell, voting only among inputs that observed the cell.

    INTERSECT needs every observer to say FLOODED, MAJORITY needs strictly more
    than half of them (a 1-1 tie is DRY), UNION needs any. A cell nobody
    observed stays NO_OBS.
    """
    rule = Rule(rule)
    if not masks:
        raise ParameterError("fuse needs at least one mask")
    require_same_grid(*(m.grid for m in masks))
    stack = np.stack([m.states for m in masks])
    observed = np.sum(stack != NO_OBS, axis=0)
    flooded = np.sum(stack == FLOODED, axis=0)
    if rule is Rule.INTERSECT:
        hit = (observed > 0) & (flooded == observed)
    elif rule is Rule.MAJORITY:
        hit = 2 * flooded > observed
    else:
        hit = flooded > 0
    states = np.where(observed == 0, NO_OBS, np.where(hit, FLOODED, DRY)).astype(np.uint8)

    provenance = frozenset().union(*(m.provenance for m in masks))
    ranges = [m.date_range for m in masks if m.date_range]
    date_range = (min(r[0] for r in ranges), max(r[1] for r in ranges)) if ranges else None
    return FloodMask(masks[0].grid, states, provenance, date_range)


def align_masks(masks: Sequence[FloodMask]) -> list:
    """Bring masks onto the finest of their grids (nearest neighbour); cells
    outside a mask's footprint become NO_OBS."""
    target = finest_grid([m.grid for m in masks])
    out = []
    for m in masks:
        if m.grid == target:
            out.append(m)
            continue
        r = align(Raster(m.grid, m.states, NO_OBS), target, Resample.NEAREST)
        states = np.where(r.valid, r.samples, NO_OBS).astype(np.uint8)
        out.append(FloodMask(target, states, m.provenance, m.date_range))
    return out


@dataclass(frozen=True)
class Coverage:
    start: dt.date
    end: dt.date
    days: tuple  # ((date, frozenset of sensor names), ...) for every day in the period
    sensors: tuple  # sensor names considered, sorted

    @property
    def n_days(self):
        return len(self.days)

    def count(self, sensor=None):
        """Days with an acquisition by ``sensor``, or by any sensor when None."""
        if sensor is None:
            return sum(1 for _, s in self.days if s)
        name = Sensor.parse(sensor).value
        return sum(1 for _, s in self.days if name in s)

    @property
    def combined(self):
        return self.count()

    def fraction(self, sensor=None):
        return self.count(sensor) / self.n_days


def availability(scenes: Iterable, period) -> Coverage:
    """Per-day sensor availability over ``period`` = (start, end), inclusive.

    ``scenes`` items need ``.sensor`` and ``.acquisition_date`` (SceneMeta) or
    be ``(sensor, date)`` pairs.
    """
    start, end = period
    if end < start:
        raise ParameterError(f"inverted date range {start}..{end}")
    by_day = {}
    names = set()
    for item in scenes:
        if isinstance(item, tuple):
            sensor, day = item
        else:
            sensor, day = item.sensor, item.acquisition_date
        name = Sensor.parse(sensor).value
        names.add(name)
        if start <= day <= end:
            by_day.setdefault(day, set()).add(name)
    n = (end - start).days + 1
    days = tuple(
        (d, frozenset(by_day.get(d, ())))
        for d in (start + dt.timedelta(days=i) for i in range(n))
    )
    return Coverage(start, end, days, tuple(sorted(names)))


def read_scene_list(path):
    """Read ``sensor,date`` rows (extra columns ignored)."""
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append((Sensor.parse(row["sensor"]), dt.date.fromisoformat(row["date"].strip())))
    return out


def write_coverage(cov: Coverage, path) -> None:
    sensors = [s.value for s in Sensor]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", *sensors, "combined"])
        for day, present in cov.days:
            w.writerow([day.isoformat(), *(int(s in present) for s in sensors), int(bool(present))])
        w.writerow(["total_days", *(cov.count(s) for s in sensors), cov.combined])
