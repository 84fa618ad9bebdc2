"""Pipeline configuration: a TOML file naming scenes, parameters and outputs.

Relative paths are resolved against the config file's directory. Validation
collects every problem as a ``(field, message)`` pair before failing, so the
CLI can report them all at once.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import rasterio

from .errors import ConfigError, FloodFuseError, ParameterError
from .fusion import Rule
from .raster import POLARIZATIONS, BandRef, Epoch, SceneMeta, Sensor, crs_equal, read_grid
from .vector import read_geojson


@dataclass
class OpticalSettings:
    threshold: float = 0.20
    absolute: bool = False


@dataclass
class SarSettings:
    threshold_db: float = 1.25
    window: int = 5
    kind: str = "median"
    min_cluster_px: int = 8
    permanent_water: Optional[Path] = None
    slope_mask: Optional[Path] = None


@dataclass
class ImpactSettings:
    zones: Path
    population: Optional[Path] = None
    roads: Optional[Path] = None
    schools: Optional[Path] = None
    zone_field: str = "name"
    school_buffer_m: float = 0.0


@dataclass
class PipelineConfig:
    path: Path
    output_dir: Path
    scenes: list
    rule: Rule = Rule.INTERSECT
    period: Optional[tuple] = None
    optical: OpticalSettings = field(default_factory=OpticalSettings)
    sar: SarSettings = field(default_factory=SarSettings)
    impact: Optional[ImpactSettings] = None

    @property
    def base(self):
        return self.path.parent

    def input_files(self):
        """Every input file the run reads, in a stable order."""
        files = []
        for s in self.scenes:
            files.extend(Path(ref.path) for ref in s.band_map.values())
            if s.cloud_mask:
                files.append(Path(s.cloud_mask))
        for p in (self.sar.permanent_water, self.sar.slope_mask):
            if p:
                files.append(p)
        if self.impact:
            for p in (self.impact.zones, self.impact.population, self.impact.roads, self.impact.schools):
                if p:
                    files.append(p)
        seen, out = set(), []
        for f in files:
            if f not in seen:
                seen.add(f)
                out.append(f)
        return out


def _date(value):
    if isinstance(value, dt.datetime):
        return value.date()
    if isinstance(value, dt.date):
        return value
    return dt.date.fromisoformat(str(value).strip())


class _Checker:
    def __init__(self, base: Path):
        self.base = base
        self.problems = []

    def fail(self, fld, msg):
        self.problems.append((fld, msg))

    def path(self, fld, value, required=True):
        if value is None:
            if required:
                self.fail(fld, "missing")
            return None
        p = Path(str(value))
        if not p.is_absolute():
            p = self.base / p
        if not p.exists():
            self.fail(fld, f"file not found: {value}")
        return p

    def number(self, fld, value, lo=None, hi=None, lo_open=False, hi_open=False, integer=False):
        kind = int if integer else (int, float)
        if isinstance(value, bool) or not isinstance(value, kind):
            self.fail(fld, f"expected {'an integer' if integer else 'a number'}, got {value!r}")
            return value
        bad_lo = lo is not None and (value <= lo if lo_open else value < lo)
        bad_hi = hi is not None and (value >= hi if hi_open else value > hi)
        if bad_lo or bad_hi:
            left = "(" if lo_open else "["
            right = ")" if hi_open else "]"
            rng = f"{left}{'-inf' if lo is None else lo}, {'inf' if hi is None else hi}{right}"
            self.fail(fld, f"out of range: {value} not in {rng}")
        return value


def _band_ref(chk, fld, value):
    if isinstance(value, dict):
        p = chk.path(f"{fld}.path", value.get("path"))
        band = value.get("band", 1)
        if not isinstance(band, int) or band < 1:
            chk.fail(f"{fld}.band", f"expected a positive integer, got {band!r}")
            band = 1
    else:
        p = chk.path(fld, value)
        band = 1
    if p is not None and p.exists():
        try:
            with rasterio.open(p) as src:
                if band > src.count:
                    chk.fail(fld, f"band {band} out of range 1..{src.count}")
        except Exception as exc:
            chk.fail(fld, f"unreadable raster: {exc}")
    return BandRef(str(p) if p else "", band)


def _scene(chk, i, raw):
    fld = f"scenes[{i}]"
    try:
        sensor = Sensor.parse(raw.get("sensor"))
    except ParameterError as exc:
        chk.fail(f"{fld}.sensor", str(exc))
        return None
    try:
        epoch = Epoch(str(raw.get("epoch", "")).upper())
    except ValueError:
        chk.fail(f"{fld}.epoch", f"expected 'pre' or 'post', got {raw.get('epoch')!r}")
        return None
    try:
        date = _date(raw.get("date"))
    except (TypeError, ValueError):
        chk.fail(f"{fld}.date", f"invalid date {raw.get('date')!r}")
        return None
    bands = {}
    if sensor.optical:
        for name in ("green", "nir"):
            bands[name.upper()] = _band_ref(chk, f"{fld}.{name}", raw.get(name))
    else:
        pols = [p for p in POLARIZATIONS if p.lower() in raw]
        if len(pols) != 1:
            chk.fail(fld, "SAR scene needs exactly one of 'vh' or 'vv'")
            return None
        bands[pols[0]] = _band_ref(chk, f"{fld}.{pols[0].lower()}", raw[pols[0].lower()])
    cloud = None
    if raw.get("cloud_mask") is not None:
        if not sensor.optical:
            chk.fail(f"{fld}.cloud_mask", "cloud masks apply to optical scenes only")
        cp = chk.path(f"{fld}.cloud_mask", raw["cloud_mask"])
        cloud = str(cp) if cp else None
    return SceneMeta(sensor, date, bands, epoch, cloud)


def _crs_of(path):
    if path.suffix.lower() in (".geojson", ".json"):
        return read_geojson(path).crs
    return read_grid(path).crs


def load_config(path) -> PipelineConfig:
    """Parse and validate a pipeline config; raises ConfigError listing every problem."""
    path = Path(path)
    try:
        raw = tomllib.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError([("config", f"file not found: {path}")]) from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([("config", f"invalid TOML: {exc}")]) from None

    chk = _Checker(path.parent)
    out_dir = Path(str(raw.get("output", {}).get("dir", "out")))
    if not out_dir.is_absolute():
        out_dir = path.parent / out_dir

    scenes = []
    raw_scenes = raw.get("scenes", [])
    if not raw_scenes:
        chk.fail("scenes", "at least one scene is required")
    for i, s in enumerate(raw_scenes):
        meta = _scene(chk, i, s)
        if meta is not None:
            scenes.append(meta)
    sensors = {s.sensor for s in scenes}
    runnable = [
        sn for sn in sensors
        if {s.epoch for s in scenes if s.sensor is sn} == {Epoch.PRE, Epoch.POST}
    ]
    if scenes and not runnable:
        chk.fail("scenes", "no sensor has both a pre and a post scene")
    for sn in sensors:
        if sn not in runnable and scenes:
            chk.fail("scenes", f"{sn.value} needs both pre and post scenes")

    fus = raw.get("fusion", {})
    try:
        rule = Rule(str(fus.get("rule", "intersect")).lower())
    except ValueError:
        chk.fail("fusion.rule", f"expected intersect|majority|union, got {fus.get('rule')!r}")
        rule = Rule.INTERSECT
    period = None
    if "period" in fus:
        try:
            start, end = (_date(v) for v in fus["period"])
            if end < start:
                chk.fail("fusion.period", "end precedes start")
            period = (start, end)
        except (TypeError, ValueError):
            chk.fail("fusion.period", "expected [start, end] dates")

    o = raw.get("optical", {})
    optical = OpticalSettings(
        threshold=chk.number("optical.threshold", o.get("threshold", 0.20), 0, 2, lo_open=True),
        absolute=bool(o.get("absolute", False)),
    )
    s = raw.get("sar", {})
    window = chk.number("sar.window", s.get("window", 5), 3, integer=True)
    if isinstance(window, int) and window % 2 == 0:
        chk.fail("sar.window", f"must be odd, got {window}")
    kind = str(s.get("kind", "median")).lower()
    if kind not in ("mean", "median"):
        chk.fail("sar.kind", f"expected mean|median, got {kind!r}")
    sar = SarSettings(
        threshold_db=chk.number("sar.threshold_db", s.get("threshold_db", 1.25), 0, lo_open=True),
        window=window,
        kind=kind,
        min_cluster_px=chk.number("sar.min_cluster_px", s.get("min_cluster_px", 8), 1, integer=True),
        permanent_water=chk.path("sar.permanent_water", s.get("permanent_water"), required=False),
        slope_mask=chk.path("sar.slope_mask", s.get("slope_mask"), required=False),
    )

    impact = None
    if "impact" in raw:
        im = raw["impact"]
        impact = ImpactSettings(
            zones=chk.path("impact.zones", im.get("zones")),
            population=chk.path("impact.population", im.get("population"), required=False),
            roads=chk.path("impact.roads", im.get("roads"), required=False),
            schools=chk.path("impact.schools", im.get("schools"), required=False),
            zone_field=str(im.get("zone_field", "name")),
            school_buffer_m=chk.number("impact.school_buffer_m", im.get("school_buffer_m", 0.0), 0),
        )

    cfg = PipelineConfig(path, out_dir, scenes, rule, period, optical, sar, impact)
    if not chk.problems:
        _check_crs(chk, cfg)
    if chk.problems:
        raise ConfigError(chk.problems)
    return cfg


def _check_crs(chk, cfg):
    ref = None
    for f in cfg.input_files():
        try:
            crs = _crs_of(f)
        except FloodFuseError as exc:
            chk.fail(str(f), str(exc))
            continue
        if ref is None:
            ref = (f, crs)
        elif not crs_equal(ref[1], crs):
            chk.fail(str(f), f"CRS {crs} differs from {ref[1]} of {ref[0].name}; reprojection is not supported")
