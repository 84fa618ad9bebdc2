"""End-to-end run driven by a :class:`~floodfuse.config.PipelineConfig`."""

from __future__ import annotations

import hashlib
import json
import logging
import os
from pathlib import Path

from . import __version__
from .config import PipelineConfig
from .errors import FloodFuseError
from .fusion import align_masks, availability, fuse, write_coverage
from .impact import affected_population, affected_roads, build_report, school_counts, vectorize
from .optical import OpticalParams, optical_flood_mask
from .raster import Epoch, Sensor, load_scene, read_raster, write_mask
from .sar import SarParams, sar_flood_mask
from .vector import Kind, read_geojson, write_geojson

log = logging.getLogger(__name__)


class PipelineError(FloodFuseError):
    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage {stage!r} failed: {cause}")


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _split(scenes):
    pre = [s for s in scenes if s.epoch is Epoch.PRE]
    post = [s for s in scenes if s.epoch is Epoch.POST]
    return sorted(pre, key=lambda s: s.acquisition_date), sorted(post, key=lambda s: s.acquisition_date)


def sar_params(cfg: PipelineConfig) -> SarParams:
    s = cfg.sar
    return SarParams(
        speckle_window=s.window,
        speckle_kind=s.kind,
        diff_db_threshold=s.threshold_db,
        min_cluster_px=s.min_cluster_px,
        permanent_water=read_raster(s.permanent_water) if s.permanent_water else None,
        slope_mask=read_raster(s.slope_mask) if s.slope_mask else None,
    )


def sensor_masks(cfg: PipelineConfig) -> dict:
    """Per-sensor flood masks, keyed by sensor, in Sensor declaration order."""
    masks = {}
    for sensor in Sensor:
        metas = [s for s in cfg.scenes if s.sensor is sensor]
        if not metas:
            continue
        stage = f"{sensor.value.lower()} mask"
        try:
            pre, post = _split([m for m in metas])
            pre = [load_scene(m) for m in pre]
            post = [load_scene(m) for m in post]
            if sensor.optical:
                params = OpticalParams(cfg.optical.threshold, sensor, cfg.optical.absolute)
                masks[sensor] = optical_flood_mask(pre, post, params)
            else:
                masks[sensor] = sar_flood_mask(pre, post, sar_params(cfg))
        except FloodFuseError as exc:
            raise PipelineError(stage, exc) from exc
    return masks


def _impact(cfg, fused, polygons):
    im = cfg.impact
    zones = read_geojson(im.zones, Kind.POLYGON)
    pop = roads = schools = None
    if im.population:
        pop = affected_population(fused, read_raster(im.population), zones, im.zone_field)
    if im.roads:
        roads = affected_roads(polygons, read_geojson(im.roads, Kind.POLYLINE), zones, im.zone_field)
    if im.schools:
        schools = school_counts(
            polygons, read_geojson(im.schools, Kind.POINT), zones, im.zone_field, im.school_buffer_m
        )
    if pop is None and roads is None and schools is None:
        pop = {name: (0.0, 0.0) for name in zones.names(im.zone_field)}
    return build_report(pop, roads, schools)


def run_pipeline(cfg: PipelineConfig) -> dict:
    """Run every stage and write artifacts to ``cfg.output_dir``.

    Returns ``{artifact name: path}``. Failures raise :class:`PipelineError`
    naming the stage.
    """
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    artifacts = {}

    masks = sensor_masks(cfg)
    for sensor, mask in masks.items():
        p = out / f"mask_{sensor.value.lower()}.tif"
        write_mask(mask, p)
        artifacts[p.name] = p
        log.info("%s: %d flooded cells", sensor.value, int(mask.flooded.sum()))

    try:
        fused = fuse(align_masks(list(masks.values())), cfg.rule)
    except FloodFuseError as exc:
        raise PipelineError("fuse", exc) from exc
    p = out / "fused.tif"
    write_mask(fused, p)
    artifacts[p.name] = p

    try:
        polygons = vectorize(fused)
    except FloodFuseError as exc:
        raise PipelineError("vectorize", exc) from exc
    p = out / "flood.geojson"
    write_geojson(polygons, p)
    artifacts[p.name] = p

    try:
        dates = [s.acquisition_date for s in cfg.scenes]
        period = cfg.period or (min(dates), max(dates))
        cov = availability(cfg.scenes, period)
    except FloodFuseError as exc:
        raise PipelineError("availability", exc) from exc
    p = out / "coverage.csv"
    write_coverage(cov, p)
    artifacts[p.name] = p

    if cfg.impact is not None:
        try:
            report = _impact(cfg, fused, polygons)
        except FloodFuseError as exc:
            raise PipelineError("impact", exc) from exc
        p = out / "report.csv"
        report.write_csv(p)
        artifacts[p.name] = p

    p = out / "manifest.json"
    p.write_text(json.dumps(_manifest(cfg, artifacts), indent=2, sort_keys=True) + "\n")
    artifacts[p.name] = p
    return artifacts


def _rel(path, base):
    return Path(os.path.relpath(path, base)).as_posix()


def _manifest(cfg: PipelineConfig, artifacts):
    base = cfg.base
    s = cfg.sar
    params = {
        "fusion_rule": cfg.rule.value,
        "period": [d.isoformat() for d in cfg.period] if cfg.period else None,
        "optical": {"threshold": cfg.optical.threshold, "absolute": cfg.optical.absolute},
        "sar": {
            "threshold_db": s.threshold_db,
            "window": s.window,
            "kind": s.kind,
            "min_cluster_px": s.min_cluster_px,
            "permanent_water": _rel(s.permanent_water, base) if s.permanent_water else None,
            "slope_mask": _rel(s.slope_mask, base) if s.slope_mask else None,
        },
        "scenes": [
            {
                "sensor": m.sensor.value,
                "epoch": m.epoch.value,
                "date": m.acquisition_date.isoformat(),
                "bands": {k: [_rel(r.path, base), r.band] for k, r in sorted(m.band_map.items())},
                "cloud_mask": _rel(m.cloud_mask, base) if m.cloud_mask else None,
            }
            for m in cfg.scenes
        ],
    }
    if cfg.impact:
        im = cfg.impact
        params["impact"] = {
            "zone_field": im.zone_field,
            "school_buffer_m": im.school_buffer_m,
            **{k: _rel(v, base) if v else None for k, v in (
                ("zones", im.zones), ("population", im.population), ("roads", im.roads), ("schools", im.schools),
            )},
        }
    return {
        "floodfuse_version": __version__,
        "config": cfg.path.name,
        "parameters": params,
        "inputs": {_rel(f, base): sha256(f) for f in cfg.input_files()},
        "outputs": {name: sha256(p) for name, p in sorted(artifacts.items())},
    }
