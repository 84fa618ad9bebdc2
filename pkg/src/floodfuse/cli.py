"""``floodfuse`` command line.

Exit codes: 0 success, 1 processing failure (stage named on stderr),
2 invalid arguments or config (each offending field listed on stderr).
"""

from __future__ import annotations

import datetime as dt
import logging
import sys
from pathlib import Path

import click

from . import __version__
from .config import load_config
from .errors import ConfigError, FloodFuseError
from .fusion import Rule, align_masks, availability, fuse, read_scene_list, write_coverage
from .impact import affected_population, affected_roads, build_report, school_counts, vectorize
from .optical import OpticalParams, optical_flood_mask
from .pipeline import PipelineError, run_pipeline
from .poi import MatchParams, extract_pois, load_gray, read_manifest
from .raster import BandRef, Epoch, SceneMeta, Sensor, load_scene, read_mask, read_raster, write_mask
from .sar import SarParams, sar_flood_mask
from .vector import Kind, read_geojson, write_geojson


def _files(values):
    out = []
    for v in values:
        out.extend(p for p in v.split(",") if p)
    return out


def _dates(values, n, flag):
    if not values:
        return [None] * n
    parsed = [dt.date.fromisoformat(d) for d in _files(values)]
    if len(parsed) != n:
        raise click.BadParameter(f"expected {n} dates, got {len(parsed)}", param_hint=flag)
    return parsed


def _fail(exc, stage=None):
    where = f"{stage}: " if stage else ""
    click.echo(f"error: {where}{exc}", err=True)
    sys.exit(1)


def _guard(stage):
    """Turn library errors into exit code 1 with the stage named."""

    def wrap(fn):
        def inner(*args, **kwargs):
            try:
                return fn(*args, **kwargs)
            except FloodFuseError as exc:
                _fail(exc, stage)

        inner.__name__ = fn.__name__
        inner.__doc__ = fn.__doc__
        return inner

    return wrap


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(__version__, prog_name="floodfuse")
@click.option("-v", "--verbose", count=True, help="Log progress to stderr.")
def main(verbose):
    """Flood mapping by optical/SAR mask fusion, with exposure reports.

    FLOODFUSE_BACKEND=numba|numpy selects the kernel implementation;
    FLOODFUSE_THREADS caps kernel threads.
    """
    logging.basicConfig(level=logging.WARNING - 10 * verbose, format="%(levelname)s %(name)s: %(message)s")


@main.command()
@click.option("--pre", "pre", multiple=True, required=True, help="Pre-event image(s); repeat or comma-separate.")
@click.option("--post", "post", multiple=True, required=True, help="Post-event image(s).")
@click.option("--sensor", type=click.Choice(["s2", "l9"]), default="s2", show_default=True)
@click.option("--threshold", type=float, default=0.20, show_default=True, help="NDWI rise that counts as flooding.")
@click.option("--absolute", is_flag=True, help="Threshold post-event NDWI instead of the difference.")
@click.option("--green-band", type=int, default=1, show_default=True)
@click.option("--nir-band", type=int, default=2, show_default=True)
@click.option("--cloud-mask", "clouds", multiple=True,
              help="One per scene (pre scenes first, then post); 'none' to skip a scene.")
@click.option("--pre-date", "pre_dates", multiple=True)
@click.option("--post-date", "post_dates", multiple=True)
@click.option("-o", "--output", required=True, type=click.Path(dir_okay=False))
@_guard("optical")
def optical(pre, post, sensor, threshold, absolute, green_band, nir_band, clouds, pre_dates, post_dates, output):
    """Flood mask from NDWI change between pre and post optical scenes."""
    pre, post = _files(pre), _files(post)
    clouds = _files(clouds)
    if clouds and len(clouds) != len(pre) + len(post):
        raise click.BadParameter(f"need {len(pre) + len(post)} cloud masks, got {len(clouds)}", param_hint="--cloud-mask")
    clouds = [None if c.lower() == "none" else c for c in clouds] or [None] * (len(pre) + len(post))
    sn = Sensor.parse(sensor)

    def scenes(paths, dates, epoch, cl):
        return [
            load_scene(SceneMeta(sn, d, {"GREEN": BandRef(p, green_band), "NIR": BandRef(p, nir_band)}, epoch, c))
            for p, d, c in zip(paths, dates, cl)
        ]

    try:
        params = OpticalParams(threshold, sn, absolute)
    except FloodFuseError as exc:
        raise click.BadParameter(str(exc), param_hint="--threshold")
    mask = optical_flood_mask(
        scenes(pre, _dates(pre_dates, len(pre), "--pre-date"), Epoch.PRE, clouds[: len(pre)]),
        scenes(post, _dates(post_dates, len(post), "--post-date"), Epoch.POST, clouds[len(pre):]),
        params,
    )
    write_mask(mask, output)


@main.command()
@click.option("--pre", "pre", multiple=True, required=True)
@click.option("--post", "post", multiple=True, required=True)
@click.option("--threshold-db", type=float, default=1.25, show_default=True)
@click.option("--window", type=int, default=5, show_default=True)
@click.option("--kind", type=click.Choice(["median", "mean"]), default="median", show_default=True)
@click.option("--min-cluster", type=int, default=8, show_default=True)
@click.option("--polarization", type=click.Choice(["VH", "VV"], case_sensitive=False), default="VH", show_default=True)
@click.option("--band", type=int, default=1, show_default=True)
@click.option("--permanent-water", type=click.Path(exists=True, dir_okay=False))
@click.option("--slope-mask", type=click.Path(exists=True, dir_okay=False))
@click.option("--pre-date", "pre_dates", multiple=True)
@click.option("--post-date", "post_dates", multiple=True)
@click.option("-o", "--output", required=True, type=click.Path(dir_okay=False))
@_guard("sar")
def sar(pre, post, threshold_db, window, kind, min_cluster, polarization, band,
        permanent_water, slope_mask, pre_dates, post_dates, output):
    """Flood mask from the backscatter drop between pre and post SAR scenes."""
    pre, post = _files(pre), _files(post)
    pol = polarization.upper()
    try:
        params = SarParams(
            speckle_window=window, speckle_kind=kind, diff_db_threshold=threshold_db, min_cluster_px=min_cluster,
            permanent_water=read_raster(permanent_water) if permanent_water else None,
            slope_mask=read_raster(slope_mask) if slope_mask else None,
        )
    except FloodFuseError as exc:
        raise click.BadParameter(str(exc))

    def scenes(paths, dates, epoch):
        return [load_scene(SceneMeta(Sensor.SENTINEL1, d, {pol: BandRef(p, band)}, epoch)) for p, d in zip(paths, dates)]

    mask = sar_flood_mask(
        scenes(pre, _dates(pre_dates, len(pre), "--pre-date"), Epoch.PRE),
        scenes(post, _dates(post_dates, len(post), "--post-date"), Epoch.POST),
        params,
    )
    write_mask(mask, output)


@main.command(name="fuse")
@click.option("--rule", type=click.Choice([r.value for r in Rule]), default="intersect", show_default=True)
@click.argument("masks", nargs=-1, required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("-o", "--output", required=True, type=click.Path(dir_okay=False))
@_guard("fuse")
def fuse_cmd(rule, masks, output):
    """Fuse flood masks pixel-wise (aligned to the finest input grid)."""
    fused = fuse(align_masks([read_mask(m) for m in masks]), rule)
    write_mask(fused, output)


@main.command(name="availability")
@click.option("--scenes", required=True, type=click.Path(exists=True, dir_okay=False), help="CSV with sensor,date columns.")
@click.option("--from", "start", required=True, type=click.DateTime(["%Y-%m-%d"]))
@click.option("--to", "end", required=True, type=click.DateTime(["%Y-%m-%d"]))
@click.option("-o", "--output", required=True, type=click.Path(dir_okay=False))
@_guard("availability")
def availability_cmd(scenes, start, end, output):
    """Per-day acquisition coverage by sensor and combined."""
    cov = availability(read_scene_list(scenes), (start.date(), end.date()))
    write_coverage(cov, output)
    click.echo(f"combined coverage {cov.combined}/{cov.n_days} days")


@main.command(name="impact")
@click.option("--mask", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--zones", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--population", type=click.Path(exists=True, dir_okay=False))
@click.option("--roads", type=click.Path(exists=True, dir_okay=False))
@click.option("--schools", type=click.Path(exists=True, dir_okay=False))
@click.option("--zone-field", default="name", show_default=True)
@click.option("--buffer", "buffer_m", type=float, default=0.0, show_default=True, help="School buffer in metres.")
@click.option("--polygons", type=click.Path(dir_okay=False), help="Also write the vectorized flood polygons here.")
@click.option("-o", "--output", required=True, type=click.Path(dir_okay=False))
@_guard("impact")
def impact_cmd(mask, zones, population, roads, schools, zone_field, buffer_m, polygons, output):
    """Per-zone affected population, road length and schools."""
    fused = read_mask(mask)
    zone_layer = read_geojson(zones, Kind.POLYGON)
    flood = vectorize(fused)
    if polygons:
        write_geojson(flood, polygons)
    pop = affected_population(fused, read_raster(population), zone_layer, zone_field) if population else None
    rd = affected_roads(flood, read_geojson(roads, Kind.POLYLINE), zone_layer, zone_field) if roads else None
    sc = school_counts(flood, read_geojson(schools, Kind.POINT), zone_layer, zone_field, buffer_m) if schools else None
    if pop is None and rd is None and sc is None:
        pop = {n: (0.0, 0.0) for n in zone_layer.names(zone_field)}
    build_report(pop, rd, sc).write_csv(output)


@main.command(name="poi")
@click.option("--tiles", required=True, type=click.Path(exists=True, dir_okay=False), help="path,west,south,east,north,zoom CSV.")
@click.option("--template", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--threshold", type=float, default=0.95, show_default=True)
@click.option("--min-sep", type=float, default=10.0, show_default=True, help="Metres.")
@click.option("-o", "--output", required=True, type=click.Path(dir_okay=False))
@_guard("poi")
def poi_cmd(tiles, template, threshold, min_sep, output):
    """Extract POI coordinates from map tiles by template matching."""
    try:
        params = MatchParams(threshold, min_sep)
    except FloodFuseError as exc:
        raise click.BadParameter(str(exc))
    layer = extract_pois(read_manifest(tiles), load_gray(template), params)
    write_geojson(layer, output)
    click.echo(f"{len(layer)} points")


@main.command(name="run")
@click.argument("config", type=click.Path(dir_okay=False))
def run_cmd(config):
    """Run the whole pipeline from a TOML config."""
    try:
        cfg = load_config(config)
    except ConfigError as exc:
        for field, msg in exc.problems:
            click.echo(f"config error: {field}: {msg}", err=True)
        sys.exit(2)
    try:
        artifacts = run_pipeline(cfg)
    except PipelineError as exc:
        _fail(exc.cause, exc.stage)
    except FloodFuseError as exc:
        _fail(exc)
    for name, path in artifacts.items():
        click.echo(f"{name}\t{path}")


@main.command(name="demo")
@click.argument("directory", type=click.Path(file_okay=False))
@click.option("--seed", type=int, default=0, show_default=True)
def demo_cmd(directory, seed):
    """Write the synthetic fixture (rasters, vectors, config.toml) to DIRECTORY."""
    from .synthetic import write_fixture

    click.echo(write_fixture(Path(directory), seed))


if __name__ == "__main__":  # pragma: no cover
    main()
