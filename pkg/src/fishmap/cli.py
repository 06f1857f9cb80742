"""Command line entry point: ``fishmap classify | grid | coverage | synth | run``."""

from __future__ import annotations

import argparse
import logging
import sys
from collections import Counter
from collections.abc import Callable
from pathlib import Path

from . import __version__
from .config import ConfigError, RunConfig, field_types, load_config
from .coverage import reliability_join
from .export import (
    read_fishing_points,
    ratio_fmt,
    write_ascii_grid,
    write_coverage_cells,
    write_density_cells,
    write_diagnostics,
    write_fishing_points,
    write_geojson,
    write_reliability,
)
from .grid import AntipodalPoint
from .ingest import (
    AisTable,
    IngestError,
    RegisterError,
    load_fleet_register,
    load_static_pairs,
    parse_ais_csv,
)
from .pipeline import classify_tracks, coverage_raster, density_map, fishing_tracks
from .synth import ScenarioConfig, SynthVesselParams, write_scenario
from .tracks import build_tracks

logger = logging.getLogger("fishmap")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INPUT = 3


class InputError(Exception):
    pass


def _read_ais(path: Path, strict: bool) -> AisTable:
    try:
        with open(path, "rb") as f:
            table, report = parse_ais_csv(f, strict=strict)
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror or exc}") from None
    except IngestError as exc:
        raise InputError(f"{path}: {exc}") from None
    logger.info("%s: %d rows read, %d accepted", path, report.rows_read, report.rows_accepted)
    if report.rows_rejected:
        reasons = ", ".join(f"{k}={v}" for k, v in sorted(report.rejection_histogram.items()))
        logger.warning("%s: %d rows rejected (%s)", path, report.rows_rejected, reasons)
    return table


def _read_file(path: Path, loader: Callable, binary: bool = True):
    try:
        with (open(path, "rb") if binary else open(path, newline="", encoding="utf-8")) as f:
            return loader(f)
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror or exc}") from None
    except (RegisterError, IngestError, UnicodeDecodeError) as exc:
        raise InputError(f"{path}: {exc}") from None


def _write(path: Path, writer: Callable, *args, **kwargs) -> None:
    with open(path, "w", newline="\n", encoding="utf-8") as f:
        writer(f, *args, **kwargs)
    logger.info("wrote %s", path)


def _write_grid(path: Path, values, cfg: RunConfig, fmt=None) -> None:
    def write(f):
        for line in cfg.header_lines():
            f.write(line + "\n")
        if fmt is None:
            write_ascii_grid(f, values, cfg.grid())
        else:
            write_ascii_grid(f, values, cfg.grid(), fmt)

    _write(path, write)


def _load_register(args):
    register = _read_file(args.register, load_fleet_register)
    pairs = _read_file(args.static_pairs, load_static_pairs) if args.static_pairs else None
    return register, pairs


def _classify(args, cfg: RunConfig, tracks):
    register, pairs = _load_register(args)
    linked = fishing_tracks(tracks, register, pairs)
    result = classify_tracks(linked, cfg, args.threads)
    statuses = Counter(s.status for s in result.summary.values())
    logger.info(
        "%d fishing point(s) from %d linked vessel(s); %s",
        len(result.points),
        len(linked),
        ", ".join(f"{k}={v}" for k, v in sorted(statuses.items())),
    )
    for mmsi, s in sorted(result.summary.items()):
        if s.status != "fitted":
            logger.warning("vessel %09d skipped: %s", mmsi, s.status)
    return result


def _write_classification(out: Path, result, cfg: RunConfig) -> None:
    header = cfg.header_lines()
    _write(out / "fishing_points.csv", write_fishing_points, result.points, header)
    _write(out / "diagnostics.csv", write_diagnostics, result.fits, header)


def _write_density(out: Path, raster, cfg: RunConfig, geojson: bool) -> None:
    if not raster.cells:
        logger.warning("density raster is empty")
    _write_grid(out / "density.asc", raster.cells, cfg)
    _write(out / "density_cells.csv", write_density_cells, raster, cfg.header_lines())
    if geojson:
        _write(out / "density.geojson", write_geojson, dict(raster.cells), cfg.grid(), "count")


def _write_coverage(out: Path, raster, cfg: RunConfig, geojson: bool) -> None:
    ratio = raster.ratio
    if not ratio:
        logger.warning("coverage raster is empty: no cruise segments found")
    _write_grid(out / "coverage.asc", ratio, cfg, ratio_fmt)
    _write(out / "coverage_cells.csv", write_coverage_cells, raster, cfg.header_lines())
    if geojson:
        _write(out / "coverage.geojson", write_geojson, ratio, cfg.grid(), "ratio")


def cmd_classify(args, cfg: RunConfig) -> int:
    tracks = build_tracks(_read_ais(args.ais, cfg.strict))
    result = _classify(args, cfg, tracks)
    _write_classification(args.output_dir, result, cfg)
    return EXIT_OK


def cmd_grid(args, cfg: RunConfig) -> int:
    points = _read_file(args.points, read_fishing_points, binary=False)
    if not len(points):
        logger.warning("%s: no fishing points", args.points)
    raster = density_map(points, cfg)
    _write_density(args.output_dir, raster, cfg, args.geojson)
    return EXIT_OK


def cmd_coverage(args, cfg: RunConfig) -> int:
    tracks = build_tracks(_read_ais(args.ais, cfg.strict))
    raster = coverage_raster(tracks, cfg, args.threads)
    _write_coverage(args.output_dir, raster, cfg, args.geojson)
    return EXIT_OK


def cmd_run(args, cfg: RunConfig) -> int:
    tracks = build_tracks(_read_ais(args.ais, cfg.strict))
    result = _classify(args, cfg, tracks)
    density = density_map(result.points, cfg)
    if args.coverage_ais is not None:
        tracks = build_tracks(_read_ais(args.coverage_ais, cfg.strict))
    coverage = coverage_raster(tracks, cfg, args.threads)
    del tracks
    out = args.output_dir
    _write_classification(out, result, cfg)
    _write_density(out, density, cfg, args.geojson)
    _write_coverage(out, coverage, cfg, args.geojson)
    rows = reliability_join(density, coverage, cfg.low_coverage)
    _write(out / "reliability.csv", write_reliability, rows, cfg.header_lines())
    return EXIT_OK


def cmd_synth(args, cfg: RunConfig) -> int:
    try:
        vessel = SynthVesselParams(
            mu_fish=args.mu_fish,
            sigma_fish=args.sigma_fish,
            mu_steam=args.mu_steam,
            sigma_steam=args.sigma_steam,
            p_stay=args.p_stay,
            report_period=args.report_period,
            reception_p=args.reception_p,
        )
        scenario = ScenarioConfig(
            n_fishing=args.n_fishing,
            hours=args.hours,
            n_cruisers=args.n_cruisers,
            cruiser_speed=args.cruiser_speed,
            fishing=vessel,
            cruiser_reception_p=args.cruiser_reception_p,
            cruiser_report_period=args.cruiser_report_period,
            seed=cfg.seed,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    paths = write_scenario(scenario, args.output_dir)
    for p in paths.values():
        logger.info("wrote %s", p)
    return EXIT_OK


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("configuration (override --config)")
    g.add_argument("--config", type=Path, metavar="PATH", help="key=value configuration file")
    g.add_argument("--strict", action="store_const", const="true", default=None,
                   help="abort on the first malformed AIS row")
    for name, kind in field_types().items():
        if name == "strict":
            continue
        g.add_argument("--" + name.replace("_", "-"), dest=name, default=None, metavar=kind.upper())


def _add_common(p: argparse.ArgumentParser, *, threads: bool = True) -> None:
    p.add_argument("-o", "--output-dir", type=Path, default=Path("."), help="output directory")
    if threads:
        p.add_argument("--threads", type=int, default=1, help="worker threads (output does not depend on it)")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    _add_config_flags(p)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fishmap", description=__doc__)
    parser.add_argument("--version", action="version", version=f"fishmap {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify", help="fishing points and per-vessel mixture diagnostics")
    p.add_argument("ais", type=Path)
    p.add_argument("register", type=Path)
    p.add_argument("static_pairs", type=Path, nargs="?")
    _add_common(p)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("grid", help="density raster from a fishing points file")
    p.add_argument("points", type=Path)
    p.add_argument("--geojson", action="store_true")
    _add_common(p, threads=False)
    p.set_defaults(func=cmd_grid, threads=1)

    p = sub.add_parser("coverage", help="reception coverage raster from all AIS traffic")
    p.add_argument("ais", type=Path)
    p.add_argument("--geojson", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_coverage)

    p = sub.add_parser("run", help="classify, grid, coverage and the reliability join")
    p.add_argument("ais", type=Path)
    p.add_argument("register", type=Path)
    p.add_argument("static_pairs", type=Path, nargs="?")
    p.add_argument("--coverage-ais", type=Path, help="separate AIS file for coverage (default: the main one)")
    p.add_argument("--geojson", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("synth", help="write a synthetic scenario (ais, labels, register, static pairs)")
    defaults, vessel = ScenarioConfig(), SynthVesselParams()
    p.add_argument("--n-fishing", type=int, default=defaults.n_fishing)
    p.add_argument("--hours", type=float, default=defaults.hours)
    p.add_argument("--n-cruisers", type=int, default=defaults.n_cruisers)
    p.add_argument("--cruiser-speed", type=float, default=defaults.cruiser_speed)
    p.add_argument("--cruiser-reception-p", type=float, default=defaults.cruiser_reception_p)
    p.add_argument("--cruiser-report-period", type=int, default=defaults.cruiser_report_period)
    p.add_argument("--mu-fish", type=float, default=vessel.mu_fish)
    p.add_argument("--sigma-fish", type=float, default=vessel.sigma_fish)
    p.add_argument("--mu-steam", type=float, default=vessel.mu_steam)
    p.add_argument("--sigma-steam", type=float, default=vessel.sigma_steam)
    p.add_argument("--p-stay", type=float, default=vessel.p_stay)
    p.add_argument("--report-period", type=int, default=vessel.report_period)
    p.add_argument("--reception-p", type=float, default=vessel.reception_p)
    _add_common(p, threads=False)
    p.set_defaults(func=cmd_synth, threads=1)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="fishmap: %(levelname)s: %(message)s",
        stream=sys.stderr,
    )
    overrides = {name: getattr(args, name) for name in field_types() if getattr(args, name, None) is not None}
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        cfg = load_config(args.config, overrides)
        args.output_dir.mkdir(parents=True, exist_ok=True)
        return args.func(args, cfg)
    except ConfigError as exc:
        print(f"fishmap: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InputError as exc:
        print(f"fishmap: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except AntipodalPoint as exc:
        print(f"fishmap: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"fishmap: cannot write output: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
