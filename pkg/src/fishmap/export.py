"""File writers: ESRI ASCII grids, sparse cell CSVs, point tables and GeoJSON cells."""

from __future__ import annotations

import csv
import json
import math
from collections.abc import Callable, Iterable, Mapping
from typing import TextIO

import numpy as np
import pyarrow as pa

from .classify import FishingPoints
from .coverage import CoverageRaster, ReliabilityRow
from .grid import CellIndex, DensityRaster, GridSpec, unproject
from .ingest import IngestError, parse_timestamps, format_timestamp
from .mixture import MixtureFit, separation_diagnostics

NODATA = -9999

FISHING_POINT_COLUMNS = ("mmsi", "timestamp", "lat", "lon", "sog", "ambiguous")
DIAGNOSTIC_COLUMNS = (
    "mmsi", "w1", "mu1", "sigma1", "w2", "mu2", "sigma2",
    "loglik", "iterations", "converged", "ambiguous", "n_samples",
)


def _num(v: float) -> str:
    """Integral floats without a decimal point, others in shortest round-trip form."""
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def _flag(b) -> str:
    return "true" if b else "false"


def _write_header(stream: TextIO, header: Iterable[str] | None) -> None:
    for line in header or ():
        stream.write(line + "\n")


def write_ascii_grid(
    stream: TextIO,
    values: Mapping[CellIndex, float],
    spec: GridSpec,
    fmt: Callable[[float], str] = lambda v: str(int(v)),
) -> None:
    """Dense ESRI ASCII grid over the bounding box of ``values``; rows run north to south.

    An empty map is written as a single NODATA cell at the grid origin.
    """
    if values:
        ix = np.fromiter((c[0] for c in values), np.int64, len(values))
        iy = np.fromiter((c[1] for c in values), np.int64, len(values))
        x0, x1, y0, y1 = ix.min(), ix.max(), iy.min(), iy.max()
    else:
        x0 = x1 = y0 = y1 = 0
    ncols, nrows = int(x1 - x0 + 1), int(y1 - y0 + 1)
    stream.write(f"ncols {ncols}\n")
    stream.write(f"nrows {nrows}\n")
    stream.write(f"xllcorner {_num(x0 * spec.cell_size)}\n")
    stream.write(f"yllcorner {_num(y0 * spec.cell_size)}\n")
    stream.write(f"cellsize {_num(spec.cell_size)}\n")
    stream.write(f"NODATA_value {NODATA}\n")
    rows: list[list[str]] = [[str(NODATA)] * ncols for _ in range(nrows)]
    for (cx, cy), v in values.items():
        rows[int(y1 - cy)][int(cx - x0)] = fmt(v)
    for row in rows:
        stream.write(" ".join(row) + "\n")


def ratio_fmt(v: float) -> str:
    return f"{v:.4f}"


def write_density_cells(stream: TextIO, raster: DensityRaster, header: Iterable[str] | None = None) -> None:
    _write_header(stream, header)
    stream.write("ix,iy,x_center,y_center,count,minutes\n")
    for cell in sorted(raster.cells):
        xc, yc = cell.center(raster.spec)
        n = raster.cells[cell]
        stream.write(f"{cell.ix},{cell.iy},{_num(xc)},{_num(yc)},{n},{_num(raster.minutes(cell))}\n")


def write_coverage_cells(stream: TextIO, raster: CoverageRaster, header: Iterable[str] | None = None) -> None:
    _write_header(stream, header)
    stream.write("ix,iy,x_center,y_center,received,expected,ratio\n")
    ratio = raster.ratio
    for cell in sorted(raster.expected):
        xc, yc = CellIndex(*cell).center(raster.spec)
        r = ratio.get(cell)
        stream.write(
            f"{cell[0]},{cell[1]},{_num(xc)},{_num(yc)},{raster.received.get(cell, 0)},"
            f"{raster.expected[cell]},{'' if r is None else ratio_fmt(r)}\n"
        )


def write_reliability(stream: TextIO, rows: Iterable[ReliabilityRow], header: Iterable[str] | None = None) -> None:
    _write_header(stream, header)
    stream.write("ix,iy,count,minutes,ratio,flag\n")
    for r in rows:
        ratio = "" if r.ratio is None else ratio_fmt(r.ratio)
        stream.write(f"{r.cell[0]},{r.cell[1]},{r.count},{_num(r.minutes)},{ratio},{r.flag}\n")


def write_fishing_points(stream: TextIO, points: FishingPoints, header: Iterable[str] | None = None) -> None:
    _write_header(stream, header)
    stream.write(",".join(FISHING_POINT_COLUMNS) + "\n")
    ts = format_timestamp(points.t).tolist()
    stream.write(
        "".join(
            f"{m:09d},{t},{la!r},{lo!r},{s!r},{_flag(a)}\n"
            for m, t, la, lo, s, a in zip(
                points.mmsi.tolist(), ts, points.lat.tolist(), points.lon.tolist(),
                points.sog.tolist(), points.ambiguous.tolist(),
            )
        )
    )


def read_fishing_points(stream: TextIO) -> FishingPoints:
    """Read a fishing-point CSV written by :func:`write_fishing_points` (``#`` lines skipped)."""
    reader = csv.reader(line for line in stream if not line.startswith("#"))
    header = next(reader, None)
    if header is None or tuple(header) != FISHING_POINT_COLUMNS:
        raise IngestError(f"fishing points: expected header {','.join(FISHING_POINT_COLUMNS)!r}, got {header!r}")
    rows = list(reader)
    if not rows:
        return FishingPoints.empty()
    if any(len(r) != len(FISHING_POINT_COLUMNS) for r in rows):
        raise IngestError("fishing points: wrong number of fields")
    mmsi, ts, lat, lon, sog, amb = zip(*rows)
    t, ok = parse_timestamps(pa.array(ts, pa.string()))
    if not ok.all():
        raise IngestError(f"fishing points: bad timestamp {ts[int(np.flatnonzero(~ok)[0])]!r}")
    try:
        return FishingPoints(
            np.array(mmsi, dtype=np.int64),
            t,
            np.array(lat, dtype=np.float64),
            np.array(lon, dtype=np.float64),
            np.array(sog, dtype=np.float64),
            np.array([a == "true" for a in amb], dtype=bool),
        )
    except ValueError as exc:
        raise IngestError(f"fishing points: {exc}") from None


def write_diagnostics(
    stream: TextIO,
    fits: Mapping[int, MixtureFit],
    header: Iterable[str] | None = None,
) -> None:
    """One row per fitted vessel, in MMSI order."""
    _write_header(stream, header)
    stream.write(",".join(DIAGNOSTIC_COLUMNS) + "\n")
    for mmsi in sorted(fits):
        f = fits[mmsi]
        if not isinstance(f, MixtureFit):
            continue
        amb = separation_diagnostics(f).ambiguous
        stream.write(
            f"{mmsi:09d},{f.w1!r},{f.mu1!r},{f.sigma1!r},{f.w2!r},{f.mu2!r},{f.sigma2!r},"
            f"{f.loglik!r},{f.iterations},{_flag(f.converged)},{_flag(amb)},{f.n_samples}\n"
        )


def cell_polygon(cell: CellIndex, spec: GridSpec) -> list[list[float]]:
    """Cell outline as a closed GeoJSON ring of [lon, lat] pairs."""
    x0, y0 = cell.origin(spec)
    s = spec.cell_size
    xs = np.array([x0, x0 + s, x0 + s, x0, x0])
    ys = np.array([y0, y0, y0 + s, y0 + s, y0])
    lat, lon = unproject(xs, ys, spec)
    return [[round(float(a), 7), round(float(b), 7)] for a, b in zip(lon, lat)]


def write_geojson(
    stream: TextIO,
    values: Mapping[CellIndex, float],
    spec: GridSpec,
    name: str = "value",
) -> None:
    features = []
    for cell in sorted(values):
        v = values[cell]
        features.append(
            {
                "type": "Feature",
                "geometry": {"type": "Polygon", "coordinates": [cell_polygon(CellIndex(*cell), spec)]},
                "properties": {"ix": cell[0], "iy": cell[1], name: v if math.isfinite(v) else None},
            }
        )
    json.dump({"type": "FeatureCollection", "features": features}, stream, separators=(",", ":"))
    stream.write("\n")
