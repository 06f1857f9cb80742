"""Equal-area projection and 1 km cell aggregation of fishing points.

Cells live on a Lambert azimuthal equal-area plane (spherical form, authalic
radius) with the parameters of the EU 1 km reference grid, so every cell is
one square kilometre.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .sphere import EARTH_RADIUS_M

ANTIPODE_EPS = 1e-12


class AntipodalPoint(ValueError):
    pass


class GridSpecMismatch(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    lat0: float = 52.0
    lon0: float = 10.0
    false_easting: float = 4321000.0
    false_northing: float = 3210000.0
    cell_size: float = 1000.0
    radius: float = EARTH_RADIUS_M

    def __post_init__(self):
        if not self.cell_size > 0:
            raise ValueError(f"cell_size must be > 0, got {self.cell_size!r}")
        if not -90.0 < self.lat0 < 90.0:
            raise ValueError(f"projection centre latitude must be in (-90, 90), got {self.lat0!r}")
        if not self.radius > 0:
            raise ValueError(f"sphere radius must be > 0, got {self.radius!r}")

    def describe(self) -> str:
        return (
            f"laea lat0={self.lat0!r} lon0={self.lon0!r} fe={self.false_easting!r} "
            f"fn={self.false_northing!r} cell={self.cell_size!r} radius={self.radius!r}"
        )


class CellIndex(NamedTuple):
    ix: int
    iy: int

    def origin(self, spec: GridSpec) -> tuple[float, float]:
        return self.ix * spec.cell_size, self.iy * spec.cell_size

    def center(self, spec: GridSpec) -> tuple[float, float]:
        return (self.ix + 0.5) * spec.cell_size, (self.iy + 0.5) * spec.cell_size


def _forward(lat, lon, spec: GridSpec):
    phi = np.radians(np.asarray(lat, dtype=np.float64))
    dlam = np.radians(np.asarray(lon, dtype=np.float64) - spec.lon0)
    phi1 = math.radians(spec.lat0)
    sin1, cos1 = math.sin(phi1), math.cos(phi1)
    sin_phi, cos_phi, cos_dlam = np.sin(phi), np.cos(phi), np.cos(dlam)
    denom = 1.0 + sin1 * sin_phi + cos1 * cos_phi * cos_dlam
    with np.errstate(divide="ignore", invalid="ignore"):
        k = np.sqrt(2.0 / denom)
    x = spec.false_easting + spec.radius * k * cos_phi * np.sin(dlam)
    y = spec.false_northing + spec.radius * k * (cos1 * sin_phi - sin1 * cos_phi * cos_dlam)
    return x, y, denom > ANTIPODE_EPS


def project(lat, lon, spec: GridSpec = GridSpec()):
    """Forward projection of geographic degrees to grid metres (x east, y north).

    Raises AntipodalPoint for points at (or numerically at) the antipode of
    the projection centre.
    """
    x, y, ok = _forward(lat, lon, spec)
    if not np.all(ok):
        raise AntipodalPoint("point is antipodal to the projection centre")
    if x.ndim == 0:
        return float(x), float(y)
    return x, y


def unproject(x, y, spec: GridSpec = GridSpec()):
    """Inverse projection from grid metres back to (lat, lon) degrees."""
    xs = np.asarray(x, dtype=np.float64) - spec.false_easting
    ys = np.asarray(y, dtype=np.float64) - spec.false_northing
    rho = np.hypot(xs, ys)
    c = 2.0 * np.arcsin(np.clip(rho / (2.0 * spec.radius), -1.0, 1.0))
    phi1 = math.radians(spec.lat0)
    sin_c, cos_c = np.sin(c), np.cos(c)
    with np.errstate(divide="ignore", invalid="ignore"):
        sin_phi = cos_c * math.sin(phi1) + np.where(rho > 0, ys * sin_c * math.cos(phi1) / rho, 0.0)
    lat = np.degrees(np.arcsin(np.clip(sin_phi, -1.0, 1.0)))
    lon = spec.lon0 + np.degrees(
        np.arctan2(xs * sin_c, rho * math.cos(phi1) * cos_c - ys * math.sin(phi1) * sin_c)
    )
    lon = np.mod(lon + 180.0, 360.0) - 180.0
    if lat.ndim == 0:
        return float(lat), float(lon)
    return lat, lon


def cell_of(x: float, y: float, spec: GridSpec = GridSpec()) -> CellIndex:
    """Half-open cell containing (x, y); floors toward minus infinity."""
    return CellIndex(math.floor(x / spec.cell_size), math.floor(y / spec.cell_size))


def cells_of(x, y, spec: GridSpec = GridSpec()) -> tuple[np.ndarray, np.ndarray]:
    return (
        np.floor(np.asarray(x) / spec.cell_size).astype(np.int64),
        np.floor(np.asarray(y) / spec.cell_size).astype(np.int64),
    )


def count_cells(lat, lon, spec: GridSpec = GridSpec(), strict: bool = False):
    """Count points per cell; returns (Counter of CellIndex -> count, skipped antipodal)."""
    lat = np.asarray(lat, dtype=np.float64)
    lon = np.asarray(lon, dtype=np.float64)
    x, y, ok = _forward(lat, lon, spec)
    skipped = int(len(ok) - np.count_nonzero(ok))
    if skipped and strict:
        raise AntipodalPoint(f"{skipped} point(s) antipodal to the projection centre")
    ix, iy = cells_of(x[ok], y[ok], spec)
    return _run_counts(ix, iy), skipped


def _run_counts(ix: np.ndarray, iy: np.ndarray) -> Counter:
    if len(ix) == 0:
        return Counter()
    order = np.lexsort((iy, ix))
    ix, iy = ix[order], iy[order]
    start = np.flatnonzero(np.r_[True, (ix[1:] != ix[:-1]) | (iy[1:] != iy[:-1])])
    counts = np.diff(np.r_[start, len(ix)])
    return Counter(
        {
            CellIndex(a, b): c
            for a, b, c in zip(ix[start].tolist(), iy[start].tolist(), counts.tolist())
        }
    )


@dataclass
class DensityRaster:
    """Sparse per-cell counts of fishing points; ``quantum`` is minutes per point."""

    spec: GridSpec
    cells: Counter = field(default_factory=Counter)
    quantum: float = 5.0
    skipped: int = 0

    @property
    def total(self) -> int:
        return sum(self.cells.values())

    def minutes(self, cell: CellIndex) -> float:
        return self.cells.get(cell, 0) * self.quantum

    def merge(self, other: DensityRaster) -> DensityRaster:
        if other.spec != self.spec:
            raise GridSpecMismatch("cannot merge rasters on different grids")
        if other.quantum != self.quantum:
            raise ValueError("cannot merge rasters with different time quanta")
        return DensityRaster(self.spec, self.cells + other.cells, self.quantum, self.skipped + other.skipped)


def _coordinates(points):
    lat = getattr(points, "lat", None)
    if isinstance(lat, np.ndarray):
        return lat, points.lon
    pts = list(points)
    return (
        np.array([p.lat for p in pts], dtype=np.float64),
        np.array([p.lon for p in pts], dtype=np.float64),
    )


def aggregate(points, spec: GridSpec = GridSpec(), quantum: float = 5.0, strict: bool = False) -> DensityRaster:
    """Count fishing points per equal-area cell.

    ``points`` is a column table with ``lat``/``lon`` arrays or any iterable
    of objects with ``lat``/``lon`` attributes. Antipodal points are counted
    in ``skipped`` (or raise when ``strict``).
    """
    lat, lon = _coordinates(points)
    cells, skipped = count_cells(lat, lon, spec, strict)
    return DensityRaster(spec, cells, quantum, skipped)
