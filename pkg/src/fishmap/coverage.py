"""AIS reception coverage: received versus expected lattice points of cruising vessels.

A cruising segment is reconstructed by great-circle interpolation between
received points. Every lattice slot the segment spans is *expected*; slots
holding an actually received point are *received*. The per-cell ratio of
the two is the reliability layer that goes with the density map.
"""

from __future__ import annotations

from collections import Counter
from collections.abc import Iterable
from dataclasses import dataclass, field

import numpy as np

from .grid import CellIndex, DensityRaster, GridSpec, GridSpecMismatch, count_cells
from .parallel import parallel_map
from .sphere import slerp
from .tracks import DecimationConfig, VesselTrack, decimation_index

LOW_COVERAGE = "low_coverage"
NO_COVERAGE_INFO = "no_coverage_info"
COVERAGE_OK = "ok"


@dataclass(frozen=True)
class CoverageConfig:
    cruise_min: float = 8.0
    max_gap: int = 6 * 3600
    lattice: DecimationConfig = DecimationConfig()

    def __post_init__(self):
        if not self.cruise_min > 0:
            raise ValueError(f"cruise_min must be > 0, got {self.cruise_min!r}")
        if self.max_gap < self.lattice.window:
            raise ValueError("max_gap must be at least one lattice window")


@dataclass(frozen=True, eq=False)
class CruiseSegment:
    mmsi: int
    t: np.ndarray
    lat: np.ndarray
    lon: np.ndarray
    sog: np.ndarray

    def __len__(self) -> int:
        return len(self.t)

    @property
    def span(self) -> int:
        return int(self.t[-1] - self.t[0]) if len(self.t) else 0


@dataclass(frozen=True, eq=False)
class ExpectedPositions:
    """Expected lattice positions of a segment; ``received`` marks real reports."""

    t: np.ndarray
    lat: np.ndarray
    lon: np.ndarray
    received: np.ndarray

    def __len__(self) -> int:
        return len(self.t)


def extract_cruise_segments(track: VesselTrack, config: CoverageConfig = CoverageConfig()) -> list[CruiseSegment]:
    """Maximal runs of consecutive points at cruising speed, split at long gaps."""
    idx = np.flatnonzero(track.sog >= config.cruise_min)
    if len(idx) == 0:
        return []
    brk = (np.diff(idx) != 1) | (np.diff(track.t[idx]) > config.max_gap)
    bounds = np.r_[0, np.flatnonzero(brk) + 1, len(idx)]
    return [
        CruiseSegment(track.mmsi, track.t[sel], track.lat[sel], track.lon[sel], track.sog[sel])
        for sel in (idx[a:b] for a, b in zip(bounds[:-1], bounds[1:]))
    ]


def interpolate_expected(segment: CruiseSegment, lattice: DecimationConfig = DecimationConfig()) -> ExpectedPositions:
    """One position per lattice slot between the segment's first and last point.

    A received point stands for its own slot. Each missing slot gets the
    great-circle position at the slot's start time between the bracketing
    received points.
    """
    keep = decimation_index(segment.t, lattice)
    t, lat, lon = segment.t[keep], segment.lat[keep], segment.lon[keep]
    if len(t) < 2:
        return ExpectedPositions(t, lat, lon, np.ones(len(t), bool))
    slots = lattice.slot(t)
    missing = np.diff(slots) - 1
    pair = np.repeat(np.arange(len(t) - 1), missing)
    first_of_pair = np.cumsum(missing) - missing
    offset = np.arange(len(pair)) - np.repeat(first_of_pair, missing)
    tm = lattice.slot_start(slots[pair] + 1 + offset)
    frac = (tm - t[pair]) / (t[pair + 1] - t[pair])
    ilat, ilon = slerp(lat[pair], lon[pair], lat[pair + 1], lon[pair + 1], frac)

    all_t = np.concatenate([t, tm])
    order = np.argsort(all_t, kind="stable")
    return ExpectedPositions(
        all_t[order],
        np.concatenate([lat, ilat])[order],
        np.concatenate([lon, ilon])[order],
        np.concatenate([np.ones(len(t), bool), np.zeros(len(tm), bool)])[order],
    )


@dataclass
class CoverageRaster:
    spec: GridSpec
    received: Counter = field(default_factory=Counter)
    expected: Counter = field(default_factory=Counter)
    skipped: int = 0

    @property
    def ratio(self) -> dict[CellIndex, float]:
        return {c: min(1.0, self.received.get(c, 0) / e) for c, e in self.expected.items() if e > 0}

    def merge(self, other: CoverageRaster) -> CoverageRaster:
        if other.spec != self.spec:
            raise GridSpecMismatch("cannot merge coverage rasters on different grids")
        return CoverageRaster(
            self.spec,
            self.received + other.received,
            self.expected + other.expected,
            self.skipped + other.skipped,
        )


def _track_expected(track: VesselTrack, config: CoverageConfig) -> ExpectedPositions:
    track = track.take(decimation_index(track.t, config.lattice))
    parts = [interpolate_expected(s, config.lattice) for s in extract_cruise_segments(track, config)]
    if not parts:
        return ExpectedPositions(np.empty(0, np.int64), np.empty(0), np.empty(0), np.empty(0, bool))
    return ExpectedPositions(*(np.concatenate(cols) for cols in zip(*((p.t, p.lat, p.lon, p.received) for p in parts))))


def coverage_map(
    tracks: Iterable[VesselTrack],
    config: CoverageConfig = CoverageConfig(),
    spec: GridSpec = GridSpec(),
    threads: int = 1,
) -> CoverageRaster:
    """Per-cell received and expected lattice-point counts over all cruising segments."""
    expected = parallel_map(lambda tr: _track_expected(tr, config), list(tracks), threads)
    if not expected:
        return CoverageRaster(spec)
    lat = np.concatenate([e.lat for e in expected])
    lon = np.concatenate([e.lon for e in expected])
    rec = np.concatenate([e.received for e in expected])
    exp_cells, skipped = count_cells(lat, lon, spec)
    rec_cells, _ = count_cells(lat[rec], lon[rec], spec)
    return CoverageRaster(spec, rec_cells, exp_cells, skipped)


@dataclass(frozen=True)
class ReliabilityRow:
    cell: CellIndex
    count: int
    minutes: float
    ratio: float | None
    flag: str


def reliability_join(
    density: DensityRaster, coverage: CoverageRaster, low_threshold: float = 0.5
) -> list[ReliabilityRow]:
    """Attach the coverage ratio to every density cell, flagging unreliable ones."""
    if density.spec != coverage.spec:
        raise GridSpecMismatch("density and coverage rasters use different grids")
    ratio = coverage.ratio
    rows = []
    for cell in sorted(density.cells):
        r = ratio.get(cell)
        if r is None:
            flag = NO_COVERAGE_INFO
        elif r < low_threshold:
            flag = LOW_COVERAGE
        else:
            flag = COVERAGE_OK
        rows.append(ReliabilityRow(cell, density.cells[cell], density.minutes(cell), r, flag))
    return rows
