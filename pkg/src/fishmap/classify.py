"""Fishing speed bands and selection of fishing points per vessel."""

from __future__ import annotations

import logging
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from datetime import datetime

import numpy as np

from .ingest import epoch_to_datetime
from .mixture import FitError, MixtureFit, separation_diagnostics
from .tracks import VesselTrack

logger = logging.getLogger(__name__)

INCLUDE = "include"
EXCLUDE = "exclude"
AMBIGUOUS_POLICIES = (INCLUDE, EXCLUDE)


@dataclass(frozen=True)
class SpeedBand:
    v_lo: float
    v_hi: float
    k: float

    def contains(self, sog) -> np.ndarray:
        s = np.asarray(sog)
        return (s > self.v_lo) & (s < self.v_hi)


def fishing_band(fit: MixtureFit, k: float = 2.0) -> SpeedBand:
    """Speed interval of +/- k standard deviations around the slow mode, clamped at 0."""
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k!r}")
    half = k * fit.sigma1
    return SpeedBand(max(0.0, fit.mu1 - half), fit.mu1 + half, k)


@dataclass(frozen=True)
class FishingPoint:
    mmsi: int
    timestamp: datetime
    lat: float
    lon: float
    sog: float
    ambiguous: bool = False


@dataclass(frozen=True, eq=False)
class FishingPoints(Sequence):
    """Column table of fishing points; indexing yields :class:`FishingPoint`."""

    mmsi: np.ndarray
    t: np.ndarray
    lat: np.ndarray
    lon: np.ndarray
    sog: np.ndarray
    ambiguous: np.ndarray

    def __len__(self) -> int:
        return len(self.t)

    def __getitem__(self, i):
        if isinstance(i, (slice, np.ndarray)):
            return self.take(i)
        return FishingPoint(
            int(self.mmsi[i]),
            epoch_to_datetime(self.t[i]),
            float(self.lat[i]),
            float(self.lon[i]),
            float(self.sog[i]),
            bool(self.ambiguous[i]),
        )

    def columns(self):
        return self.mmsi, self.t, self.lat, self.lon, self.sog, self.ambiguous

    def take(self, idx) -> FishingPoints:
        return FishingPoints(*(c[idx] for c in self.columns()))

    def keys(self) -> set[tuple[int, int]]:
        return set(zip(self.mmsi.tolist(), self.t.tolist()))

    def sorted(self) -> FishingPoints:
        """Canonical (mmsi, timestamp) order."""
        return self.take(np.lexsort((self.t, self.mmsi)))

    def same_as(self, other: FishingPoints) -> bool:
        return len(self) == len(other) and all(
            np.array_equal(a, b) for a, b in zip(self.columns(), other.columns())
        )

    @classmethod
    def empty(cls) -> FishingPoints:
        return cls(
            np.empty(0, np.int64),
            np.empty(0, np.int64),
            np.empty(0),
            np.empty(0),
            np.empty(0),
            np.empty(0, bool),
        )

    @classmethod
    def concat(cls, parts: Iterable[FishingPoints]) -> FishingPoints:
        parts = list(parts)
        if not parts:
            return cls.empty()
        return cls(*(np.concatenate(cols) for cols in zip(*(p.columns() for p in parts))))


def classify_track(
    track: VesselTrack, band: SpeedBand, min_speed: float | None = None, ambiguous: bool = False
) -> FishingPoints:
    """Track points whose speed lies strictly inside ``band``.

    With ``min_speed`` set, points at or below it are excluded as well
    (the band is then applied only to the series the mixture was fitted on).
    """
    mask = band.contains(track.sog)
    if min_speed is not None:
        mask &= track.sog > min_speed
    idx = np.flatnonzero(mask)
    return FishingPoints(
        np.full(len(idx), track.mmsi, np.int64),
        track.t[idx],
        track.lat[idx],
        track.lon[idx],
        track.sog[idx],
        np.full(len(idx), ambiguous, bool),
    )


@dataclass(frozen=True)
class VesselSummary:
    mmsi: int
    n_points: int
    n_fishing: int
    status: str
    ambiguous: bool = False
    band: SpeedBand | None = None


def identify_fishing(
    tracks: Iterable[VesselTrack],
    fits: Mapping[int, MixtureFit | FitError],
    k: float = 2.0,
    policy: str = INCLUDE,
    band_applies_to_filtered: bool = False,
    min_speed: float = 0.5,
) -> tuple[FishingPoints, dict[int, VesselSummary]]:
    """Select the fishing points of every vessel with a usable mixture fit.

    Vessels whose fit failed are skipped and recorded in the summary. Vessels
    with an ambiguous fit are kept and tagged (``policy="include"``) or
    dropped (``policy="exclude"``).
    """
    if policy not in AMBIGUOUS_POLICIES:
        raise ValueError(f"unknown ambiguous-fit policy {policy!r}")
    parts = []
    summary: dict[int, VesselSummary] = {}
    for track in tracks:
        fit = fits.get(track.mmsi)
        if fit is None or isinstance(fit, FitError):
            status = "no_fit" if fit is None else fit.reason
            logger.info("vessel %09d skipped: %s", track.mmsi, status)
            summary[track.mmsi] = VesselSummary(track.mmsi, len(track), 0, status)
            continue
        ambiguous = separation_diagnostics(fit).ambiguous
        band = fishing_band(fit, k)
        if ambiguous and policy == EXCLUDE:
            summary[track.mmsi] = VesselSummary(track.mmsi, len(track), 0, "excluded_ambiguous", True, band)
            continue
        pts = classify_track(track, band, min_speed if band_applies_to_filtered else None, ambiguous)
        parts.append(pts)
        summary[track.mmsi] = VesselSummary(track.mmsi, len(track), len(pts), "fitted", ambiguous, band)
    return FishingPoints.concat(parts).sorted(), summary
