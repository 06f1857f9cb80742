"""Per-vessel track assembly and time decimation onto a fixed lattice."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .ingest import AisMessage, AisTable

# Fit the speed mixture on decimated tracks (True) or on the raw report stream.
DECIMATE_BEFORE_FIT = True

DEFAULT_WINDOW_S = 300


@dataclass(frozen=True)
class DecimationConfig:
    """Lattice of ``window``-second slots anchored at ``anchor`` (Unix seconds)."""

    window: int = DEFAULT_WINDOW_S
    anchor: int = 0

    def __post_init__(self):
        if self.window <= 0:
            raise ValueError(f"decimation window must be > 0, got {self.window}")

    @property
    def minutes_per_point(self) -> float:
        return self.window / 60.0

    def slot(self, t) -> np.ndarray:
        return np.floor_divide(np.asarray(t, dtype=np.int64) - self.anchor, self.window)

    def slot_start(self, n) -> np.ndarray:
        return np.asarray(n, dtype=np.int64) * self.window + self.anchor


@dataclass(frozen=True, eq=False)
class VesselTrack(Sequence):
    """Time-ascending messages of one vessel, stored column-wise."""

    mmsi: int
    t: np.ndarray
    lat: np.ndarray
    lon: np.ndarray
    sog: np.ndarray
    cog: np.ndarray

    def __len__(self) -> int:
        return len(self.t)

    def __getitem__(self, i):
        if isinstance(i, (slice, np.ndarray)):
            return self.take(i)
        return self.table()[i]

    def take(self, idx) -> VesselTrack:
        return VesselTrack(self.mmsi, self.t[idx], self.lat[idx], self.lon[idx], self.sog[idx], self.cog[idx])

    def table(self) -> AisTable:
        return AisTable(
            np.full(len(self.t), self.mmsi, np.int64), self.t, self.lat, self.lon, self.sog, self.cog
        )

    @property
    def points(self) -> list[AisMessage]:
        return list(self.table())

    @classmethod
    def from_table(cls, mmsi: int, table: AisTable) -> VesselTrack:
        return cls(int(mmsi), table.t, table.lat, table.lon, table.sog, table.cog)


def build_tracks(messages: AisTable) -> list[VesselTrack]:
    """Group messages into one time-sorted track per MMSI.

    Messages sharing (mmsi, timestamp) collapse to the first one in input
    order. Tracks come back ordered by MMSI.
    """
    if len(messages) == 0:
        return []
    order = np.lexsort((messages.t, messages.mmsi))  # stable: ties keep input order
    mmsi = messages.mmsi[order]
    t = messages.t[order]
    keep = np.ones(len(order), bool)
    keep[1:] = (mmsi[1:] != mmsi[:-1]) | (t[1:] != t[:-1])
    sorted_msgs = messages.take(order[keep])
    starts = np.flatnonzero(np.r_[True, sorted_msgs.mmsi[1:] != sorted_msgs.mmsi[:-1]])
    bounds = np.r_[starts, len(sorted_msgs)]
    return [
        VesselTrack.from_table(sorted_msgs.mmsi[a], sorted_msgs[a:b])
        for a, b in zip(bounds[:-1], bounds[1:])
    ]


def decimation_index(t: np.ndarray, config: DecimationConfig = DecimationConfig()) -> np.ndarray:
    """Indices of the first sample in each lattice slot of an ascending time array."""
    slot = config.slot(t)
    keep = np.ones(len(slot), bool)
    keep[1:] = slot[1:] != slot[:-1]
    return np.flatnonzero(keep)


def decimate(track: VesselTrack, config: DecimationConfig = DecimationConfig()) -> VesselTrack:
    """Keep at most one point (the earliest) per lattice slot."""
    return track.take(decimation_index(track.t, config))


def speed_profile(track: VesselTrack) -> np.ndarray:
    """Speed over ground of every point, in knots, in track order."""
    return np.asarray(track.sog, dtype=np.float64).copy()
