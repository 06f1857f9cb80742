"""End-to-end composition of ingest, tracks, mixture, classify, grid and coverage."""

from __future__ import annotations

import logging
from collections.abc import Mapping, Sequence
from dataclasses import dataclass

from .classify import FishingPoints, VesselSummary, identify_fishing
from .config import RunConfig
from .coverage import CoverageRaster, coverage_map
from .grid import DensityRaster, aggregate
from .ingest import FleetRegisterRecord, matched_vessels
from .mixture import EmConfig, FitError, MixtureFit, fit_em
from .parallel import parallel_map
from .tracks import VesselTrack, decimate

logger = logging.getLogger(__name__)


def _fit_one(track: VesselTrack, config: EmConfig) -> MixtureFit | FitError:
    try:
        return fit_em(track.sog, config)
    except FitError as exc:
        return exc


def fit_fleet(
    tracks: Sequence[VesselTrack], config: EmConfig = EmConfig(), threads: int = 1
) -> dict[int, MixtureFit | FitError]:
    """Mixture fit (or the reason it failed) per vessel."""
    results = parallel_map(lambda tr: _fit_one(tr, config), list(tracks), threads)
    return {tr.mmsi: r for tr, r in zip(tracks, results)}


@dataclass
class Classification:
    points: FishingPoints
    summary: dict[int, VesselSummary]
    fits: dict[int, MixtureFit | FitError]
    tracks: list[VesselTrack]

    @property
    def n_skipped(self) -> int:
        return sum(1 for s in self.summary.values() if s.status != "fitted")


def classify_tracks(raw_tracks: Sequence[VesselTrack], cfg: RunConfig, threads: int = 1) -> Classification:
    """Decimate, fit and classify already-linked fishing-vessel tracks."""
    dcfg = cfg.decimation()
    tracks = [decimate(tr, dcfg) for tr in raw_tracks]
    fits = fit_fleet(tracks if cfg.decimate_before_fit else raw_tracks, cfg.em(), threads)
    points, summary = identify_fishing(
        tracks,
        fits,
        k=cfg.k,
        policy=cfg.ambiguous_policy,
        band_applies_to_filtered=cfg.band_applies_to_filtered,
        min_speed=cfg.min_speed,
    )
    return Classification(points, summary, fits, tracks)


def fishing_tracks(
    tracks: Sequence[VesselTrack],
    register: Sequence[FleetRegisterRecord],
    static_pairs: Mapping[int, str] | None = None,
) -> list[VesselTrack]:
    ids = matched_vessels([tr.mmsi for tr in tracks], register, static_pairs)
    if not ids:
        logger.warning("no AIS vessel matched the fleet register")
    return [tr for tr in tracks if tr.mmsi in ids]


def density_map(points: FishingPoints, cfg: RunConfig) -> DensityRaster:
    raster = aggregate(points, cfg.grid(), cfg.quantum, strict=cfg.strict)
    if raster.skipped:
        logger.warning("%d fishing point(s) antipodal to the grid centre were skipped", raster.skipped)
    return raster


def coverage_raster(tracks: Sequence[VesselTrack], cfg: RunConfig, threads: int = 1) -> CoverageRaster:
    dcfg = cfg.decimation()
    return coverage_map((decimate(tr, dcfg) for tr in tracks), cfg.coverage(), cfg.grid(), threads)
