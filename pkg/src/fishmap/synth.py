"""Labelled synthetic AIS: two-state fishing vessels and cruising traffic with dropout.

Fishing vessels switch between a slow fishing regime and a fast steaming
regime following a two-state Markov chain. Cruisers follow great-circle
routes at constant speed. Both lose reports i.i.d. with probability
``1 - reception_p``. Speeds are quantised to 0.1 kn as in real AIS.
"""

from __future__ import annotations

import csv
import math
from collections.abc import Iterator, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pyarrow as pa

from .classify import FishingPoints
from .ingest import AisTable, FleetRegisterRecord, format_timestamp, parse_timestamps, write_ais_csv
from .sphere import KNOT_M_S, EARTH_RADIUS_M, central_angle, initial_bearing, slerp, wrap_lon
from .tracks import DecimationConfig, VesselTrack, decimation_index

STEAMING = 0
FISHING = 1
STATE_NAMES = {STEAMING: "steaming", FISHING: "fishing"}

# 2015-03-01T00:00:00Z, lattice aligned
DEFAULT_START = 1425168000


@dataclass(frozen=True)
class SynthVesselParams:
    mu_fish: float = 3.5
    sigma_fish: float = 0.7
    mu_steam: float = 10.0
    sigma_steam: float = 1.2
    p_stay: float = 0.95
    report_period: int = 60
    reception_p: float = 1.0
    turn_sd_deg: float = 10.0

    def __post_init__(self):
        for name in ("mu_fish", "sigma_fish", "mu_steam", "sigma_steam", "report_period"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        for name in ("p_stay", "reception_p"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")


@dataclass(frozen=True, eq=False)
class LabeledTrack:
    """Received track with per-point labels, plus the full generated state record."""

    track: VesselTrack
    labels: np.ndarray
    all_t: np.ndarray = field(default_factory=lambda: np.empty(0, np.int64))
    all_states: np.ndarray = field(default_factory=lambda: np.empty(0, np.int8))

    def __post_init__(self):
        if len(self.labels) != len(self.track):
            raise ValueError("labels must align one-to-one with track points")

    def decimated(self, config: DecimationConfig = DecimationConfig()) -> LabeledTrack:
        idx = decimation_index(self.track.t, config)
        return LabeledTrack(self.track.take(idx), self.labels[idx], self.all_t, self.all_states)


def _truncated_normal(rng: np.random.Generator, mu: np.ndarray, sd: np.ndarray) -> np.ndarray:
    x = mu + sd * rng.standard_normal(len(mu))
    bad = np.flatnonzero(x < 0)
    while len(bad):
        x[bad] = mu[bad] + sd[bad] * rng.standard_normal(len(bad))
        bad = bad[x[bad] < 0]
    return x


def _quantise_speed(x: np.ndarray) -> np.ndarray:
    return np.round(x, 1) + 0.0  # + 0.0 turns -0.0 into 0.0


def _round_position(lat, lon):
    return np.round(lat, 6) + 0.0, np.round(wrap_lon(lon), 6) + 0.0


def gen_fishing_vessel(
    params: SynthVesselParams = SynthVesselParams(),
    duration: float = 24 * 3600,
    seed: int = 0,
    *,
    mmsi: int = 228000001,
    start: int = DEFAULT_START,
    origin: tuple[float, float] = (55.5, 4.0),
    initial_state: int | None = None,
) -> LabeledTrack:
    """Simulate one fishing vessel for ``duration`` seconds."""
    if not duration > 0:
        raise ValueError("duration must be > 0")
    rng = np.random.default_rng(seed)
    n = int(math.ceil(duration / params.report_period))
    first = int(rng.random() < 0.5) if initial_state is None else initial_state
    switch = rng.random(n) >= params.p_stay
    switch[0] = False
    states = ((first + np.cumsum(switch)) % 2).astype(np.int8)

    fishing = states == FISHING
    mu = np.where(fishing, params.mu_fish, params.mu_steam)
    sd = np.where(fishing, params.sigma_fish, params.sigma_steam)
    sog = _quantise_speed(_truncated_normal(rng, mu, sd))

    heading = rng.uniform(0.0, 360.0) + np.cumsum(rng.normal(0.0, params.turn_sd_deg, n))
    step = sog * KNOT_M_S * params.report_period / EARTH_RADIUS_M
    h = np.radians(heading)
    lat_r = math.radians(origin[0]) + np.r_[0.0, np.cumsum(step * np.cos(h))[:-1]]
    lat_r = np.clip(lat_r, -math.radians(89.0), math.radians(89.0))
    dlon = step * np.sin(h) / np.cos(lat_r)
    lon_r = math.radians(origin[1]) + np.r_[0.0, np.cumsum(dlon)[:-1]]
    lat, lon = _round_position(np.degrees(lat_r), np.degrees(lon_r))
    cog = np.round(np.mod(heading, 360.0), 1) % 360.0

    t = start + np.arange(n, dtype=np.int64) * params.report_period
    got = rng.random(n) < params.reception_p
    track = VesselTrack(int(mmsi), t[got], lat[got], lon[got], sog[got], cog[got])
    return LabeledTrack(track, states[got], t, states)


def gen_cruiser(
    waypoints: Sequence[tuple[float, float]],
    speed: float = 14.0,
    report_period: int = 60,
    reception_p: float = 1.0,
    seed: int = 0,
    *,
    mmsi: int = 366000001,
    start: int = DEFAULT_START,
) -> VesselTrack:
    """Constant-speed traversal of great-circle legs through ``waypoints`` (lat, lon)."""
    if len(waypoints) < 2:
        raise ValueError("a route needs at least two waypoints")
    if not speed > 0:
        raise ValueError("speed must be > 0")
    rng = np.random.default_rng(seed)
    wp = np.asarray(waypoints, dtype=np.float64)
    leg_len = EARTH_RADIUS_M * central_angle(wp[:-1, 0], wp[:-1, 1], wp[1:, 0], wp[1:, 1])
    cum = np.r_[0.0, np.cumsum(leg_len)]
    v = speed * KNOT_M_S
    total_time = cum[-1] / v
    elapsed = np.arange(0, int(math.floor(total_time / report_period)) + 1, dtype=np.int64) * report_period
    dist = elapsed * v
    leg = np.clip(np.searchsorted(cum, dist, side="right") - 1, 0, len(leg_len) - 1)
    frac = np.where(leg_len[leg] > 0, (dist - cum[leg]) / np.where(leg_len[leg] > 0, leg_len[leg], 1.0), 0.0)
    lat, lon = slerp(wp[leg, 0], wp[leg, 1], wp[leg + 1, 0], wp[leg + 1, 1], np.clip(frac, 0.0, 1.0))
    cog = initial_bearing(lat, lon, wp[leg + 1, 0], wp[leg + 1, 1])
    lat, lon = _round_position(lat, lon)
    got = rng.random(len(elapsed)) < reception_p
    n = int(got.sum())
    return VesselTrack(
        int(mmsi),
        start + elapsed[got],
        lat[got],
        lon[got],
        np.full(n, _quantise_speed(np.array([speed]))[0]),
        np.round(cog[got], 1) % 360.0,
    )


def sample_speed_mixture(
    n: int,
    seed: int = 0,
    weights: tuple[float, float] = (0.5, 0.5),
    means: tuple[float, float] = (3.5, 10.0),
    sigmas: tuple[float, float] = (0.7, 1.2),
    quantise: bool = True,
) -> tuple[np.ndarray, np.ndarray]:
    """i.i.d. draws from a two-component normal mixture; returns (speeds, component labels 0/1)."""
    rng = np.random.default_rng(seed)
    label = (rng.random(n) >= weights[0]).astype(np.int8)
    x = np.asarray(means)[label] + np.asarray(sigmas)[label] * rng.standard_normal(n)
    return (_quantise_speed(x) if quantise else x), label


class PointNotInTruth(ValueError):
    pass


@dataclass(frozen=True)
class ClassificationScore:
    precision: float
    recall: float
    tp: int
    fp: int
    fn: int
    tn: int
    zero_support: bool = False


def score_classification(predicted: FishingPoints, truth: Sequence[LabeledTrack]) -> ClassificationScore:
    """Point-level precision and recall of predicted fishing points against labels.

    With no predictions precision is reported as 1.0 and ``zero_support`` is set.
    """
    by_mmsi = {lt.track.mmsi: lt for lt in truth}
    predicted_mask = {m: np.zeros(len(lt.track), bool) for m, lt in by_mmsi.items()}
    for m in np.unique(predicted.mmsi).tolist():
        sel = predicted.mmsi == m
        lt = by_mmsi.get(m)
        if lt is None:
            raise PointNotInTruth(f"vessel {m:09d} is not in the truth set")
        pos = np.searchsorted(lt.track.t, predicted.t[sel])
        found = (pos < len(lt.track)) & (lt.track.t[np.minimum(pos, len(lt.track) - 1)] == predicted.t[sel])
        if not found.all():
            raise PointNotInTruth(f"vessel {m:09d} has predicted points absent from its track")
        predicted_mask[m][pos] = True
    tp = fp = fn = tn = 0
    for m, lt in by_mmsi.items():
        fish = lt.labels == FISHING
        pred = predicted_mask[m]
        tp += int(np.count_nonzero(pred & fish))
        fp += int(np.count_nonzero(pred & ~fish))
        fn += int(np.count_nonzero(~pred & fish))
        tn += int(np.count_nonzero(~pred & ~fish))
    zero_support = tp + fp == 0
    precision = 1.0 if zero_support else tp / (tp + fp)
    recall = tp / (tp + fn) if tp + fn else 1.0
    return ClassificationScore(precision, recall, tp, fp, fn, tn, zero_support)


@dataclass(frozen=True)
class ScenarioConfig:
    """A small fleet of fishing vessels plus cruising traffic over a common area."""

    n_fishing: int = 10
    hours: float = 48.0
    n_cruisers: int = 20
    cruiser_speed: float = 14.0
    fishing: SynthVesselParams = SynthVesselParams()
    cruiser_reception_p: float = 1.0
    cruiser_report_period: int = 60
    center: tuple[float, float] = (55.5, 4.0)
    start: int = DEFAULT_START
    seed: int = 0

    def __post_init__(self):
        if self.n_fishing < 0 or self.n_cruisers < 0:
            raise ValueError("vessel counts must be >= 0")
        if not self.hours > 0:
            raise ValueError("hours must be > 0")
        if not 0.0 <= self.cruiser_reception_p <= 1.0:
            raise ValueError("cruiser_reception_p must be in [0, 1]")


def fishing_mmsi(i: int) -> int:
    return 228000001 + i


def cruiser_mmsi(i: int) -> int:
    return 366000001 + i


def iter_fishing_vessels(cfg: ScenarioConfig) -> Iterator[LabeledTrack]:
    for i in range(cfg.n_fishing):
        rng = np.random.default_rng([cfg.seed, 1, i])
        origin = (cfg.center[0] + rng.uniform(-1.0, 1.0), cfg.center[1] + rng.uniform(-2.0, 2.0))
        start = cfg.start + int(rng.integers(0, cfg.fishing.report_period))
        yield gen_fishing_vessel(
            cfg.fishing,
            cfg.hours * 3600.0,
            seed=int(rng.integers(2**63)),
            mmsi=fishing_mmsi(i),
            start=start,
            origin=origin,
        )


def iter_cruisers(cfg: ScenarioConfig) -> Iterator[VesselTrack]:
    lat0, lon0 = cfg.center
    for i in range(cfg.n_cruisers):
        rng = np.random.default_rng([cfg.seed, 2, i])
        a = (lat0 + rng.uniform(-2.0, 2.0), lon0 - 4.0)
        b = (lat0 + rng.uniform(-2.0, 2.0), lon0 + 4.0)
        route = [a, b] if rng.random() < 0.5 else [b, a]
        start = cfg.start + int(rng.integers(0, max(1, int(cfg.hours * 3600) // 2)))
        yield gen_cruiser(
            route,
            cfg.cruiser_speed,
            cfg.cruiser_report_period,
            cfg.cruiser_reception_p,
            seed=int(rng.integers(2**63)),
            mmsi=cruiser_mmsi(i),
            start=start,
        )


def scenario_register(cfg: ScenarioConfig) -> tuple[list[FleetRegisterRecord], dict[int, str]]:
    """Register rows for the fishing vessels; odd-numbered ones join only via call sign."""
    gears = ("OTB", "PTM", "TBB", "OTM")
    records, pairs = [], {}
    for i in range(cfg.n_fishing):
        call_sign = f"FX{i:04d}"
        via_call_sign = i % 2 == 1
        records.append(
            FleetRegisterRecord(
                cfr=f"SYN{i:09d}",
                call_sign=call_sign,
                mmsi=None if via_call_sign else fishing_mmsi(i),
                loa=18.0 + (i % 7),
                gear_main=gears[i % len(gears)],
                flag="FR",
            )
        )
        if via_call_sign:
            pairs[fishing_mmsi(i)] = call_sign
    return records, pairs


def write_scenario(cfg: ScenarioConfig, out_dir: Path) -> dict[str, Path]:
    """Write ais.csv, labels.csv, register.csv and static_pairs.csv; vessels are streamed one at a time."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {name: out_dir / f"{name}.csv" for name in ("ais", "labels", "register", "static_pairs")}
    with open(paths["ais"], "wb") as ais, open(paths["labels"], "w", newline="\n") as labels:
        ais.write(b"mmsi,timestamp,lat,lon,sog,cog\n")
        labels.write("mmsi,timestamp,state\n")
        for lt in iter_fishing_vessels(cfg):
            write_ais_csv(lt.track.table(), ais, header=False)
            write_labels(lt, labels)
        for tr in iter_cruisers(cfg):
            write_ais_csv(tr.table(), ais, header=False)
    records, pairs = scenario_register(cfg)
    with open(paths["register"], "w", newline="\n") as f:
        f.write("cfr,call_sign,mmsi,loa,gear_main,flag\n")
        for r in records:
            mmsi = "" if r.mmsi is None else f"{r.mmsi:09d}"
            f.write(f"{r.cfr},{r.call_sign or ''},{mmsi},{r.loa!r},{r.gear_main},{r.flag}\n")
    with open(paths["static_pairs"], "w", newline="\n") as f:
        f.write("mmsi,call_sign\n")
        for m, cs in sorted(pairs.items()):
            f.write(f"{m:09d},{cs}\n")
    return paths


def write_labels(lt: LabeledTrack, stream) -> None:
    """Append ``mmsi,timestamp,state`` rows for the received points of one track."""
    ts = format_timestamp(lt.track.t)
    names = np.where(lt.labels == FISHING, "fishing", "steaming")
    mmsi = f"{lt.track.mmsi:09d}"
    stream.write("".join(f"{mmsi},{a},{b}\n" for a, b in zip(ts.tolist(), names.tolist())))


def read_labels(path) -> dict[tuple[int, int], int]:
    """Labels sidecar as {(mmsi, epoch seconds): state}."""
    with open(path, newline="") as f:
        rows = list(csv.reader(f))[1:]
    if not rows:
        return {}
    mmsi, ts, state = zip(*rows)
    t, _ = parse_timestamps(pa.array(ts, pa.string()))
    return {
        (int(m), int(s)): FISHING if st == "fishing" else STEAMING
        for m, s, st in zip(mmsi, t.tolist(), state)
    }


def fleet(cfg: ScenarioConfig) -> tuple[list[LabeledTrack], list[VesselTrack]]:
    """All scenario vessels in memory."""
    return list(iter_fishing_vessels(cfg)), list(iter_cruisers(cfg))


def scenario_table(cfg: ScenarioConfig) -> AisTable:
    fishing, cruisers = fleet(cfg)
    return AisTable.concat([lt.track.table() for lt in fishing] + [c.table() for c in cruisers])
