"""End-to-end acceptance checks; the terminal summary prints one line per criterion."""

import math
import subprocess
import sys
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import run_args
from fishmap.cli import main
from fishmap.config import RunConfig
from fishmap.coverage import coverage_map
from fishmap.grid import aggregate, cell_of, project
from fishmap.mixture import fit_em
from fishmap.pipeline import classify_tracks, density_map
from fishmap.synth import ScenarioConfig, fleet, gen_cruiser, score_classification, sample_speed_mixture
from fishmap.tracks import DecimationConfig, VesselTrack, decimate
from oracles import band_precision, shoelace, slot_reception, spherical_quad_area, truncated_normal_mass

T0 = 1425168000


@pytest.fixture(scope="module")
def seed0_fleet():
    fishing, cruisers = fleet(ScenarioConfig())
    return fishing, cruisers


@pytest.mark.criterion(1, "EM parameter recovery")
def test_em_parameter_recovery(record_property):
    start = time.perf_counter()
    errors, fits = [], []
    for seed in range(20):
        x, _ = sample_speed_mixture(5000, seed=seed)
        fit = fit_em(x[x > 0.5])
        fits.append(fit)
        errors.append(abs(fit.mu1 - 3.5))
    elapsed = time.perf_counter() - start
    mean_err = float(np.mean(errors))
    record_property("mean_abs_mu1_err", round(mean_err, 4))
    record_property("seconds", round(elapsed, 2))
    assert all(f.converged for f in fits)
    for f in fits:
        h = np.asarray(f.history)
        assert np.all(np.diff(h) >= -1e-9 * np.abs(h[1:]))
    assert mean_err < 0.05
    assert elapsed < 5.0


@pytest.mark.criterion(2, "classification accuracy vs analytic oracle")
def test_classification_accuracy(seed0_fleet, record_property):
    fishing, _ = seed0_fleet
    p = ScenarioConfig().fishing
    start = time.perf_counter()
    result = classify_tracks([lt.track for lt in fishing], RunConfig(k=2.0))
    elapsed = time.perf_counter() - start
    score = score_classification(result.points, [lt.decimated() for lt in fishing])

    lo, hi = p.mu_fish - 2 * p.sigma_fish, p.mu_fish + 2 * p.sigma_fish
    recall_oracle = math.erf(2 / math.sqrt(2))
    # the two-state chain is symmetric, so half the slots are fishing in the long run
    precision_oracle = band_precision(0.5, (p.mu_fish, p.sigma_fish), (p.mu_steam, p.sigma_steam), lo, hi)
    steam_mass = truncated_normal_mass(p.mu_steam, p.sigma_steam, lo, hi)
    record_property("recall", round(score.recall, 4))
    record_property("recall_oracle", round(recall_oracle, 4))
    record_property("precision", round(score.precision, 6))
    record_property("precision_oracle", round(precision_oracle, 6))
    record_property("steam_mass_in_band", f"{steam_mass:.3g}")
    record_property("seconds", round(elapsed, 2))
    assert abs(score.recall - recall_oracle) <= 0.02
    assert abs(score.precision - precision_oracle) <= 0.02
    assert elapsed < 10.0


class _Cols:
    def __init__(self, lat, lon):
        self.lat, self.lon = np.asarray(lat, float), np.asarray(lon, float)


@pytest.mark.criterion(3, "mass conservation")
@settings(max_examples=200, deadline=None)
@given(
    st.integers(0, 2**32 - 1),
    st.integers(0, 3000),
    st.floats(0, 1),
    st.sampled_from([(35, 70, -15, 30), (55, 55.05, 4, 4.05), (-80, 80, -180, 180)]),
)
def test_mass_conservation(seed, n, cut_frac, box):
    rng = np.random.default_rng(seed)
    lat = rng.uniform(box[0], box[1], n)
    lon = rng.uniform(box[2], box[3], n)
    whole = aggregate(_Cols(lat, lon))
    assert whole.total + whole.skipped == n
    assert sum(whole.cells.values()) == whole.total
    cut = int(cut_frac * n)
    merged = aggregate(_Cols(lat[:cut], lon[:cut])).merge(aggregate(_Cols(lat[cut:], lon[cut:])))
    assert merged.cells == whole.cells


@pytest.mark.criterion(4, "equal-area projection")
def test_equal_area_projection(record_property):
    assert project(52.0, 10.0) == (4321000.0, 3210000.0)
    rng = np.random.default_rng(2024)
    ratios = []
    for _ in range(1000):
        lat0, lon0 = rng.uniform(35, 69.99), rng.uniform(-15, 29.99)
        lat1, lon1 = lat0 + 0.01, lon0 + 0.01
        s = np.linspace(0, 1, 9)[:-1]
        ring_lat = np.r_[np.full(8, lat0), lat0 + 0.01 * s, np.full(8, lat1), lat1 - 0.01 * s]
        ring_lon = np.r_[lon0 + 0.01 * s, np.full(8, lon1), lon1 - 0.01 * s, np.full(8, lon0)]
        x, y = project(ring_lat, ring_lon)
        ratios.append(shoelace(np.r_[x, x[0]], np.r_[y, y[0]]) / spherical_quad_area(lat0, lat1, lon0, lon1))
    ratios = np.array(ratios)
    record_property("max_abs_deviation", f"{np.abs(ratios - 1).max():.2e}")
    assert ratios.min() >= 0.995 and ratios.max() <= 1.005


@pytest.mark.criterion(5, "coverage correctness")
def test_coverage_zero_dropout(seed0_fleet):
    _, cruisers = seed0_fleet
    raster = coverage_map(cruisers)
    assert raster.expected
    assert all(v == 1.0 for v in raster.ratio.values())


@pytest.mark.criterion(5, "coverage correctness")
def test_coverage_bernoulli(record_property):
    # offset routes and start times so received fixes do not pile up on the same spots
    rng = np.random.default_rng(0)
    trs = []
    for i in range(1000):
        u = rng.uniform(0, 0.05)
        start = T0 + int(rng.integers(0, 86400))
        trs.append(gen_cruiser([(55.0, 2.0 + u), (55.0, 6.0 + u)], 9.0, 300, 0.6, seed=i, mmsi=366000001 + i, start=start))
    raster = coverage_map(trs)
    busy = [raster.ratio[c] for c, e in raster.expected.items() if e >= 500]
    target = slot_reception(0.6, 300, 300)
    record_property("cells", len(busy))
    record_property("mean_ratio", round(float(np.mean(busy)), 4))
    assert len(busy) >= 50
    assert abs(np.mean(busy) - target) <= 0.05


@pytest.mark.criterion(5, "coverage correctness")
def test_coverage_worked_example():
    tr = VesselTrack(
        366000001,
        np.array([T0, T0 + 1800], np.int64),
        np.array([55.0, 55.002]),
        np.array([4.0, 4.002]),
        np.array([12.0, 12.0]),
        np.array([45.0, 45.0]),
    )
    raster = coverage_map([tr])
    cell = cell_of(*project(55.0, 4.0))
    assert (raster.received[cell], raster.expected[cell]) == (2, 7)


@pytest.mark.criterion(6, "time coherence")
def test_minutes_are_five_times_counts(seed0_fleet):
    fishing, _ = seed0_fleet
    cfg = RunConfig()
    result = classify_tracks([lt.track for lt in fishing], cfg)
    raster = density_map(result.points, cfg)
    assert raster.total == len(result.points) > 0
    assert all(raster.minutes(c) == 5 * n for c, n in raster.cells.items())


@pytest.mark.criterion(6, "time coherence")
@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(-10**6, 10**6), min_size=0, max_size=300, unique=True))
def test_decimation_idempotent(offsets):
    t = np.sort(np.array(offsets, np.int64) + T0)
    n = len(t)
    tr = VesselTrack(1, t, np.full(n, 55.0), np.full(n, 4.0), np.arange(n, dtype=float), np.full(n, np.nan))
    once = decimate(tr, DecimationConfig(300))
    twice = decimate(once, DecimationConfig(300))
    np.testing.assert_array_equal(once.t, twice.t)
    np.testing.assert_array_equal(once.sog, twice.sog)
    assert len(np.unique(t // 300)) == len(once)


OUTPUTS = [
    "fishing_points.csv",
    "diagnostics.csv",
    "density.asc",
    "density_cells.csv",
    "coverage.asc",
    "coverage_cells.csv",
    "reliability.csv",
]


@pytest.mark.criterion(7, "determinism")
def test_run_byte_identical(seed0_inputs, tmp_path):
    runs = {"a": ["--threads", "1"], "b": ["--threads", "1"], "c": ["--threads", "8"]}
    for name, extra in runs.items():
        assert main(["run", *run_args(seed0_inputs), "-o", str(tmp_path / name), *extra]) == 0
    for out in OUTPUTS:
        ref = (tmp_path / "a" / out).read_bytes()
        assert ref
        assert (tmp_path / "b" / out).read_bytes() == ref, out
        assert (tmp_path / "c" / out).read_bytes() == ref, out


@pytest.mark.criterion(8, "monotonicity in k")
def test_k_chain(seed0_fleet, record_property):
    fishing, _ = seed0_fleet
    tracks = [lt.track for lt in fishing]
    sets = [classify_tracks(tracks, RunConfig(k=k)).points.keys() for k in (0.5, 1.0, 1.5, 2.0, 2.5)]
    record_property("sizes", "/".join(str(len(s)) for s in sets))
    for small, big in zip(sets, sets[1:]):
        assert small < big


_PEAK_RSS = (
    "import resource, subprocess, sys; "
    "r = subprocess.run(sys.argv[1:]); "
    "print(resource.getrusage(resource.RUSAGE_CHILDREN).ru_maxrss); "
    "sys.exit(r.returncode)"
)


@pytest.mark.slow
@pytest.mark.criterion(9, "throughput sanity")
def test_ten_million_messages(tmp_path, record_property):
    inputs = tmp_path / "in"
    synth = [sys.executable, "-m", "fishmap", "synth", "-o", str(inputs),
             "--n-fishing", "200", "--hours", "810", "--n-cruisers", "300"]
    subprocess.run(synth, check=True)
    with open(inputs / "ais.csv", "rb") as f:
        n_messages = sum(1 for _ in f) - 1
    assert n_messages >= 10_000_000

    start = time.perf_counter()
    proc = subprocess.run(
        [sys.executable, "-c", _PEAK_RSS, sys.executable, "-m", "fishmap", "run",
         *run_args(inputs), "-o", str(tmp_path / "out")],
        capture_output=True,
        text=True,
    )
    elapsed = time.perf_counter() - start
    assert proc.returncode == 0, proc.stderr
    peak_mb = int(proc.stdout.strip()) / 1024
    record_property("messages", n_messages)
    record_property("seconds", round(elapsed, 1))
    record_property("peak_rss_mb", round(peak_mb))
    assert elapsed < 300
    assert peak_mb < 4096
