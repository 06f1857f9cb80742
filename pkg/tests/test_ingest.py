import io
from datetime import datetime, timezone

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fishmap.ingest import (
    AisTable,
    IngestError,
    RegisterError,
    link_vessels,
    load_fleet_register,
    load_static_pairs,
    parse_ais_csv,
    write_ais_csv,
)

HEADER = "mmsi,timestamp,lat,lon,sog,cog\n"
GOOD = "228000001,2015-03-01T12:00:00Z,47.50,-4.20,3.4,210.0\n"


def parse(text, strict=False, **kw):
    return parse_ais_csv(io.BytesIO(text.encode()), strict=strict, **kw)


def register(text):
    return load_fleet_register(io.BytesIO(("cfr,call_sign,mmsi,loa,gear_main,flag\n" + text).encode()))


def test_single_row_maps_fields():
    table, report = parse(HEADER + GOOD)
    assert len(table) == 1 and report.rows_accepted == 1
    msg = table[0]
    assert msg.mmsi == 228000001
    assert msg.timestamp == datetime(2015, 3, 1, 12, tzinfo=timezone.utc)
    assert (msg.lat, msg.lon, msg.sog, msg.cog) == (47.5, -4.2, 3.4, 210.0)


def test_lat_out_of_range_is_counted():
    table, report = parse(HEADER + GOOD.replace("47.50", "95.0"))
    assert len(table) == 0
    assert report.rows_rejected == 1
    assert report.rejection_histogram == {"lat_out_of_range": 1}


def test_header_only():
    table, report = parse(HEADER)
    assert len(table) == 0
    assert report.rows_read == 0


def test_empty_cog_is_allowed():
    table, _ = parse(HEADER + "228000001,2015-03-01T12:00:00Z,47.5,-4.2,3.4,\n")
    assert table[0].cog is None


@pytest.mark.parametrize(
    "row, reason",
    [
        ("22800001,2015-03-01T12:00:00Z,47.5,-4.2,3.4,1", "bad_mmsi"),
        ("2280000011,2015-03-01T12:00:00Z,47.5,-4.2,3.4,1", "bad_mmsi"),
        ("22800000a,2015-03-01T12:00:00Z,47.5,-4.2,3.4,1", "bad_mmsi"),
        ("228000001,2015-03-01T12:00:00+01:00,47.5,-4.2,3.4,1", "bad_timestamp"),
        ("228000001,2015-03-01 12:00:00Z,47.5,-4.2,3.4,1", "bad_timestamp"),
        ("228000001,2015-02-30T12:00:00Z,47.5,-4.2,3.4,1", "bad_timestamp"),
        ("228000001,2015-03-01T24:00:00Z,47.5,-4.2,3.4,1", "bad_timestamp"),
        ("228000001,2015-03-01T12:00:00,47.5,-4.2,3.4,1", "bad_timestamp"),
        ("228000001,2015-03-01T12:00:00Z,abc,-4.2,3.4,1", "bad_lat"),
        ("228000001,2015-03-01T12:00:00Z,nan,-4.2,3.4,1", "bad_lat"),
        ("228000001,2015-03-01T12:00:00Z,47.5,180.5,3.4,1", "lon_out_of_range"),
        ("228000001,2015-03-01T12:00:00Z,47.5,,3.4,1", "bad_lon"),
        ("228000001,2015-03-01T12:00:00Z,47.5,-4.2,-0.1,1", "sog_out_of_range"),
        ("228000001,2015-03-01T12:00:00Z,47.5,-4.2,inf,1", "bad_sog"),
        ("228000001,2015-03-01T12:00:00Z,47.5,-4.2,3.4,360", "cog_out_of_range"),
        ("228000001,2015-03-01T12:00:00Z,47.5,-4.2,3.4,x", "bad_cog"),
        ("228000001,2015-03-01T12:00:00Z,47.5,-4.2,3.4", "field_count"),
    ],
)
def test_rejection_reasons(row, reason):
    table, report = parse(HEADER + row + "\n")
    assert len(table) == 0
    assert report.rejection_histogram == {reason: 1}
    assert report.rows_read == report.rows_accepted + report.rows_rejected == 1


def test_leap_day_and_bounds_accepted():
    rows = [
        "228000001,2016-02-29T23:59:59Z,90,180,0,0",
        "228000001,2000-02-29T00:00:00Z,-90,-180,102.3,359.9",
    ]
    table, report = parse(HEADER + "\n".join(rows) + "\n")
    assert report.rows_rejected == 0
    assert table.t.tolist() == [1456790399, 951782400]


def test_strict_reports_line_number():
    text = HEADER + GOOD + GOOD.replace("47.50", "95") + GOOD
    with pytest.raises(IngestError, match="line 3"):
        parse(text, strict=True)


def test_strict_reports_short_row_line():
    text = HEADER + GOOD + GOOD + "1,2\n"
    with pytest.raises(IngestError) as exc:
        parse(text, strict=True)
    assert exc.value.line == 4


def test_wrong_header():
    with pytest.raises(IngestError, match="header"):
        parse("mmsi,time,lat,lon,sog,cog\n" + GOOD)


def test_empty_stream():
    with pytest.raises(IngestError):
        parse("")


def test_input_order_kept_across_batches():
    rows = [f"{228000001 + (i % 3)},2015-03-01T12:{i // 60:02d}:{i % 60:02d}Z,47.5,-4.2,{i % 20}.5,1\n" for i in range(3000)]
    table, report = parse(HEADER + "".join(rows), block_size=4096)
    assert report.rows_accepted == 3000
    assert table.sog.tolist() == [i % 20 + 0.5 for i in range(3000)]


def test_write_round_trip():
    text = HEADER + "012345678,2015-03-01T12:00:00Z,47.5,-4.2,3.4,210\n" + "228000001,2015-03-01T12:00:01Z,-1.25,179.999999,0,\n"
    table, _ = parse(text)
    out = io.BytesIO()
    write_ais_csv(table, out)
    again, _ = parse(out.getvalue().decode())
    for a, b in zip(table.columns(), again.columns()):
        np.testing.assert_array_equal(a, b)
    assert out.getvalue().decode().splitlines()[1] == "012345678,2015-03-01T12:00:00Z,47.5,-4.2,3.4,210"


# rows with one field possibly corrupted
_corruptions = st.sampled_from(["", "lat=95", "sog=-1", "mmsi=12", "ts=bad", "short", "cog=400"])


def _row(i, corruption):
    fields = [f"{228000001 + i % 4}", f"2015-03-01T10:{i // 60 % 60:02d}:{i % 60:02d}Z", "47.5", "-4.2", f"{i % 13}.1", "90"]
    if corruption == "lat=95":
        fields[2] = "95"
    elif corruption == "sog=-1":
        fields[4] = "-1"
    elif corruption == "mmsi=12":
        fields[0] = "12"
    elif corruption == "ts=bad":
        fields[1] = "2015-13-01T00:00:00Z"
    elif corruption == "short":
        fields = fields[:4]
    elif corruption == "cog=400":
        fields[5] = "400"
    return ",".join(fields) + "\n"


@settings(max_examples=60, deadline=None)
@given(st.lists(_corruptions, max_size=25))
def test_lenient_matches_strict_prefix(corruptions):
    rows = [_row(i, c) for i, c in enumerate(corruptions)]
    lenient, report = parse(HEADER + "".join(rows))
    assert report.rows_read == len(rows)
    first_bad = next((i for i, c in enumerate(corruptions) if c), None)
    n_ok_prefix = len(rows) if first_bad is None else first_bad
    for cut in range(len(rows) + 1):
        text = HEADER + "".join(rows[:cut])
        if first_bad is not None and cut > first_bad:
            with pytest.raises(IngestError) as exc:
                parse(text, strict=True)
            assert exc.value.line == first_bad + 2
            continue
        strict, _ = parse(text, strict=True)
        assert len(strict) == cut
        head = lenient.take(slice(0, cut))
        for a, b in zip(strict.columns(), head.columns()):
            np.testing.assert_array_equal(a, b)
    assert n_ok_prefix <= len(lenient) == sum(1 for c in corruptions if not c)


def test_register_record():
    (rec,) = register("FRA000123,FABC,228000001,18.5,OTB,FR\n")
    assert rec.mmsi == 228000001 and rec.call_sign == "FABC" and rec.loa == 18.5
    assert rec.gear_main == "OTB" and rec.flag == "FR"


def test_register_duplicate_cfr():
    with pytest.raises(RegisterError, match="duplicate"):
        register("FRA000123,FABC,228000001,18.5,OTB,FR\nFRA000123,FABD,228000002,12,PTM,FR\n")


def test_register_call_sign_only():
    (rec,) = register("FRA000123,FABC,,18.5,OTB,FR\n")
    assert rec.mmsi is None and rec.call_sign == "FABC"


@pytest.mark.parametrize(
    "row",
    [
        "FRA000123,,,18.5,OTB,FR",
        "FRA000123,FABC,228000001,0,OTB,FR",
        "FRA000123,FABC,228000001,-3,OTB,FR",
        "FRA000123,FABC,228000001,18.5,,FR",
        "FRA000123,FABC,22800001,18.5,OTB,FR",
        "FRA000123,FABC,228000001,18.5,OTB,FRA",
    ],
)
def test_register_invalid(row):
    with pytest.raises(RegisterError):
        register(row + "\n")


def test_static_pairs():
    pairs = load_static_pairs(io.BytesIO(b"mmsi,call_sign\n228000002,FXYZ\n"))
    assert pairs == {228000002: "FXYZ"}


def _table(mmsis):
    n = len(mmsis)
    return AisTable(
        np.array(mmsis, np.int64),
        np.arange(n, dtype=np.int64),
        np.full(n, 50.0),
        np.full(n, 1.0),
        np.full(n, 3.0),
        np.full(n, np.nan),
    )


def test_link_direct_and_dropped():
    reg = register("FRA000123,FABC,228000001,18.5,OTB,FR\n")
    ids, kept = link_vessels(_table([228000001, 999999999, 228000001]), reg)
    assert ids == {228000001}
    assert kept.mmsi.tolist() == [228000001, 228000001]


def test_link_via_call_sign():
    reg = register("FRA000124,FXYZ,,15,PTM,FR\n")
    ids, kept = link_vessels(_table([228000002, 228000003]), reg, {228000002: "FXYZ"})
    assert ids == {228000002}
    assert kept.mmsi.tolist() == [228000002]


def test_link_no_match_warns():
    from fishmap.ingest import IngestReport

    report = IngestReport()
    reg = register("FRA000123,FABC,228000001,18.5,OTB,FR\n")
    ids, kept = link_vessels(_table([999999999]), reg, report=report)
    assert ids == frozenset() and len(kept) == 0
    assert report.warnings["no_register_match"] == 1


@settings(max_examples=50, deadline=None)
@given(
    st.lists(st.integers(228000000, 228000009), max_size=40),
    st.sets(st.integers(228000000, 228000009), max_size=5),
    st.sets(st.integers(228000000, 228000009), max_size=5),
)
def test_link_idempotent_and_closed(mmsis, direct, paired):
    rows = "".join(f"C{m},,{m},10,OTB,FR\n" for m in sorted(direct))
    rows += "".join(f"P{m},CS{m},,10,OTB,FR\n" for m in sorted(paired))
    reg = register(rows)
    pairs = {m: f"CS{m}" for m in paired}
    ids, kept = link_vessels(_table(mmsis), reg, pairs)
    assert set(kept.mmsi.tolist()) <= ids
    assert ids == set(mmsis) & (direct | paired)
    ids2, kept2 = link_vessels(kept, reg, pairs)
    assert ids2 == ids
    for a, b in zip(kept.columns(), kept2.columns()):
        np.testing.assert_array_equal(a, b)
