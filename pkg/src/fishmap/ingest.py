"""Parsing of decoded AIS position reports and the fishing fleet register.

AIS input is a plain CSV with header ``mmsi,timestamp,lat,lon,sog,cog``.
Rows are validated column-wise with pyarrow/numpy so a year of terrestrial
AIS can be read in one pass; invalid rows are counted by reason (lenient)
or abort the parse with their line number (strict).
"""

from __future__ import annotations

import csv
import io
import logging
from collections import Counter
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import BinaryIO, Iterable

import numpy as np
import pyarrow as pa
import pyarrow.compute as pc
import pyarrow.csv as pacsv

logger = logging.getLogger(__name__)

AIS_COLUMNS = ("mmsi", "timestamp", "lat", "lon", "sog", "cog")
REGISTER_COLUMNS = ("cfr", "call_sign", "mmsi", "loa", "gear_main", "flag")
STATIC_PAIR_COLUMNS = ("mmsi", "call_sign")

_MMSI_RE = r"^[0-9]{9}$"
_TIMESTAMP_RE = r"^[0-9]{4}-[0-9]{2}-[0-9]{2}T[0-9]{2}:[0-9]{2}:[0-9]{2}Z$"
_NUMBER_RE = r"^[+-]?([0-9]+(\.[0-9]*)?|\.[0-9]+)([eE][+-]?[0-9]+)?$"
_EPOCH_ISO = "1970-01-01T00:00:00Z"

# Order matters: a row is rejected for the first failing check.
REJECTION_REASONS = (
    "ok",
    "bad_mmsi",
    "bad_timestamp",
    "bad_lat",
    "lat_out_of_range",
    "bad_lon",
    "lon_out_of_range",
    "bad_sog",
    "sog_out_of_range",
    "bad_cog",
    "cog_out_of_range",
)
FIELD_COUNT = "field_count"


class IngestError(ValueError):
    """Unreadable or malformed input; ``line`` is the 1-based physical line if known."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class RegisterError(ValueError):
    pass


@dataclass(frozen=True)
class AisMessage:
    mmsi: int
    timestamp: datetime
    lat: float
    lon: float
    sog: float
    cog: float | None = None

    @property
    def epoch(self) -> int:
        return int(self.timestamp.timestamp())


@dataclass
class IngestReport:
    rows_read: int = 0
    rows_accepted: int = 0
    rows_rejected: int = 0
    rejection_histogram: Counter = field(default_factory=Counter)
    warnings: Counter = field(default_factory=Counter)

    def merge(self, other: IngestReport) -> IngestReport:
        return IngestReport(
            self.rows_read + other.rows_read,
            self.rows_accepted + other.rows_accepted,
            self.rows_rejected + other.rows_rejected,
            self.rejection_histogram + other.rejection_histogram,
            self.warnings + other.warnings,
        )


def epoch_to_datetime(t: int) -> datetime:
    return datetime.fromtimestamp(int(t), tz=timezone.utc)


def format_timestamp(t) -> np.ndarray:
    """Render epoch seconds as ``YYYY-MM-DDTHH:MM:SSZ`` strings."""
    s = np.datetime_as_string(np.asarray(t, dtype="int64").astype("datetime64[s]"), unit="s")
    return np.char.add(s.astype(str), "Z")


@dataclass(frozen=True, eq=False)
class AisTable(Sequence):
    """Column store of AIS messages; indexing yields :class:`AisMessage`.

    ``t`` is integer Unix seconds, ``cog`` is NaN where missing.
    """

    mmsi: np.ndarray
    t: np.ndarray
    lat: np.ndarray
    lon: np.ndarray
    sog: np.ndarray
    cog: np.ndarray

    def __len__(self) -> int:
        return len(self.t)

    def __getitem__(self, i):
        if isinstance(i, slice) or isinstance(i, np.ndarray):
            return self.take(i)
        cog = float(self.cog[i])
        return AisMessage(
            int(self.mmsi[i]),
            epoch_to_datetime(self.t[i]),
            float(self.lat[i]),
            float(self.lon[i]),
            float(self.sog[i]),
            None if np.isnan(cog) else cog,
        )

    def take(self, idx) -> AisTable:
        return AisTable(*(col[idx] for col in self.columns()))

    def columns(self) -> tuple[np.ndarray, ...]:
        return self.mmsi, self.t, self.lat, self.lon, self.sog, self.cog

    @classmethod
    def empty(cls) -> AisTable:
        return cls(
            np.empty(0, np.int64),
            np.empty(0, np.int64),
            *(np.empty(0, np.float64) for _ in range(4)),
        )

    @classmethod
    def concat(cls, tables: Iterable[AisTable]) -> AisTable:
        tables = list(tables)
        if not tables:
            return cls.empty()
        return cls(*(np.concatenate(cols) for cols in zip(*(t.columns() for t in tables))))

    @classmethod
    def from_messages(cls, messages: Iterable[AisMessage]) -> AisTable:
        messages = list(messages)
        if not messages:
            return cls.empty()
        return cls(
            np.array([m.mmsi for m in messages], np.int64),
            np.array([m.epoch for m in messages], np.int64),
            np.array([m.lat for m in messages], np.float64),
            np.array([m.lon for m in messages], np.float64),
            np.array([m.sog for m in messages], np.float64),
            np.array([np.nan if m.cog is None else m.cog for m in messages], np.float64),
        )


def _numeric(col: pa.Array) -> tuple[np.ndarray, np.ndarray]:
    """Parse a string column as float64; returns (values, parsed_ok)."""
    try:
        values = pc.cast(col, pa.float64()).to_numpy(zero_copy_only=False)
    except pa.ArrowInvalid:
        ok_arr = pc.match_substring_regex(col, _NUMBER_RE)
        values = pc.cast(pc.if_else(ok_arr, col, "0"), pa.float64()).to_numpy(zero_copy_only=False)
        return values, ok_arr.to_numpy(zero_copy_only=False)
    ok = np.isfinite(values)
    if not ok.all():
        # arrow also accepts "nan"/"inf" spellings; overflow like 1e400 stays a number
        idx = np.flatnonzero(~ok)
        ok[idx] = pc.match_substring_regex(col.take(idx), _NUMBER_RE).to_numpy(
            zero_copy_only=False
        )
    return values, ok


def _fixed_width_bytes(col: pa.Array, width: int) -> np.ndarray:
    """View a string array whose values all have ``width`` bytes as an (n, width) uint8 matrix."""
    col = pc.cast(col, pa.string())
    offsets = np.frombuffer(col.buffers()[1], dtype=np.int32)[col.offset : col.offset + len(col) + 1]
    data = np.frombuffer(col.buffers()[2], dtype=np.uint8) if len(col) else np.empty(0, np.uint8)
    start = offsets[0] if len(offsets) else 0
    return data[start : start + width * len(col)].reshape(len(col), width)


def days_from_civil(y: np.ndarray, m: np.ndarray, d: np.ndarray) -> np.ndarray:
    """Days since 1970-01-01 for proleptic Gregorian dates (vectorised)."""
    y = y - (m <= 2)
    era = np.floor_divide(y, 400)
    yoe = y - era * 400
    mp = np.where(m > 2, m - 3, m + 9)
    doy = (153 * mp + 2) // 5 + d - 1
    doe = yoe * 365 + yoe // 4 - yoe // 100 + doy
    return era * 146097 + doe - 719468


_DAYS_IN_MONTH = np.array([0, 31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31])


def parse_timestamps(col: pa.Array) -> tuple[np.ndarray, np.ndarray]:
    """Strict ``YYYY-MM-DDTHH:MM:SSZ`` parse to epoch seconds; returns (values, ok)."""
    ok = pc.match_substring_regex(col, _TIMESTAMP_RE)
    raw = _fixed_width_bytes(pc.if_else(ok, col, _EPOCH_ISO), 20).astype(np.int64) - ord("0")

    def num(a, b):
        out = np.zeros(len(raw), np.int64)
        for j in range(a, b):
            out = out * 10 + raw[:, j]
        return out

    y, mo, d = num(0, 4), num(5, 7), num(8, 10)
    hh, mi, ss = num(11, 13), num(14, 16), num(17, 19)
    ok = ok.to_numpy(zero_copy_only=False)
    leap = ((y % 4 == 0) & (y % 100 != 0)) | (y % 400 == 0)
    mo_safe = np.clip(mo, 1, 12)
    dim = _DAYS_IN_MONTH[mo_safe] + ((mo_safe == 2) & leap)
    ok &= (mo >= 1) & (mo <= 12) & (d >= 1) & (d <= dim) & (hh < 24) & (mi < 60) & (ss < 60)
    t = days_from_civil(y, mo_safe, d) * 86400 + hh * 3600 + mi * 60 + ss
    return t, ok


def _validate_batch(batch: pa.RecordBatch) -> tuple[AisTable, np.ndarray]:
    """Convert one batch of string columns; returns the table and a reason code per row."""
    n = batch.num_rows
    reason = np.zeros(n, np.int8)

    def reject(bad: np.ndarray, code: str):
        reason[(reason == 0) & bad] = REJECTION_REASONS.index(code)

    mm_col = batch.column("mmsi")
    mm_ok = pc.match_substring_regex(mm_col, _MMSI_RE)
    mmsi = pc.cast(pc.if_else(mm_ok, mm_col, "0"), pa.int64()).to_numpy(zero_copy_only=False)
    reject(~mm_ok.to_numpy(zero_copy_only=False), "bad_mmsi")

    t, t_ok = parse_timestamps(batch.column("timestamp"))
    reject(~t_ok, "bad_timestamp")

    lat, ok = _numeric(batch.column("lat"))
    reject(~ok, "bad_lat")
    with np.errstate(invalid="ignore"):
        reject(~(np.abs(lat) <= 90.0), "lat_out_of_range")

    lon, ok = _numeric(batch.column("lon"))
    reject(~ok, "bad_lon")
    with np.errstate(invalid="ignore"):
        reject(~(np.abs(lon) <= 180.0), "lon_out_of_range")

    sog, ok = _numeric(batch.column("sog"))
    reject(~ok, "bad_sog")
    reject(~(np.isfinite(sog) & (sog >= 0.0)), "sog_out_of_range")

    cog_col = batch.column("cog")
    cog_empty = pc.equal(cog_col, "").to_numpy(zero_copy_only=False)
    cog, ok = _numeric(pc.if_else(cog_empty, "0", cog_col))
    cog = np.where(cog_empty, np.nan, cog)
    reject(~ok, "bad_cog")
    with np.errstate(invalid="ignore"):
        reject(~cog_empty & ~((cog >= 0.0) & (cog < 360.0)), "cog_out_of_range")

    return AisTable(mmsi, t, lat, lon, sog, cog), reason


def _row_lines(next_line: int, n_rows: int, skipped: list[int]) -> np.ndarray:
    # physical line numbers of parsed rows, given the lines the parser skipped
    span = np.arange(next_line, next_line + n_rows + len(skipped))
    return span[~np.isin(span, skipped)][:n_rows]


def parse_ais_csv(
    stream: BinaryIO, strict: bool = False, *, block_size: int = 1 << 22
) -> tuple[AisTable, IngestReport]:
    """Parse an AIS position CSV.

    Parameters
    ----------
    stream : binary file object
        UTF-8 CSV with header ``mmsi,timestamp,lat,lon,sog,cog``.
    strict : bool
        Abort on the first invalid row instead of counting and skipping it.
    block_size : int
        Parser block size in bytes; only affects memory and speed.

    Returns
    -------
    (AisTable, IngestReport)
        Accepted rows in input order and the row accounting.
    """
    report = IngestReport()
    skipped_lines: list[int] = []

    def on_invalid_row(row) -> str:
        skipped_lines.append(row.number)
        return "skip"

    try:
        reader = pacsv.open_csv(
            stream,
            read_options=pacsv.ReadOptions(use_threads=False, block_size=block_size),
            parse_options=pacsv.ParseOptions(
                invalid_row_handler=on_invalid_row, ignore_empty_lines=False
            ),
            convert_options=pacsv.ConvertOptions(
                column_types={c: pa.string() for c in AIS_COLUMNS},
                include_columns=None,
                strings_can_be_null=False,
            ),
        )
    except (pa.ArrowInvalid, OSError, UnicodeDecodeError) as exc:
        raise IngestError(f"cannot read AIS CSV: {exc}") from exc
    names = tuple(reader.schema.names)
    if names != AIS_COLUMNS:
        raise IngestError(
            f"expected header {','.join(AIS_COLUMNS)!r}, got {','.join(names)!r}", line=1
        )

    accepted: list[AisTable] = []
    next_line = 2
    while True:
        try:
            batch = reader.read_next_batch()
        except StopIteration:
            batch = None
        except (pa.ArrowInvalid, OSError) as exc:
            raise IngestError(f"cannot read AIS CSV: {exc}") from exc

        skipped = sorted(skipped_lines)
        skipped_lines.clear()
        n = 0 if batch is None else batch.num_rows
        if n:
            table, reason = _validate_batch(batch)
        else:
            table, reason = AisTable.empty(), np.zeros(0, np.int8)

        bad = np.flatnonzero(reason)
        if strict and (skipped or len(bad)):
            lines = _row_lines(next_line, n, skipped)
            first_bad = int(lines[bad[0]]) if len(bad) else None
            if skipped and (first_bad is None or skipped[0] < first_bad):
                raise IngestError(f"expected {len(AIS_COLUMNS)} fields", line=skipped[0])
            raise IngestError(REJECTION_REASONS[reason[bad[0]]], line=first_bad)

        if n or skipped:
            last = next_line - 1 + n + len(skipped)
            next_line = max(last, skipped[-1] if skipped else 0) + 1
        report.rows_read += n + len(skipped)
        report.rows_rejected += len(bad) + len(skipped)
        if skipped:
            report.rejection_histogram[FIELD_COUNT] += len(skipped)
        if len(bad):
            codes, counts = np.unique(reason[bad], return_counts=True)
            for c, k in zip(codes, counts):
                report.rejection_histogram[REJECTION_REASONS[c]] += int(k)
            table = table.take(reason == 0)
        if len(table):
            accepted.append(table)
        if batch is None:
            break

    report.rows_accepted = report.rows_read - report.rows_rejected
    if report.rows_rejected:
        logger.warning(
            "rejected %d of %d AIS rows: %s",
            report.rows_rejected,
            report.rows_read,
            dict(report.rejection_histogram),
        )
    return AisTable.concat(accepted), report


def write_ais_csv(table: AisTable, stream: BinaryIO, header: bool = True) -> None:
    """Write messages in the same CSV format :func:`parse_ais_csv` reads."""
    mmsi = pc.utf8_lpad(pc.cast(pa.array(table.mmsi), pa.string()), 9, "0")
    ts = pc.cast(pa.array(table.t.astype("datetime64[s]")), pa.string())
    ts = pc.binary_join_element_wise(pc.replace_substring(ts, " ", "T"), "Z", "")
    cog = pa.array(table.cog)
    cog_str = pc.if_else(pc.is_nan(cog), "", pc.cast(cog, pa.string()))
    out = pa.table(
        {
            "mmsi": mmsi,
            "timestamp": ts,
            "lat": pc.cast(pa.array(table.lat), pa.string()),
            "lon": pc.cast(pa.array(table.lon), pa.string()),
            "sog": pc.cast(pa.array(table.sog), pa.string()),
            "cog": cog_str,
        }
    )
    if header:
        stream.write((",".join(AIS_COLUMNS) + "\n").encode())
    if len(table):
        pacsv.write_csv(
            out,
            stream,
            write_options=pacsv.WriteOptions(include_header=False, quoting_style="none"),
        )


@dataclass(frozen=True)
class FleetRegisterRecord:
    cfr: str
    call_sign: str | None
    mmsi: int | None
    loa: float
    gear_main: str
    flag: str


def _text_rows(stream: BinaryIO, expected: tuple[str, ...], what: str):
    try:
        text = io.TextIOWrapper(stream, encoding="utf-8-sig", newline="")
        reader = csv.reader(text)
        header = next(reader, None)
    except (OSError, UnicodeDecodeError) as exc:
        raise RegisterError(f"cannot read {what}: {exc}") from exc
    if header is None or tuple(h.strip() for h in header) != expected:
        raise RegisterError(f"{what}: expected header {','.join(expected)!r}, got {header!r}")
    try:
        for row in reader:
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(expected):
                raise RegisterError(
                    f"{what} line {reader.line_num}: expected {len(expected)} fields, got {len(row)}"
                )
            yield reader.line_num, [v.strip() for v in row]
    except UnicodeDecodeError as exc:
        raise RegisterError(f"cannot read {what}: {exc}") from exc
    finally:
        text.detach()


def _parse_mmsi(value: str, where: str) -> int:
    if len(value) != 9 or not value.isdigit():
        raise RegisterError(f"{where}: mmsi {value!r} is not 9 decimal digits")
    return int(value)


def load_fleet_register(stream: BinaryIO) -> list[FleetRegisterRecord]:
    """Read the fleet register CSV (``cfr,call_sign,mmsi,loa,gear_main,flag``)."""
    records: list[FleetRegisterRecord] = []
    seen: dict[str, int] = {}
    for line, (cfr, call_sign, mmsi, loa, gear, flag) in _text_rows(
        stream, REGISTER_COLUMNS, "fleet register"
    ):
        where = f"fleet register line {line}"
        if not cfr:
            raise RegisterError(f"{where}: empty cfr")
        if cfr in seen:
            raise RegisterError(f"{where}: duplicate cfr {cfr!r} (first on line {seen[cfr]})")
        seen[cfr] = line
        if not call_sign and not mmsi:
            raise RegisterError(f"{where}: record {cfr} has neither call_sign nor mmsi")
        try:
            loa_m = float(loa)
        except ValueError:
            raise RegisterError(f"{where}: loa {loa!r} is not a number") from None
        if not loa_m > 0 or not np.isfinite(loa_m):
            raise RegisterError(f"{where}: loa must be > 0, got {loa!r}")
        if not gear:
            raise RegisterError(f"{where}: empty gear_main")
        if len(flag) != 2 or not flag.isalpha():
            raise RegisterError(f"{where}: flag {flag!r} is not a 2-letter country code")
        records.append(
            FleetRegisterRecord(
                cfr,
                call_sign or None,
                _parse_mmsi(mmsi, where) if mmsi else None,
                loa_m,
                gear,
                flag.upper(),
            )
        )
    return records


def load_static_pairs(stream: BinaryIO) -> dict[int, str]:
    """Read an ``mmsi,call_sign`` side table as a dict."""
    pairs: dict[int, str] = {}
    for line, (mmsi, call_sign) in _text_rows(stream, STATIC_PAIR_COLUMNS, "static pairs"):
        where = f"static pairs line {line}"
        if not call_sign:
            raise RegisterError(f"{where}: empty call_sign")
        key = _parse_mmsi(mmsi, where)
        if key in pairs and pairs[key] != call_sign:
            raise RegisterError(f"{where}: mmsi {mmsi} mapped to two call signs")
        pairs[key] = call_sign
    return pairs


def link_vessels(
    messages: AisTable,
    register: Sequence[FleetRegisterRecord],
    static_pairs: Mapping[int, str] | None = None,
    report: IngestReport | None = None,
) -> tuple[frozenset[int], AisTable]:
    """Keep only messages from vessels found in the fleet register.

    A vessel matches when its MMSI appears in the register directly, or when
    ``static_pairs`` maps it to a call sign present in the register.
    """
    matched = matched_vessels(np.unique(messages.mmsi), register, static_pairs)
    if not matched:
        logger.warning("no AIS vessel matched the fleet register")
        if report is not None:
            report.warnings["no_register_match"] += 1
    keep = np.isin(messages.mmsi, np.fromiter(sorted(matched), np.int64, len(matched)))
    return matched, messages.take(keep)


def matched_vessels(
    mmsis: Iterable[int],
    register: Sequence[FleetRegisterRecord],
    static_pairs: Mapping[int, str] | None = None,
) -> frozenset[int]:
    """The subset of ``mmsis`` that joins the register by MMSI or via a call sign."""
    direct = {r.mmsi for r in register if r.mmsi is not None}
    call_signs = {r.call_sign for r in register if r.call_sign}
    pairs = static_pairs or {}
    return frozenset(
        int(m) for m in mmsis if int(m) in direct or pairs.get(int(m)) in call_signs
    )
