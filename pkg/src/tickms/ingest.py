"""Trade file parsing and conversion to spread/return tick series.

Prices are mapped to a tick grid: spreads in ticks, mid-price changes in
half ticks. A return is only formed between two consecutive accepted records
of the same contiguous block, so no return ever spans a day boundary, a
dropped record or a gap between activity windows.
"""

from __future__ import annotations

import csv
import io
import logging
import os
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, TextIO

import numpy as np

from .core import encode_transitions, support_mask

log = logging.getLogger(__name__)

TRADE_HEADER = ("date", "timestamp_ms", "price", "volume", "side", "bid", "ask")
SERIES_HEADER = ("date", "timestamp_ms", "s", "x", "r", "regime")
SIDES = ("buy", "sell", "unknown")

MS_PER_MINUTE = 60_000
SESSION_OPEN = (9 * 60 + 30) * MS_PER_MINUTE
SESSION_CLOSE = 16 * 60 * MS_PER_MINUTE
TRIM = 6 * MS_PER_MINUTE
HIGH_MORNING_END = (10 * 60 + 30) * MS_PER_MINUTE
LOW_END = (15 * 60 + 45) * MS_PER_MINUTE
PROFILE_BIN = 6 * MS_PER_MINUTE


class InputError(ValueError):
    """Input file cannot be read as a trade or tick-series table."""


@dataclass(frozen=True)
class TradeRecord:
    trade_date: str
    timestamp: int
    price: float
    volume: float
    side: str
    bid: float
    ask: float

    def __post_init__(self):
        if self.ask < self.bid:
            raise ValueError(f"crossed quote: ask {self.ask} < bid {self.bid}")
        if not 0 <= self.timestamp < 86_400_000:
            raise ValueError(f"timestamp {self.timestamp} outside the trading day")
        if self.volume < 0:
            raise ValueError(f"negative volume {self.volume}")
        if self.side not in SIDES:
            raise ValueError(f"side must be one of {SIDES}, got {self.side!r}")


@dataclass
class ParseReport:
    records: list[TradeRecord]
    errors: list[tuple[int, str]] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    collapsed: int = 0


def _open_text(source) -> tuple[TextIO, bool]:
    if isinstance(source, (str, os.PathLike)):
        try:
            return open(source, newline="", encoding="utf-8"), True
        except OSError as exc:
            raise InputError(f"cannot open {source}: {exc}") from exc
    return source, False


def _parse_row(row: list[str]) -> TradeRecord:
    if len(row) != len(TRADE_HEADER):
        raise ValueError(f"expected {len(TRADE_HEADER)} fields, got {len(row)}")
    date, ts, price, volume, side, bid, ask = (v.strip() for v in row)
    if not date:
        raise ValueError("empty date")
    side = side.lower() or "unknown"
    return TradeRecord(
        trade_date=date,
        timestamp=int(ts),
        price=float(price),
        volume=float(volume),
        side=side,
        bid=float(bid),
        ask=float(ask),
    )


def parse_trades(source) -> ParseReport:
    """Read a trade CSV with header ``date,timestamp_ms,price,volume,side,bid,ask``.

    Malformed or invalid lines are skipped and listed in ``errors`` with their
    1-based line numbers. Out-of-order records are stably sorted by
    (date, timestamp) with a warning. Consecutive records sharing
    (date, timestamp, side) are one market order hitting several limit orders
    and are collapsed into the last of them.

    Raises
    ------
    InputError
        Unreadable file or a header that does not match the contract.
    """
    fh, owned = _open_text(source)
    try:
        reader = csv.reader(fh)
        header = next(reader, None)
        report = ParseReport(records=[])
        if header is None:
            report.warnings.append("empty input: no header and no records")
            return report
        header = tuple(h.strip() for h in header)
        if header != TRADE_HEADER:
            missing = [c for c in TRADE_HEADER if c not in header]
            raise InputError(
                f"bad header {','.join(header)!r}; expected {','.join(TRADE_HEADER)}"
                + (f" (missing: {', '.join(missing)})" if missing else "")
            )
        raw = []
        for row in reader:
            line = reader.line_num
            if not row or all(not v.strip() for v in row):
                continue
            try:
                raw.append(_parse_row(row))
            except ValueError as exc:
                report.errors.append((line, str(exc)))
    finally:
        if owned:
            fh.close()

    if not raw and not report.errors:
        report.warnings.append("input has a header but no records")
    keys = [(r.trade_date, r.timestamp) for r in raw]
    if any(a > b for a, b in zip(keys, keys[1:])):
        report.warnings.append("records not in time order; stably sorted by (date, timestamp)")
        raw = [raw[i] for i in sorted(range(len(raw)), key=keys.__getitem__)]

    out: list[TradeRecord] = []
    for rec in raw:
        if out and (out[-1].trade_date, out[-1].timestamp, out[-1].side) == (
            rec.trade_date,
            rec.timestamp,
            rec.side,
        ):
            out[-1] = rec
            report.collapsed += 1
        else:
            out.append(rec)
    report.records = out
    for w in report.warnings:
        log.warning(w)
    return report


# --- tick series ----------------------------------------------------------


@dataclass
class Segment:
    """Contiguous run of observations; ``returns[t]`` links spreads t and t+1."""

    spreads: np.ndarray
    returns: np.ndarray
    timestamps: Optional[np.ndarray] = None
    date: str = ""

    def __post_init__(self):
        self.spreads = np.asarray(self.spreads, dtype=np.int8)
        self.returns = np.asarray(self.returns, dtype=np.int8)
        if self.returns.size != max(self.spreads.size - 1, 0):
            raise ValueError("a segment needs exactly one return fewer than spreads")
        if self.timestamps is not None:
            self.timestamps = np.asarray(self.timestamps, dtype=np.int64)
            if self.timestamps.size != self.spreads.size:
                raise ValueError("timestamps must align with spreads")

    @property
    def transitions(self) -> np.ndarray:
        return encode_transitions(self.spreads)


@dataclass
class TickSeries:
    segments: list[Segment]
    regime_label: Optional[str] = None
    dropped_count: int = 0

    @property
    def spreads(self) -> np.ndarray:
        return _cat([s.spreads for s in self.segments])

    @property
    def returns(self) -> np.ndarray:
        return _cat([s.returns for s in self.segments])

    @property
    def transitions(self) -> np.ndarray:
        return _cat([s.transitions for s in self.segments])

    @property
    def n_observations(self) -> int:
        return int(sum(s.spreads.size for s in self.segments))

    @property
    def n_returns(self) -> int:
        return int(sum(s.returns.size for s in self.segments))

    def __len__(self) -> int:
        return self.n_returns

    @classmethod
    def concat(cls, parts: Sequence["TickSeries"], regime_label=None) -> "TickSeries":
        return cls(
            [seg for p in parts for seg in p.segments],
            regime_label=regime_label,
            dropped_count=sum(p.dropped_count for p in parts),
        )


def _cat(arrays: list[np.ndarray]) -> np.ndarray:
    if not arrays:
        return np.empty(0, dtype=np.int8)
    return np.concatenate(arrays)


def build_tick_series(
    records: Iterable[TradeRecord], tick_size: float, regime_label: Optional[str] = None
) -> TickSeries:
    """Convert trade records into a segmented spread/return series.

    Spread is ``round((ask - bid) / tick)`` and the return between consecutive
    records is ``round(2 * delta_mid / tick)`` half ticks. Records whose
    spread is outside {1, 2}, or whose return exceeds 2 half ticks in size,
    are dropped and close the current segment. A new segment also starts at
    every change of date.
    """
    if not tick_size > 0:
        raise ValueError("tick size must be positive")
    segments: list[Segment] = []
    dropped = 0
    cur_s: list[int] = []
    cur_mid: list[int] = []
    cur_ts: list[int] = []
    cur_date = None

    def close():
        nonlocal cur_s, cur_mid, cur_ts
        if cur_s:
            mids = np.asarray(cur_mid, dtype=np.int64)
            segments.append(Segment(cur_s, np.diff(mids), cur_ts, cur_date or ""))
        cur_s, cur_mid, cur_ts = [], [], []

    for rec in records:
        if rec.trade_date != cur_date:
            close()
            cur_date = rec.trade_date
        s = int(round((rec.ask - rec.bid) / tick_size))
        mid2 = int(round((rec.ask + rec.bid) / tick_size))
        if s not in (1, 2):
            dropped += 1
            close()
            continue
        if cur_s:
            r = mid2 - cur_mid[-1]
            x = 2 * (cur_s[-1] - 1) + s
            if abs(r) > 2 or not support_mask([r], [x])[0]:
                dropped += 1
                close()
                continue
        cur_s.append(s)
        cur_mid.append(mid2)
        cur_ts.append(rec.timestamp)
    close()
    series = TickSeries(segments, regime_label=regime_label, dropped_count=dropped)
    if series.n_returns:
        assert support_mask(series.returns, series.transitions).all()
    return series


# --- intraday regimes -----------------------------------------------------


@dataclass
class RegimeSplit:
    """Record blocks per activity regime; blocks are never joined by a return."""

    high: list[list[TradeRecord]]
    low: list[list[TradeRecord]]
    trimmed: int = 0
    rejected: int = 0

    def series(self, tick_size: float) -> tuple[TickSeries, TickSeries]:
        high = TickSeries.concat(
            [build_tick_series(b, tick_size) for b in self.high], regime_label="high"
        )
        low = TickSeries.concat(
            [build_tick_series(b, tick_size) for b in self.low], regime_label="low"
        )
        return high, low


def classify_time(ts: int) -> Optional[str]:
    """'high', 'low', 'trim' or None (outside the 9:30-16:00 session)."""
    if ts < SESSION_OPEN or ts > SESSION_CLOSE:
        return None
    if ts <= SESSION_OPEN + TRIM or ts >= SESSION_CLOSE - TRIM:
        return "trim"
    if ts < HIGH_MORNING_END:
        return "high"
    if ts <= LOW_END:
        return "low"
    return "high"


def split_regimes(records: Iterable[TradeRecord]) -> RegimeSplit:
    """Route records to the high or low activity subsample.

    The first and last six minutes of the session are discarded. High
    activity is (9:36, 10:30) and (15:45, 15:54), low activity is
    [10:30, 15:45]. Each day contributes separate blocks per window.
    """
    out = RegimeSplit(high=[], low=[])
    prev_key = None
    for rec in records:
        label = classify_time(rec.timestamp)
        if label is None:
            out.rejected += 1
            prev_key = None
            continue
        if label == "trim":
            out.trimmed += 1
            prev_key = None
            continue
        # the two high windows of a day are distinct blocks
        window = label + ("-am" if rec.timestamp < HIGH_MORNING_END else "-pm")
        key = (rec.trade_date, window)
        blocks = out.high if label == "high" else out.low
        if key != prev_key:
            blocks.append([])
        blocks[-1].append(rec)
        prev_key = key
    if out.rejected:
        log.warning("%d records outside session hours rejected", out.rejected)
    return out


@dataclass(frozen=True)
class ActivityProfile:
    """Trade counts per 6-minute bin, total and by absolute return size."""

    bin_start_ms: np.ndarray
    counts_total: np.ndarray
    counts_by_return: dict[str, np.ndarray]


RETURN_CLASSES = ("0", "1", "2", "beyond")


def activity_profile(records: Sequence[TradeRecord], tick_size: float) -> ActivityProfile:
    """Bin records into 6-minute intervals of wall-clock time.

    Each record is also classified by the size of the mid-price move to the
    next record of the same day, in half ticks; the last record of a day has
    no such move and only enters the total.
    """
    if not records:
        raise ValueError("activity profile needs at least one record")
    ts = np.array([r.timestamp for r in records], dtype=np.int64)
    mid2 = np.array([(r.ask + r.bid) / tick_size for r in records])
    dates = [r.trade_date for r in records]
    bins = ts // PROFILE_BIN
    lo, hi = int(bins.min()), int(bins.max())
    idx = bins - lo
    nb = hi - lo + 1
    total = np.bincount(idx, minlength=nb)
    by = {k: np.zeros(nb, dtype=np.int64) for k in RETURN_CLASSES}
    for i in range(len(records) - 1):
        if dates[i] != dates[i + 1]:
            continue
        a = abs(int(round(mid2[i + 1] - mid2[i])))
        by[str(a) if a <= 2 else "beyond"][idx[i]] += 1
    return ActivityProfile(np.arange(lo, hi + 1) * PROFILE_BIN, total, by)


def write_profile_csv(profile: ActivityProfile, fh: TextIO) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["bin_start", "total", *(f"abs_r_{k}" for k in RETURN_CLASSES)])
    for i, start in enumerate(profile.bin_start_ms):
        minutes = int(start) // MS_PER_MINUTE
        w.writerow(
            [f"{minutes // 60:02d}:{minutes % 60:02d}", int(profile.counts_total[i])]
            + [int(profile.counts_by_return[k][i]) for k in RETURN_CLASSES]
        )


# --- tick series CSV ------------------------------------------------------


def write_series_csv(series: TickSeries, fh: TextIO) -> None:
    """One row per spread observation; x and r are blank on a segment's last row."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(SERIES_HEADER)
    label = series.regime_label or ""
    for seg in series.segments:
        x = seg.transitions
        n = seg.spreads.size
        ts = seg.timestamps if seg.timestamps is not None else np.arange(n)
        for t in range(n):
            tail = (int(x[t]), int(seg.returns[t])) if t < n - 1 else ("", "")
            w.writerow([seg.date, int(ts[t]), int(seg.spreads[t]), *tail, label])


def read_series_csv(source) -> TickSeries:
    """Inverse of :func:`write_series_csv`."""
    fh, owned = _open_text(source)
    try:
        reader = csv.reader(fh)
        header = tuple(h.strip() for h in next(reader, ()))
        if header != SERIES_HEADER:
            raise InputError(f"bad tick-series header {','.join(header)!r}")
        segments = []
        label = None
        s, r, ts, date = [], [], [], ""
        for row in reader:
            if not row:
                continue
            try:
                d, t, sv, xv, rv, lab = row
                s.append(int(sv))
                ts.append(int(t))
            except ValueError as exc:
                raise InputError(f"line {reader.line_num}: {exc}") from exc
            date = d
            label = lab or label
            if xv.strip() == "":
                segments.append(Segment(s, r, ts, date))
                s, r, ts = [], [], []
            else:
                r.append(int(rv))
        if s:
            raise InputError("truncated tick series: last segment has no closing row")
    finally:
        if owned:
            fh.close()
    return TickSeries(segments, regime_label=label)


def series_from_text(text: str) -> TickSeries:
    return read_series_csv(io.StringIO(text))

