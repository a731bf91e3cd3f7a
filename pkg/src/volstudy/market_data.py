"""Minute-bar ingestion, trading-day grid construction, and period labeling."""

from __future__ import annotations

import csv
import datetime as dt
import io
import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, TextIO
from zoneinfo import ZoneInfo, ZoneInfoNotFoundError

import numpy as np

logger = logging.getLogger(__name__)

MINUTES_PER_DAY = 1440
GRID_POINTS = MINUTES_PER_DAY + 1

BAR_HEADER = ("timestamp", "open", "high", "low", "close")

_EPOCH = dt.date(1970, 1, 1)


class ParseError(ValueError):
    """Malformed input text (bad header, wrong field count, non-numeric field)."""


class ValidationError(ValueError):
    """Well-formed input that violates a data invariant."""


def resolve_timezone(name: str) -> dt.tzinfo:
    """Resolve a named zone ('America/New_York') or fixed offset ('+09:00')."""
    if name.upper() in ("UTC", "Z"):
        return dt.timezone.utc
    match = re.fullmatch(r"([+-])(\d{2}):?(\d{2})", name)
    if match:
        sign = 1 if match.group(1) == "+" else -1
        seconds = sign * (int(match.group(2)) * 3600 + int(match.group(3)) * 60)
        return dt.timezone(dt.timedelta(seconds=seconds))
    try:
        return ZoneInfo(name)
    except ZoneInfoNotFoundError as exc:
        raise ValidationError(f"unknown timezone {name!r}") from exc


@dataclass(frozen=True, slots=True)
class MinuteBar:
    """One minute of OHLC prices, timestamped at the minute open (UTC epoch seconds)."""

    timestamp: int
    open: float
    high: float
    low: float
    close: float

    def __post_init__(self) -> None:
        if self.timestamp % 60 != 0:
            raise ValidationError(f"timestamp {self.timestamp} not minute-aligned")
        if min(self.open, self.high, self.low, self.close) <= 0:
            raise ValidationError("prices must be positive")
        if self.low > min(self.open, self.close):
            raise ValidationError(f"low {self.low} above open/close")
        if self.high < max(self.open, self.close):
            raise ValidationError(f"high {self.high} below open/close")


@dataclass(frozen=True)
class DayGrid:
    """One trading day: 1441 log prices, 1440 one-minute log returns, per-minute bars.

    ``log_prices[0]`` is the log close of the previous day's final minute (or the
    day's first observed price for the first day of a dataset, in which case
    ``synthetic_boundary`` is set).  ``bars`` is None for grids deserialized from
    the interchange file, which does not carry OHLC detail.
    """

    date: dt.date
    log_prices: np.ndarray
    returns: np.ndarray
    bars: tuple[MinuteBar, ...] | None
    missing_count: int
    synthetic_boundary: bool = False

    def __post_init__(self) -> None:
        if self.log_prices.shape != (GRID_POINTS,):
            raise ValidationError(f"expected {GRID_POINTS} log prices, got {self.log_prices.shape}")
        if self.returns.shape != (MINUTES_PER_DAY,):
            raise ValidationError(f"expected {MINUTES_PER_DAY} returns, got {self.returns.shape}")
        if not np.array_equal(self.returns, np.diff(self.log_prices)):
            raise ValidationError("returns are not first differences of log prices")
        if not 0 <= self.missing_count <= MINUTES_PER_DAY:
            raise ValidationError(f"missing_count {self.missing_count} out of range")
        if self.bars is not None and len(self.bars) != MINUTES_PER_DAY:
            raise ValidationError(f"expected {MINUTES_PER_DAY} bars, got {len(self.bars)}")


@dataclass(frozen=True, slots=True)
class Period:
    label: str
    start: dt.date
    end: dt.date

    def __post_init__(self) -> None:
        if self.end < self.start:
            raise ValidationError(f"period {self.label!r}: end {self.end} before start {self.start}")

    def contains(self, day: dt.date) -> bool:
        return self.start <= day <= self.end


@dataclass(frozen=True)
class PeriodScheme:
    """Ordered, non-overlapping, dated sub-periods with one designated baseline."""

    periods: tuple[Period, ...]
    baseline: str
    timezone: str = "America/New_York"

    def __post_init__(self) -> None:
        if not self.periods:
            raise ValidationError("scheme has no periods")
        labels = [p.label for p in self.periods]
        if len(set(labels)) != len(labels):
            raise ValidationError("duplicate period labels")
        for prev, cur in zip(self.periods, self.periods[1:]):
            if cur.start <= prev.end:
                raise ValidationError(
                    f"periods {prev.label!r} and {cur.label!r} overlap or are out of order")
        if self.baseline not in labels:
            raise ValidationError(f"baseline {self.baseline!r} is not a period label")
        resolve_timezone(self.timezone)

    @property
    def labels(self) -> list[str]:
        return [p.label for p in self.periods]

    @property
    def tzinfo(self) -> dt.tzinfo:
        return resolve_timezone(self.timezone)

    def label_for(self, day: dt.date) -> str | None:
        for period in self.periods:
            if period.contains(day):
                return period.label
        return None


def default_scheme(timezone: str = "America/New_York") -> PeriodScheme:
    """Four-period futures-introduction scheme: baseline plus three post-event windows."""
    return PeriodScheme(
        periods=(
            Period("period0", dt.date(2017, 6, 1), dt.date(2017, 12, 17)),
            Period("period1", dt.date(2017, 12, 18), dt.date(2018, 2, 28)),
            Period("period2", dt.date(2018, 3, 1), dt.date(2018, 4, 30)),
            Period("period3", dt.date(2018, 5, 1), dt.date(2018, 6, 26)),
        ),
        baseline="period0",
        timezone=timezone,
    )


def parse_bars(source: TextIO | str | Path) -> list[MinuteBar]:
    """Parse a `timestamp,open,high,low,close` CSV stream into validated minute bars.

    Rows must be sorted ascending by timestamp with no duplicates.  Raises
    ParseError for malformed text and ValidationError for invariant violations,
    both naming the offending line (header is line 1).
    """
    if isinstance(source, (str, Path)):
        with open(source, newline="", encoding="utf-8-sig") as handle:
            return parse_bars(handle)

    reader = csv.reader(source)
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty input: missing header") from None
    header = [cell.strip().lstrip("﻿") for cell in header]
    if tuple(h.lower() for h in header) != BAR_HEADER:
        raise ParseError(f"line 1: expected header {','.join(BAR_HEADER)!r}, got {','.join(header)!r}")

    bars: list[MinuteBar] = []
    prev_ts: int | None = None
    for lineno, row in enumerate(reader, start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != 5:
            raise ParseError(f"line {lineno}: expected 5 fields, got {len(row)}")
        try:
            ts = int(row[0])
            prices = [float(cell) for cell in row[1:]]
        except ValueError:
            raise ParseError(f"line {lineno}: non-numeric field in {row!r}") from None
        if not all(np.isfinite(prices)):
            raise ParseError(f"line {lineno}: non-finite price in {row!r}")
        if prev_ts is not None:
            if ts == prev_ts:
                raise ValidationError(f"line {lineno}: duplicate timestamp {ts}")
            if ts < prev_ts:
                raise ValidationError(f"line {lineno}: timestamps not ascending ({ts} after {prev_ts})")
        try:
            bar = MinuteBar(ts, *prices)
        except ValidationError as exc:
            raise ValidationError(f"line {lineno}: {exc}") from None
        bars.append(bar)
        prev_ts = ts
    return bars


@dataclass(frozen=True, slots=True)
class ExcludedDay:
    date: dt.date
    reason: str
    missing_count: int | None = None


@dataclass
class GridBuildResult:
    days: list[DayGrid]
    excluded: list[ExcludedDay] = field(default_factory=list)
    notices: list[str] = field(default_factory=list)


def _civil_parts(ts: int, tz: dt.tzinfo, offset_cache: dict[int, int]) -> tuple[dt.date, int]:
    """Civil (date, minute-of-day) of a UTC timestamp; memoizes the UTC offset per hour."""
    hour = ts // 3600
    offset = offset_cache.get(hour)
    if offset is None:
        aware = dt.datetime.fromtimestamp(hour * 3600, tz)
        offset = int(aware.utcoffset().total_seconds())
        offset_cache[hour] = offset
    local = ts + offset
    day_number, remainder = divmod(local, 86400)
    return _EPOCH + dt.timedelta(days=day_number), remainder // 60


def build_day_grids(
    bars: list[MinuteBar],
    scheme: PeriodScheme,
    max_missing_fraction: float = 0.10,
) -> GridBuildResult:
    """Align sorted minute bars to civil trading days and build per-day price grids.

    Days are delimited in the scheme's timezone.  Missing minutes are
    forward-filled from the last observed close (zero return) and counted;
    days missing more than ``max_missing_fraction`` of their minutes, and days
    with no observed bars at all, are excluded and reported.  Daylight-saving
    days keep 1440 wall-clock minutes: absent civil minutes are treated as
    missing, duplicated civil minutes are resolved by UTC order (latest wins).
    """
    if not 0 <= max_missing_fraction <= 1:
        raise ValidationError(f"max_missing_fraction {max_missing_fraction} outside [0, 1]")
    result = GridBuildResult(days=[])
    if not bars:
        result.notices.append("no bars in input range")
        logger.warning("build_day_grids: no bars in input range")
        return result

    tz = scheme.tzinfo
    offset_cache: dict[int, int] = {}
    by_day: dict[dt.date, dict[int, MinuteBar]] = {}
    prev_ts: int | None = None
    for bar in bars:
        if prev_ts is not None and bar.timestamp <= prev_ts:
            raise ValidationError("bars must be sorted ascending by timestamp without duplicates")
        prev_ts = bar.timestamp
        day, minute = _civil_parts(bar.timestamp, tz, offset_cache)
        by_day.setdefault(day, {})[minute] = bar  # later UTC timestamp wins a duplicated minute

    first_day = min(by_day)
    last_day = max(by_day)
    last_close: float | None = None
    day = first_day
    while day <= last_day:
        slots = by_day.get(day)
        if not slots:
            result.excluded.append(ExcludedDay(day, "no observed bars"))
            logger.warning("excluding %s: no observed bars", day)
            day += dt.timedelta(days=1)
            continue

        missing = MINUTES_PER_DAY - len(slots)
        first_minute = min(slots)
        first_bar = slots[first_minute]
        synthetic_boundary = last_close is None
        boundary = first_bar.open if synthetic_boundary else last_close

        day_bars: list[MinuteBar] = []
        fill = boundary
        ts_cursor = first_bar.timestamp - 60 * first_minute
        for minute in range(MINUTES_PER_DAY):
            bar = slots.get(minute)
            if bar is None:
                bar = MinuteBar(ts_cursor, fill, fill, fill, fill)
            else:
                ts_cursor = bar.timestamp
            day_bars.append(bar)
            fill = bar.close
            ts_cursor += 60
        last_close = fill

        if missing / MINUTES_PER_DAY > max_missing_fraction:
            result.excluded.append(ExcludedDay(day, "missing fraction above threshold", missing))
            logger.warning("excluding %s: %d missing minutes", day, missing)
            day += dt.timedelta(days=1)
            continue

        log_prices = np.empty(GRID_POINTS)
        log_prices[0] = np.log(boundary)
        log_prices[1:] = np.log([b.close for b in day_bars])
        result.days.append(DayGrid(
            date=day,
            log_prices=log_prices,
            returns=np.diff(log_prices),
            bars=tuple(day_bars),
            missing_count=missing,
            synthetic_boundary=synthetic_boundary,
        ))
        day += dt.timedelta(days=1)
    return result


@dataclass
class PeriodAssignment:
    by_period: dict[str, list[DayGrid]]
    dropped: list[DayGrid] = field(default_factory=list)

    @property
    def dropped_count(self) -> int:
        return len(self.dropped)


def assign_periods(days: Iterable[DayGrid], scheme: PeriodScheme) -> PeriodAssignment:
    """Assign each day to at most one scheme period by date; out-of-scheme days are dropped."""
    assignment = PeriodAssignment(by_period={label: [] for label in scheme.labels})
    for day in days:
        label = scheme.label_for(day.date)
        if label is None:
            assignment.dropped.append(day)
        else:
            assignment.by_period[label].append(day)
    return assignment


def _format_float(value: float) -> str:
    # 17 significant digits: lossless decimal round trip for float64
    return format(value, ".17g")


def write_day_grids(days: Iterable[DayGrid], path: str | Path) -> None:
    """Write the canonical day-grid interchange file: one JSON object per line."""
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for day in days:
            prices = ",".join(_format_float(p) for p in day.log_prices)
            handle.write(
                f'{{"date": "{day.date.isoformat()}", "logPrices": [{prices}], '
                f'"missingCount": {day.missing_count}}}\n'
            )


def read_day_grids(path: str | Path) -> list[DayGrid]:
    """Read the interchange file back into grids (without per-minute OHLC bars)."""
    days: list[DayGrid] = []
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                date = dt.date.fromisoformat(record["date"])
                log_prices = np.asarray(record["logPrices"], dtype=float)
                missing = int(record["missingCount"])
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ParseError(f"line {lineno}: bad day-grid record: {exc}") from None
            days.append(DayGrid(
                date=date,
                log_prices=log_prices,
                returns=np.diff(log_prices),
                bars=None,
                missing_count=missing,
            ))
    return days


def bars_to_csv(bars: Iterable[MinuteBar]) -> str:
    """Render bars as the canonical CSV text (used by the synthetic generator)."""
    out = io.StringIO()
    out.write(",".join(BAR_HEADER) + "\n")
    for bar in bars:
        out.write(f"{bar.timestamp},{bar.open:.2f},{bar.high:.2f},{bar.low:.2f},{bar.close:.2f}\n")
    return out.getvalue()
