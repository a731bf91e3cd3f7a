"""Shared test helpers: day-grid builders and bar-stream factories."""

from __future__ import annotations

import datetime as dt
import io

import numpy as np
import pytest

from volstudy import DayGrid, MinuteBar, Period, PeriodScheme

UTC_DAY = dt.date(2021, 1, 4)


def make_grid(log_prices: np.ndarray, date: dt.date = UTC_DAY, missing: int = 0) -> DayGrid:
    log_prices = np.asarray(log_prices, dtype=float)
    return DayGrid(
        date=date,
        log_prices=log_prices,
        returns=np.diff(log_prices),
        bars=None,
        missing_count=missing,
    )


def grid_from_returns(returns: np.ndarray, start_log_price: float = 0.0) -> DayGrid:
    log_prices = np.concatenate([[start_log_price], start_log_price + np.cumsum(returns)])
    return make_grid(log_prices)


def random_walk_grid(rng: np.random.Generator, step: float = 5e-4,
                     start_price: float = 8000.0) -> DayGrid:
    returns = rng.normal(0.0, step, 1440)
    return grid_from_returns(returns, start_log_price=np.log(start_price))


def day_start_ts(day: dt.date, tz: dt.tzinfo = dt.timezone.utc) -> int:
    return int(dt.datetime.combine(day, dt.time(0), tzinfo=tz).timestamp())


def full_day_bars(day: dt.date = UTC_DAY, close: float = 100.0,
                  closes: np.ndarray | None = None) -> list[MinuteBar]:
    """One full UTC day of flat bars (or bars following the given closes)."""
    start = day_start_ts(day)
    bars = []
    prev = close if closes is None else closes[0]
    for minute in range(1440):
        c = close if closes is None else float(closes[minute])
        o = prev
        bars.append(MinuteBar(start + 60 * minute, o, max(o, c), min(o, c), c))
        prev = c
    return bars


def bars_csv(rows: list[str]) -> io.StringIO:
    return io.StringIO("\n".join(["timestamp,open,high,low,close"] + rows) + "\n")


@pytest.fixture
def utc_scheme() -> PeriodScheme:
    return PeriodScheme(
        periods=(
            Period("period0", dt.date(2021, 1, 1), dt.date(2021, 1, 10)),
            Period("period1", dt.date(2021, 1, 11), dt.date(2021, 1, 20)),
        ),
        baseline="period0",
        timezone="UTC",
    )
