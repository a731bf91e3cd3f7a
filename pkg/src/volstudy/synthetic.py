"""Deterministic synthetic minute-bar generator with per-period volatility scaling.

Stands in for exchange data in tests and demos: correlated treatment/control
geometric random walks whose per-minute volatility is scaled by a per-period
multiplier.  By default only the treatment asset carries the multipliers,
which is the setup the difference-in-differences analysis expects.
"""

from __future__ import annotations

import datetime as dt
import math
from pathlib import Path
from typing import Mapping

import numpy as np

from .market_data import (
    BAR_HEADER,
    MinuteBar,
    PeriodScheme,
    ValidationError,
    _civil_parts,
)

ASSET_LABELS = ("treatment", "control")
_RANGE_SCALE = 0.25  # high/low excursion scale relative to the minute volatility


def _per_minute_sigma(
    timestamps: np.ndarray,
    scheme: PeriodScheme,
    multipliers: Mapping[str, float],
    base_minute_vol: float,
) -> np.ndarray:
    tz = scheme.tzinfo
    offset_cache: dict[int, int] = {}
    label_cache: dict[dt.date, float] = {}
    sigma = np.empty(timestamps.size)
    for i, ts in enumerate(timestamps):
        day, _ = _civil_parts(int(ts), tz, offset_cache)
        mult = label_cache.get(day)
        if mult is None:
            label = scheme.label_for(day)
            mult = multipliers.get(label, 1.0) if label is not None else 1.0
            label_cache[day] = mult
        sigma[i] = base_minute_vol * mult
    return sigma


def _ohlc_path(
    rng_draws: tuple[np.ndarray, np.ndarray, np.ndarray],
    sigma: np.ndarray,
    start_price: float,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    increments, hi_draw, lo_draw = rng_draws
    log_close = math.log(start_price) + np.cumsum(sigma * increments)
    close = np.exp(log_close)
    opn = np.empty_like(close)
    opn[0] = start_price
    opn[1:] = close[:-1]
    upper = np.maximum(opn, close) * np.exp(_RANGE_SCALE * sigma * np.abs(hi_draw))
    lower = np.minimum(opn, close) * np.exp(-_RANGE_SCALE * sigma * np.abs(lo_draw))
    # quote prices in cents; re-impose the OHLC ordering the rounding can nick
    opn, close = np.round(opn, 2), np.round(close, 2)
    upper = np.maximum(np.round(upper, 2), np.maximum(opn, close))
    lower = np.minimum(np.round(lower, 2), np.minimum(opn, close))
    if np.any(lower <= 0):
        raise ValidationError("synthetic path reached a non-positive price; raise start_price")
    return opn, upper, lower, close


def simulate_minute_panel(
    scheme: PeriodScheme,
    vol_multipliers: Mapping[str, float],
    seed: int,
    *,
    control_multipliers: Mapping[str, float] | None = None,
    correlation: float = 0.7,
    base_minute_vol: float = 5e-4,
    start_prices: tuple[float, float] = (8000.0, 400.0),
) -> dict[str, tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]]:
    """Simulate aligned treatment/control OHLC arrays (timestamps, o, h, l, c)."""
    for label, value in vol_multipliers.items():
        if value <= 0:
            raise ValidationError(f"multiplier for {label!r} must be positive, got {value}")
    if not -1.0 <= correlation <= 1.0:
        raise ValidationError(f"correlation {correlation} outside [-1, 1]")
    if base_minute_vol <= 0:
        raise ValidationError("base_minute_vol must be positive")

    tz = scheme.tzinfo
    start = dt.datetime.combine(scheme.periods[0].start, dt.time(0), tzinfo=tz)
    end = dt.datetime.combine(scheme.periods[-1].end + dt.timedelta(days=1), dt.time(0), tzinfo=tz)
    timestamps = np.arange(int(start.timestamp()), int(end.timestamp()), 60, dtype=np.int64)

    sigma_treat = _per_minute_sigma(timestamps, scheme, vol_multipliers, base_minute_vol)
    sigma_control = _per_minute_sigma(
        timestamps, scheme, control_multipliers or {}, base_minute_vol)

    rng = np.random.default_rng(seed)
    n = timestamps.size
    common = rng.standard_normal(n)
    shared_weight = math.sqrt(1.0 - correlation * correlation)
    panel = {}
    for label, sigma, start_price in zip(
            ASSET_LABELS, (sigma_treat, sigma_control), start_prices):
        own = rng.standard_normal(n)
        hi_draw = rng.standard_normal(n)
        lo_draw = rng.standard_normal(n)
        increments = correlation * common + shared_weight * own
        opn, high, low, close = _ohlc_path((increments, hi_draw, lo_draw), sigma, start_price)
        panel[label] = (timestamps, opn, high, low, close)
    return panel


def generate_synthetic(
    scheme: PeriodScheme,
    vol_multipliers: Mapping[str, float],
    seed: int,
    out_dir: str | Path,
    **kwargs,
) -> dict[str, Path]:
    """Write treatment.csv and control.csv minute-bar files; byte-identical per seed."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    panel = simulate_minute_panel(scheme, vol_multipliers, seed, **kwargs)
    paths = {}
    for label, (timestamps, opn, high, low, close) in panel.items():
        path = out_dir / f"{label}.csv"
        with open(path, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(",".join(BAR_HEADER) + "\n")
            for i in range(timestamps.size):
                handle.write(
                    f"{timestamps[i]},{opn[i]:.2f},{high[i]:.2f},{low[i]:.2f},{close[i]:.2f}\n")
        paths[label] = path
    return paths


def generate_synthetic_bars(
    scheme: PeriodScheme,
    vol_multipliers: Mapping[str, float],
    seed: int,
    **kwargs,
) -> dict[str, list[MinuteBar]]:
    """In-memory variant of :func:`generate_synthetic` (same draws, no files)."""
    panel = simulate_minute_panel(scheme, vol_multipliers, seed, **kwargs)
    return {
        label: [
            MinuteBar(int(timestamps[i]), float(opn[i]), float(high[i]),
                      float(low[i]), float(close[i]))
            for i in range(timestamps.size)
        ]
        for label, (timestamps, opn, high, low, close) in panel.items()
    }
