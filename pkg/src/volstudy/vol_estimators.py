"""Per-day volatility estimators and period-level summaries with difference tests."""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .market_data import DayGrid, ValidationError

_GK_COEF = 2.0 * math.log(2.0) - 1.0


@dataclass(frozen=True, slots=True)
class DailyVol:
    """Bias-corrected realized volatility and Garman-Klass volatility for one day."""

    date: dt.date
    sigma: float
    sigma_gk: float
    clamped: bool
    gk_clamped: bool = False

    def __post_init__(self) -> None:
        if self.sigma < 0 or self.sigma_gk < 0:
            raise ValidationError("volatility must be nonnegative")
        if self.clamped and self.sigma != 0.0:
            raise ValidationError("clamped day must report sigma = 0")


@dataclass(frozen=True, slots=True)
class PeriodVolSummary:
    """Time-series average volatility of one period and its difference vs the baseline.

    ``std_error`` is None for a single-day period; ``diff_t_stat`` is None when
    either period has fewer than two days (degenerate variance).
    """

    label: str
    mean: float
    std_error: float | None
    n: int
    diff_from_baseline: float
    diff_t_stat: float | None


def realized_vol(day: DayGrid) -> tuple[float, bool]:
    """Noise-corrected realized volatility of one day's 1440 one-minute returns.

    sigma = sqrt(sum r_k^2 + 2 * (n/(n-1)) * sum r_k r_{k+1}).  The correction
    term can push the radicand below zero; such days report sigma = 0 with the
    clamp flag set.
    """
    r = day.returns
    n = r.size
    radicand = float(r @ r) + 2.0 * (n / (n - 1.0)) * float(r[:-1] @ r[1:])
    if radicand < 0.0:
        return 0.0, True
    return math.sqrt(radicand), False


def garman_klass_vol(day: DayGrid) -> tuple[float, bool]:
    """Garman-Klass range-based volatility from the day's per-minute OHLC bars."""
    if day.bars is None:
        raise ValidationError(f"day {day.date} carries no OHLC bars")
    high = np.array([b.high for b in day.bars])
    low = np.array([b.low for b in day.bars])
    close = np.array([b.close for b in day.bars])
    opn = np.array([b.open for b in day.bars])
    hl = np.log(high / low)
    co = np.log(close / opn)
    radicand = float(np.sum(0.5 * hl * hl - _GK_COEF * co * co))
    if radicand < 0.0:
        return 0.0, True
    return math.sqrt(radicand), False


def daily_vols(days: Iterable[DayGrid]) -> list[DailyVol]:
    """Compute both estimators for each day."""
    out = []
    for day in days:
        sigma, clamped = realized_vol(day)
        sigma_gk, gk_clamped = garman_klass_vol(day)
        out.append(DailyVol(day.date, sigma, sigma_gk, clamped, gk_clamped))
    return out


def _series(vols: Sequence[DailyVol], measure: str) -> np.ndarray:
    if measure == "sigma":
        return np.array([v.sigma for v in vols])
    if measure == "sigma_gk":
        return np.array([v.sigma_gk for v in vols])
    raise ValueError(f"unknown measure {measure!r}")


def welch_t(sample: np.ndarray, baseline: np.ndarray) -> float:
    """Welch two-sample t-statistic for mean(sample) - mean(baseline).

    Zero mean difference maps to t = 0 even when both samples are constant.
    """
    diff = float(np.mean(sample) - np.mean(baseline))
    if diff == 0.0:
        return 0.0
    denom = math.sqrt(np.var(sample, ddof=1) / sample.size
                      + np.var(baseline, ddof=1) / baseline.size)
    if denom == 0.0:
        return math.copysign(math.inf, diff)
    return diff / denom


def summarize_period(
    vols: Sequence[DailyVol],
    baseline: Sequence[DailyVol],
    label: str,
    measure: str = "sigma",
) -> PeriodVolSummary:
    """Period mean, standard error, and Welch difference test against the baseline period."""
    if not vols or not baseline:
        raise ValidationError("period summaries need non-empty day lists")
    values = _series(vols, measure)
    base_values = _series(baseline, measure)
    n = values.size
    mean = float(np.mean(values))
    std_error = float(np.std(values, ddof=1) / math.sqrt(n)) if n >= 2 else None
    diff = mean - float(np.mean(base_values))
    t_stat = welch_t(values, base_values) if n >= 2 and base_values.size >= 2 else None
    return PeriodVolSummary(label, mean, std_error, n, diff, t_stat)
