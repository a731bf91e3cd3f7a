"""Realized and Garman-Klass volatility estimators and period summaries."""

from __future__ import annotations

import datetime as dt
import math

import numpy as np
import pytest
from scipy import stats

from volstudy import (
    DailyVol,
    DayGrid,
    MinuteBar,
    ValidationError,
    garman_klass_vol,
    realized_vol,
    summarize_period,
    welch_t,
)

from conftest import UTC_DAY, grid_from_returns, make_grid

GK_COEF = 2.0 * math.log(2.0) - 1.0


def rv_radicand_oracle(returns: np.ndarray) -> float:
    """Independent direct summation of the corrected variance (math.fsum loops)."""
    n = len(returns)
    squares = math.fsum(r * r for r in returns)
    cross = math.fsum(returns[k] * returns[k + 1] for k in range(n - 1))
    return squares + 2.0 * (n / (n - 1.0)) * cross


def padded(*head: float) -> np.ndarray:
    out = np.zeros(1440)
    out[:len(head)] = head
    return out


def bars_day(bars: list[MinuteBar], boundary: float) -> DayGrid:
    log_prices = np.concatenate([[math.log(boundary)], np.log([b.close for b in bars])])
    return DayGrid(UTC_DAY, log_prices, np.diff(log_prices), tuple(bars), 0)


def flat_bar(ts: int, price: float) -> MinuteBar:
    return MinuteBar(ts, price, price, price, price)


# ---------------------------------------------------------------------------
# realized volatility
# ---------------------------------------------------------------------------

def test_realized_vol_zero_returns():
    sigma, clamped = realized_vol(grid_from_returns(np.zeros(1440)))
    assert sigma == 0.0 and not clamped


def test_realized_vol_direct_sum_example():
    day = grid_from_returns(padded(0.01, 0.02, -0.01))
    sigma, clamped = realized_vol(day)
    assert not clamped
    # cross terms cancel exactly, leaving the plain sum of squares
    assert sigma == pytest.approx(math.sqrt(6e-4), rel=1e-12)
    assert sigma == pytest.approx(0.0244949, abs=1e-7)


def test_realized_vol_clamps_on_negative_radicand():
    day = grid_from_returns(padded(0.01, -0.01))
    assert rv_radicand_oracle(day.returns) < 0
    sigma, clamped = realized_vol(day)
    assert sigma == 0.0 and clamped


def test_realized_vol_matches_oracle_on_random_vectors():
    rng = np.random.default_rng(2024)
    for trial in range(100):
        if trial % 3 == 0:
            # alternating-sign returns produce a negative cross term (clamp region)
            returns = np.abs(rng.normal(0, 1e-3, 1440)) * np.where(np.arange(1440) % 2, 1, -1)
        else:
            returns = rng.normal(0, 10.0 ** rng.uniform(-4, -1), 1440)
        day = grid_from_returns(returns)
        sigma, clamped = realized_vol(day)
        radicand = rv_radicand_oracle(returns)
        assert clamped == (radicand < 0)
        if not clamped:
            assert sigma == pytest.approx(math.sqrt(radicand), rel=1e-12)


def test_realized_vol_scales_linearly():
    rng = np.random.default_rng(7)
    returns = rng.normal(0, 1e-3, 1440)
    sigma, _ = realized_vol(grid_from_returns(returns))
    sigma2, _ = realized_vol(grid_from_returns(2.0 * returns))
    sigma3, _ = realized_vol(grid_from_returns(3.0 * returns))
    assert sigma2 == 2.0 * sigma  # power-of-two scaling is exact
    assert sigma3 == pytest.approx(3.0 * sigma, rel=1e-12)


# ---------------------------------------------------------------------------
# Garman-Klass
# ---------------------------------------------------------------------------

def test_gk_flat_bars_zero():
    bars = [flat_bar(60 * k, 100.0) for k in range(1440)]
    sigma, clamped = garman_klass_vol(bars_day(bars, 100.0))
    assert sigma == 0.0 and not clamped


def test_gk_single_active_bar_example():
    bars = [MinuteBar(0, 100.0, 110.0, 100.0, 105.0)]
    bars += [flat_bar(60 * k, 105.0) for k in range(1, 1440)]
    sigma, clamped = garman_klass_vol(bars_day(bars, 100.0))
    term = 0.5 * math.log(1.1) ** 2 - GK_COEF * math.log(1.05) ** 2
    assert not clamped
    assert term == pytest.approx(0.0036225, abs=1e-7)
    assert sigma == pytest.approx(math.sqrt(term), rel=1e-12)
    assert sigma == pytest.approx(0.060187, abs=1e-6)


def test_gk_identical_bars_homogeneity():
    bars = [MinuteBar(60 * k, 100.0, 102.0, 99.0, 101.0) for k in range(1440)]
    sigma, _ = garman_klass_vol(bars_day(bars, 100.0))
    term = 0.5 * math.log(102.0 / 99.0) ** 2 - GK_COEF * math.log(101.0 / 100.0) ** 2
    assert sigma == pytest.approx(math.sqrt(1440 * term), rel=1e-12)


def _random_ohlc_day(rng: np.random.Generator) -> DayGrid:
    bars = []
    prev = 100.0
    for k in range(1440):
        close = prev * math.exp(rng.normal(0, 2e-3))
        spread_hi = math.exp(abs(rng.normal(0, 1e-3)))
        spread_lo = math.exp(-abs(rng.normal(0, 1e-3)))
        bars.append(MinuteBar(60 * k, prev, max(prev, close) * spread_hi,
                              min(prev, close) * spread_lo, close))
        prev = close
    return bars_day(bars, 100.0)


def test_gk_matches_formula_oracle_on_random_days():
    rng = np.random.default_rng(31)
    for _ in range(20):
        day = _random_ohlc_day(rng)
        sigma, clamped = garman_klass_vol(day)
        oracle = math.fsum(
            0.5 * math.log(b.high / b.low) ** 2 - GK_COEF * math.log(b.close / b.open) ** 2
            for b in day.bars)
        assert not clamped
        assert sigma == pytest.approx(math.sqrt(oracle), rel=1e-12)


def test_gk_invariant_to_price_scale():
    rng = np.random.default_rng(32)
    day = _random_ohlc_day(rng)
    sigma, _ = garman_klass_vol(day)
    for scale, tol in ((2.0, 0.0), (3.0, 1e-12)):
        scaled_bars = tuple(
            MinuteBar(b.timestamp, b.open * scale, b.high * scale, b.low * scale, b.close * scale)
            for b in day.bars)
        scaled = DayGrid(day.date, day.log_prices + math.log(scale),
                         day.returns.copy(), scaled_bars, 0)
        sigma_scaled, _ = garman_klass_vol(scaled)
        if tol == 0.0:
            assert sigma_scaled == sigma
        else:
            assert sigma_scaled == pytest.approx(sigma, rel=tol)


def test_gk_requires_bars():
    with pytest.raises(ValidationError, match="bars"):
        garman_klass_vol(make_grid(np.zeros(1441)))


# ---------------------------------------------------------------------------
# period summaries
# ---------------------------------------------------------------------------

def _vols(values: list[float]) -> list[DailyVol]:
    return [DailyVol(UTC_DAY + dt.timedelta(days=i), v, v, False) for i, v in enumerate(values)]


def test_summary_self_comparison_is_zero():
    vols = _vols([0.02, 0.05, 0.03])
    summary = summarize_period(vols, vols, "p")
    assert summary.diff_from_baseline == 0.0
    assert summary.diff_t_stat == 0.0
    constant = _vols([0.02, 0.02])
    summary = summarize_period(constant, constant, "p")
    assert summary.diff_t_stat == 0.0  # zero difference wins over zero variance


def test_summary_welch_hand_example():
    summary = summarize_period(_vols([0.02, 0.04]), _vols([0.01, 0.03]), "p1")
    assert summary.mean == pytest.approx(0.03, rel=1e-12)
    assert summary.std_error == pytest.approx(0.01, rel=1e-12)
    assert summary.n == 2
    assert summary.diff_from_baseline == pytest.approx(0.01, rel=1e-12)
    assert summary.diff_t_stat == pytest.approx(0.01 / math.sqrt(0.0002 / 2 + 0.0002 / 2), rel=1e-12)
    assert summary.diff_t_stat == pytest.approx(0.7071, abs=1e-4)


def test_summary_single_day_has_undefined_error_terms():
    summary = summarize_period(_vols([0.02]), _vols([0.01, 0.03]), "p1")
    assert summary.mean == 0.02 and summary.n == 1
    assert summary.std_error is None
    assert summary.diff_t_stat is None


def test_welch_matches_scipy():
    rng = np.random.default_rng(8)
    for _ in range(10):
        a = rng.normal(0.05, 0.01, rng.integers(3, 40))
        b = rng.normal(0.04, 0.02, rng.integers(3, 40))
        expected = stats.ttest_ind(a, b, equal_var=False).statistic
        assert welch_t(a, b) == pytest.approx(expected, rel=1e-12)


def test_summary_rejects_empty_lists():
    with pytest.raises(ValidationError):
        summarize_period([], _vols([0.01]), "p")


def test_summary_gk_measure_selectable():
    vols = [DailyVol(UTC_DAY, 0.02, 0.05, False), DailyVol(UTC_DAY, 0.02, 0.07, False)]
    summary = summarize_period(vols, vols, "p", measure="sigma_gk")
    assert summary.mean == pytest.approx(0.06, rel=1e-12)


def test_daily_vol_invariants():
    with pytest.raises(ValidationError):
        DailyVol(UTC_DAY, -0.1, 0.0, False)
    with pytest.raises(ValidationError):
        DailyVol(UTC_DAY, 0.1, 0.0, True)  # clamped day must report zero
