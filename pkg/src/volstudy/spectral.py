"""Per-day DFT amplitude spectra, period RMS averages, change ratios, and band tests."""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .market_data import GRID_POINTS, DayGrid

N_FREQUENCIES = 720

LOW_BAND = (1, 240)
MEDIUM_BAND = (241, 480)
HIGH_BAND = (481, 720)
BAND_NAMES = ("low", "medium", "high")


class DegenerateVarianceError(ValueError):
    """A statistic requiring positive sample variance was asked of a constant sample."""


@dataclass(frozen=True)
class AmplitudeSpectrum:
    """720-element amplitude vector of one day's intraday log-price series.

    ``amplitudes[w - 1]`` is the amplitude at frequency w (cycles per day),
    w = 1..720.
    """

    date: dt.date
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        if self.amplitudes.shape != (N_FREQUENCIES,):
            raise ValueError(f"expected {N_FREQUENCIES} amplitudes, got {self.amplitudes.shape}")
        if np.any(self.amplitudes < 0):
            raise ValueError("amplitudes must be nonnegative")


@dataclass(frozen=True, slots=True)
class BandReport:
    """Mean amplitude change ratio over one frequency band and its t-test against 1."""

    band: str
    mean_change: float
    t_stat: float
    n: int


@lru_cache(maxsize=1)
def _dft_basis() -> tuple[np.ndarray, np.ndarray]:
    # (720, 1441) cosine/sine matrices over angles 2*pi*w*k/1441, k = 1..1441
    k = np.arange(1, GRID_POINTS + 1)
    w = np.arange(1, N_FREQUENCIES + 1)
    angles = 2.0 * np.pi * np.outer(w, k) / GRID_POINTS
    return np.cos(angles), np.sin(angles)


def fourier_coefficients(day: DayGrid, method: str = "direct") -> AmplitudeSpectrum:
    """Amplitudes C(w) = sqrt(a(w)^2 + b(w)^2) of the day's 1441 log prices.

    ``direct`` evaluates the cosine/sine sums explicitly (the reference path);
    ``fft`` uses a real FFT and matches the direct path to 1e-10 absolute.
    """
    prices = day.log_prices
    if method == "direct":
        cos_mat, sin_mat = _dft_basis()
        scale = 2.0 / GRID_POINTS
        a = scale * (cos_mat @ prices)
        b = scale * (sin_mat @ prices)
        amplitudes = np.hypot(a, b)
    elif method == "fft":
        spectrum = np.fft.rfft(prices)
        amplitudes = (2.0 / GRID_POINTS) * np.abs(spectrum[1:N_FREQUENCIES + 1])
    else:
        raise ValueError(f"unknown method {method!r}")
    return AmplitudeSpectrum(day.date, amplitudes)


def period_rms_amplitude(spectra: Sequence[AmplitudeSpectrum]) -> np.ndarray:
    """Root-mean-square average amplitude per frequency over a period's days."""
    if not spectra:
        raise ValueError("cannot average an empty period")
    stacked = np.stack([s.amplitudes for s in spectra])
    return np.sqrt(np.mean(stacked * stacked, axis=0))


def change_ratios(current: np.ndarray, baseline: np.ndarray) -> np.ndarray:
    """Per-frequency ratio of a period's RMS amplitude to the baseline period's."""
    current = np.asarray(current, dtype=float)
    baseline = np.asarray(baseline, dtype=float)
    if current.shape != baseline.shape:
        raise ValueError("current and baseline vectors differ in length")
    bad = np.nonzero(baseline <= 0)[0]
    if bad.size:
        raise ValueError(f"zero baseline amplitude at frequency w={bad[0] + 1}")
    return current / baseline


def one_sample_t_vs_one(values: np.ndarray) -> tuple[float, float]:
    """Mean and one-sample t-statistic of the mean against 1."""
    values = np.asarray(values, dtype=float)
    mean = float(np.mean(values))
    std = float(np.std(values, ddof=1))
    if std == 0.0:
        raise DegenerateVarianceError("zero sample variance: t-statistic undefined")
    return mean, (mean - 1.0) / (std / math.sqrt(values.size))


def band_tests(changes: np.ndarray) -> list[BandReport]:
    """Mean change ratio and t-test against 1 for the low/medium/high frequency bands."""
    changes = np.asarray(changes, dtype=float)
    if changes.shape != (N_FREQUENCIES,):
        raise ValueError(f"expected {N_FREQUENCIES} change ratios, got {changes.shape}")
    reports = []
    for name, (lo, hi) in zip(BAND_NAMES, (LOW_BAND, MEDIUM_BAND, HIGH_BAND)):
        values = changes[lo - 1:hi]
        try:
            mean, t_stat = one_sample_t_vs_one(values)
        except DegenerateVarianceError:
            raise DegenerateVarianceError(f"zero variance in {name} band") from None
        reports.append(BandReport(name, mean, t_stat, values.size))
    return reports


def parseval_check(day: DayGrid, spectrum: AmplitudeSpectrum) -> float:
    """Relative gap between the grid's population variance and half the amplitude energy.

    For the odd-length grid the two agree exactly in real arithmetic, so this
    measures numerical error of the spectrum.
    """
    pop_var = float(np.var(day.log_prices))
    energy = 0.5 * float(spectrum.amplitudes @ spectrum.amplitudes)
    # the floor keeps a constant grid (pop_var = 0, energy = rounding residue) near zero
    return abs(pop_var - energy) / max(pop_var, 1e-12)
