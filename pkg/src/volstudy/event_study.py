"""Treatment/control log-volatility panel assembly and difference-in-differences OLS."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .vol_estimators import DailyVol

N_COEFFICIENTS = 4


class RankDeficientError(ValueError):
    """The dummy design matrix has an empty cell and cannot identify all coefficients."""


@dataclass(frozen=True, slots=True)
class PanelRow:
    """One asset-day observation of the pooled two-period panel."""

    log_sigma: float
    period_dummy: int
    treatment_dummy: int

    def __post_init__(self) -> None:
        if not math.isfinite(self.log_sigma):
            raise ValueError("log volatility must be finite")
        if self.period_dummy not in (0, 1) or self.treatment_dummy not in (0, 1):
            raise ValueError("dummies must be 0 or 1")

    @property
    def interaction(self) -> int:
        return self.period_dummy * self.treatment_dummy


@dataclass(frozen=True, slots=True)
class DdEstimate:
    """OLS coefficients of log(sigma) on the period/treatment dummies and their interaction.

    Order: (alpha, beta1 period, beta2 treatment, beta3 interaction); t-statistics
    use classical homoskedastic standard errors.
    """

    alpha: float
    beta1: float
    beta2: float
    beta3: float
    t_stats: tuple[float, float, float, float]
    n_obs: int
    residual_variance: float


@dataclass
class PanelBuild:
    rows: list[PanelRow]
    excluded: int = 0
    cell_counts: dict[tuple[int, int], int] = field(default_factory=dict)


def build_panel(
    treatment_by_period: Mapping[str, Sequence[DailyVol]],
    control_by_period: Mapping[str, Sequence[DailyVol]],
    baseline_label: str,
    period_label: str,
) -> PanelBuild:
    """Pool baseline and target-period days of both assets into panel rows.

    Days with clamped or zero volatility are excluded (log undefined) and counted.
    """
    for label in (baseline_label, period_label):
        if label not in treatment_by_period or label not in control_by_period:
            raise ValueError(f"period {label!r} missing from a volatility map")

    build = PanelBuild(rows=[])
    usable = {0: 0, 1: 0}
    for treat_flag, by_period in ((1, treatment_by_period), (0, control_by_period)):
        for period_flag, label in ((0, baseline_label), (1, period_label)):
            for vol in by_period[label]:
                if vol.clamped or vol.sigma <= 0.0:
                    build.excluded += 1
                    continue
                build.rows.append(PanelRow(math.log(vol.sigma), period_flag, treat_flag))
                usable[treat_flag] += 1
    if usable[1] == 0:
        raise ValueError("treatment series has no usable (positive-volatility) days")
    if usable[0] == 0:
        raise ValueError("control series has no usable (positive-volatility) days")

    counts: dict[tuple[int, int], int] = {}
    for row in build.rows:
        key = (row.period_dummy, row.treatment_dummy)
        counts[key] = counts.get(key, 0) + 1
    build.cell_counts = counts
    return build


def estimate_dd(panel: Sequence[PanelRow]) -> DdEstimate:
    """Estimate the saturated two-by-two dummy regression by OLS.

    Requires all four (period, treatment) cells populated and at least five rows
    so the residual variance is defined.
    """
    n = len(panel)
    if n < N_COEFFICIENTS + 1:
        raise ValueError(f"need at least {N_COEFFICIENTS + 1} rows, got {n}")
    for period_flag in (0, 1):
        for treat_flag in (0, 1):
            if not any(r.period_dummy == period_flag and r.treatment_dummy == treat_flag
                       for r in panel):
                raise RankDeficientError(
                    f"empty design cell (period={period_flag}, treatment={treat_flag})")

    design = np.array([[1.0, r.period_dummy, r.treatment_dummy, r.interaction] for r in panel])
    y = np.array([r.log_sigma for r in panel])
    coef, _, _, _ = np.linalg.lstsq(design, y, rcond=None)
    residuals = y - design @ coef
    s2 = float(residuals @ residuals) / (n - N_COEFFICIENTS)
    cov = s2 * np.linalg.inv(design.T @ design)
    se = np.sqrt(np.diag(cov))
    t_stats = tuple(float(c / s) for c, s in zip(coef, se))
    return DdEstimate(
        alpha=float(coef[0]),
        beta1=float(coef[1]),
        beta2=float(coef[2]),
        beta3=float(coef[3]),
        t_stats=t_stats,
        n_obs=n,
        residual_variance=s2,
    )
