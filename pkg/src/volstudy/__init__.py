"""Intraday volatility event-study toolkit.

Realized-volatility estimation, DFT amplitude-band analysis,
difference-in-differences regression, and two-regime Markov-switching
GJR-GARCH regime detection on one-minute OHLC data.
"""

from .market_data import (
    DayGrid,
    ExcludedDay,
    GridBuildResult,
    MinuteBar,
    ParseError,
    Period,
    PeriodAssignment,
    PeriodScheme,
    ValidationError,
    assign_periods,
    build_day_grids,
    default_scheme,
    parse_bars,
    read_day_grids,
    resolve_timezone,
    write_day_grids,
)
from .vol_estimators import (
    DailyVol,
    PeriodVolSummary,
    daily_vols,
    garman_klass_vol,
    realized_vol,
    summarize_period,
    welch_t,
)
from .spectral import (
    AmplitudeSpectrum,
    BandReport,
    DegenerateVarianceError,
    band_tests,
    change_ratios,
    fourier_coefficients,
    one_sample_t_vs_one,
    parseval_check,
    period_rms_amplitude,
)
from .event_study import (
    DdEstimate,
    PanelBuild,
    PanelRow,
    RankDeficientError,
    build_panel,
    estimate_dd,
)
from .regime_garch import (
    FitConfig,
    MsGarchFit,
    MsGarchParams,
    RegimeParams,
    fit_msgarch,
    gjr_variance_path,
    hamilton_loglik,
    kim_smoother,
    simulate_msgarch,
    skewed_t_density,
    skewed_t_logpdf,
)
from .synthetic import generate_synthetic, generate_synthetic_bars, simulate_minute_panel
from .pipeline import ConfigError, PipelineResult, RunConfig, load_config, run_pipeline

__version__ = "0.1.0"

__all__ = [
    "AmplitudeSpectrum", "BandReport", "ConfigError", "DailyVol", "DayGrid",
    "DdEstimate", "DegenerateVarianceError", "ExcludedDay", "FitConfig",
    "GridBuildResult", "MinuteBar", "MsGarchFit", "MsGarchParams",
    "PanelBuild", "PanelRow", "ParseError", "Period", "PeriodAssignment",
    "PeriodScheme", "PeriodVolSummary", "PipelineResult", "RankDeficientError",
    "RegimeParams", "RunConfig", "ValidationError",
    "assign_periods", "band_tests", "build_day_grids", "build_panel",
    "change_ratios", "daily_vols", "default_scheme", "estimate_dd",
    "fit_msgarch", "fourier_coefficients", "garman_klass_vol",
    "generate_synthetic", "generate_synthetic_bars", "gjr_variance_path",
    "hamilton_loglik", "kim_smoother", "load_config", "one_sample_t_vs_one",
    "parse_bars", "parseval_check", "period_rms_amplitude", "read_day_grids",
    "realized_vol", "resolve_timezone", "run_pipeline", "simulate_minute_panel",
    "simulate_msgarch", "skewed_t_density", "skewed_t_logpdf",
    "summarize_period", "welch_t", "write_day_grids",
]
