"""Pipeline orchestration: config, stage graph, report emission, and the run manifest."""

from __future__ import annotations

import csv
import datetime as dt
import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Sequence

import numpy as np

from .event_study import build_panel, estimate_dd
from .market_data import (
    DayGrid,
    GridBuildResult,
    Period,
    PeriodScheme,
    ValidationError,
    assign_periods,
    build_day_grids,
    default_scheme,
    parse_bars,
    write_day_grids,
)
from .regime_garch import FitConfig, MsGarchFit, fit_msgarch
from .spectral import band_tests, change_ratios, fourier_coefficients, period_rms_amplitude
from .vol_estimators import DailyVol, daily_vols, summarize_period

logger = logging.getLogger(__name__)

RETURNS_SCALE = 100.0  # daily log returns are scaled by 100 before regime fitting


class ConfigError(ValueError):
    """Invalid run configuration; raised before any computation starts."""


@dataclass
class SyntheticSpec:
    multipliers: dict[str, float]
    control_multipliers: dict[str, float] | None = None
    correlation: float = 0.7
    base_minute_vol: float = 5e-4


@dataclass
class RunConfig:
    """Everything one `report` run needs; mirrors the JSON config file keys."""

    input_paths: dict[str, Path]
    output_dir: Path
    scheme: PeriodScheme
    treatment_label: str | None = None
    control_label: str | None = None
    msgarch_label: str | None = None
    max_missing_fraction: float = 0.10
    seed: int = 0
    synthetic: SyntheticSpec | None = None
    fit: FitConfig = field(default_factory=FitConfig)

    def validate(self) -> None:
        if not self.input_paths:
            raise ConfigError("no input paths configured")
        if not 0 <= self.max_missing_fraction <= 1:
            raise ConfigError(f"max_missing_fraction {self.max_missing_fraction} outside [0, 1]")
        dd_labels = (self.treatment_label, self.control_label)
        if any(dd_labels) and not all(dd_labels):
            raise ConfigError("difference-in-differences needs both treatment_label and control_label")
        if self.treatment_label is not None and self.treatment_label == self.control_label:
            raise ConfigError("treatment_label and control_label must differ")
        for name in ("treatment_label", "control_label", "msgarch_label"):
            label = getattr(self, name)
            if label is not None and label not in self.input_paths:
                raise ConfigError(f"{name} {label!r} not among input labels {sorted(self.input_paths)}")
        for label, path in self.input_paths.items():
            if not Path(path).exists():
                raise ConfigError(f"input file for {label!r} not readable: {path}")

    @property
    def dd_requested(self) -> bool:
        return self.treatment_label is not None and self.control_label is not None

    def resolved_msgarch_label(self) -> str:
        if self.msgarch_label:
            return self.msgarch_label
        if self.treatment_label:
            return self.treatment_label
        return sorted(self.input_paths)[0]


_CONFIG_KEYS = {
    "input_paths", "output_dir", "timezone", "periods", "baseline",
    "treatment_label", "control_label", "msgarch_label",
    "max_missing_fraction", "seed", "synthetic", "msgarch_max_iter",
}


def _parse_periods(raw: Sequence[Mapping[str, str]]) -> tuple[Period, ...]:
    periods = []
    for entry in raw:
        try:
            periods.append(Period(
                label=str(entry["label"]),
                start=dt.date.fromisoformat(entry["start"]),
                end=dt.date.fromisoformat(entry["end"]),
            ))
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"bad period entry {entry!r}: {exc}") from None
    return tuple(periods)


def load_config(path: str | Path, output_dir: str | Path | None = None) -> RunConfig:
    """Load a JSON config file; keys mirror RunConfig fields, dates are ISO-8601."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    unknown = set(raw) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")

    timezone = raw.get("timezone", "America/New_York")
    try:
        if "periods" in raw:
            scheme = PeriodScheme(
                periods=_parse_periods(raw["periods"]),
                baseline=raw.get("baseline", raw["periods"][0]["label"]),
                timezone=timezone,
            )
        else:
            scheme = default_scheme(timezone)
    except ValidationError as exc:
        raise ConfigError(f"invalid period scheme: {exc}") from None

    synthetic = None
    if "synthetic" in raw:
        entry = raw["synthetic"]
        synthetic = SyntheticSpec(
            multipliers={str(k): float(v) for k, v in entry.get("multipliers", {}).items()},
            control_multipliers=(
                {str(k): float(v) for k, v in entry["control_multipliers"].items()}
                if "control_multipliers" in entry else None),
            correlation=float(entry.get("correlation", 0.7)),
            base_minute_vol=float(entry.get("base_minute_vol", 5e-4)),
        )

    base = path.parent
    config = RunConfig(
        input_paths={str(k): base / v for k, v in raw.get("input_paths", {}).items()},
        output_dir=Path(output_dir) if output_dir is not None else base / raw.get("output_dir", "out"),
        scheme=scheme,
        treatment_label=raw.get("treatment_label"),
        control_label=raw.get("control_label"),
        msgarch_label=raw.get("msgarch_label"),
        max_missing_fraction=float(raw.get("max_missing_fraction", 0.10)),
        seed=int(raw.get("seed", 0)),
        synthetic=synthetic,
        fit=FitConfig(max_iter=int(raw.get("msgarch_max_iter", 500))),
    )
    return config


def config_echo(config: RunConfig) -> dict[str, Any]:
    """JSON-serializable snapshot of the effective configuration."""
    return {
        "input_paths": {k: str(v) for k, v in sorted(config.input_paths.items())},
        "output_dir": str(config.output_dir),
        "timezone": config.scheme.timezone,
        "periods": [
            {"label": p.label, "start": p.start.isoformat(), "end": p.end.isoformat()}
            for p in config.scheme.periods
        ],
        "baseline": config.scheme.baseline,
        "treatment_label": config.treatment_label,
        "control_label": config.control_label,
        "msgarch_label": config.resolved_msgarch_label(),
        "max_missing_fraction": config.max_missing_fraction,
        "seed": config.seed,
        "returns_scale": RETURNS_SCALE,
    }


# ---------------------------------------------------------------------------
# table writers and readers
# ---------------------------------------------------------------------------

def _fmt_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv_table(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt_cell(v) for v in row])


def read_csv_table(path: str | Path) -> list[dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as handle:
        return list(csv.DictReader(handle))


def write_json_table(path: Path, payload: Any) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_json_table(path: str | Path) -> Any:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


# ---------------------------------------------------------------------------
# report payload builders
# ---------------------------------------------------------------------------

def daily_close_rows(days: Sequence[DayGrid]) -> list[list[Any]]:
    rows: list[list[Any]] = []
    prev_log_close: float | None = None
    for day in days:
        log_close = float(day.log_prices[-1])
        log_return = None if prev_log_close is None else log_close - prev_log_close
        rows.append([day.date.isoformat(), math.exp(log_close), log_return])
        prev_log_close = log_close
    return rows


def daily_log_returns(days: Sequence[DayGrid], scale: float = RETURNS_SCALE) -> tuple[list[dt.date], np.ndarray]:
    """Close-to-close daily log returns (scaled) and the dates they belong to."""
    if len(days) < 2:
        raise ValidationError("need at least two days for daily returns")
    closes = np.array([day.log_prices[-1] for day in days])
    return [day.date for day in days[1:]], scale * np.diff(closes)


def period_summary_payload(
    vols_by_period: Mapping[str, Sequence[DailyVol]],
    scheme: PeriodScheme,
) -> list[dict[str, Any]]:
    baseline = vols_by_period.get(scheme.baseline, [])
    if not baseline:
        raise ValidationError(f"baseline period {scheme.baseline!r} has no days")
    payload = []
    for label in scheme.labels:
        vols = vols_by_period.get(label, [])
        if not vols:
            continue
        for measure in ("sigma", "sigma_gk"):
            summary = summarize_period(vols, baseline, label, measure)
            payload.append({
                "period": label,
                "measure": measure,
                "mean": summary.mean,
                "std_error": summary.std_error,
                "n": summary.n,
                "diff_from_baseline": summary.diff_from_baseline,
                "diff_t_stat": summary.diff_t_stat,
            })
    return payload


# ---------------------------------------------------------------------------
# the pipeline
# ---------------------------------------------------------------------------

@dataclass
class PipelineResult:
    output_dir: Path
    manifest: dict[str, Any] = field(default_factory=dict)
    manifest_path: Path | None = None
    outputs: dict[str, Path] = field(default_factory=dict)
    status: dict[str, str] = field(default_factory=dict)
    errors: list[dict[str, str]] = field(default_factory=list)
    exceptions: list[tuple[str, Exception]] = field(default_factory=list)
    notes: dict[str, Any] = field(default_factory=dict)


STAGE_FAMILIES = frozenset({"volatility", "spectral", "did", "msgarch"})


class _Pipeline:
    def __init__(self, config: RunConfig, families: frozenset[str]) -> None:
        self.config = config
        self.families = families
        self.result = PipelineResult(output_dir=Path(config.output_dir))
        self.grids: dict[str, GridBuildResult] = {}
        self.vols_by_period: dict[str, dict[str, list[DailyVol]]] = {}

    def _stage(self, name: str, func: Callable[[], None]) -> bool:
        try:
            func()
        except Exception as exc:  # report and halt dependents only
            logger.error("stage %s failed: %s", name, exc)
            self.result.status[name] = "failed"
            self.result.errors.append({"stage": name, "error": str(exc), "type": type(exc).__name__})
            self.result.exceptions.append((name, exc))
            return False
        self.result.status[name] = "ok"
        return True

    def _skip(self, name: str, reason: str) -> None:
        self.result.status[name] = f"skipped ({reason})"

    def _emit(self, name: str, path: Path) -> Path:
        self.result.outputs[name] = path
        return path

    def run(self) -> PipelineResult:
        config = self.config
        config.validate()
        out = self.result.output_dir
        out.mkdir(parents=True, exist_ok=True)
        labels = sorted(config.input_paths)

        for label in labels:
            self._stage(f"ingest:{label}", lambda label=label: self._ingest(label))
        for label in labels:
            if label not in self.grids:
                if "volatility" in self.families:
                    self._skip(f"volatility:{label}", "ingest failed")
                if "spectral" in self.families:
                    self._skip(f"spectral:{label}", "ingest failed")
                continue
            if "volatility" in self.families:
                self._stage(f"volatility:{label}", lambda label=label: self._volatility(label))
            if "spectral" in self.families:
                self._stage(f"spectral:{label}", lambda label=label: self._spectral(label))

        if config.dd_requested and "did" in self.families:
            treat, ctrl = config.treatment_label, config.control_label
            if treat in self.vols_by_period and ctrl in self.vols_by_period:
                self._stage("did", self._did)
            else:
                self._skip("did", "volatility stage failed for a leg")

        if "msgarch" in self.families:
            ms_label = config.resolved_msgarch_label()
            if ms_label in self.grids:
                self._stage(f"msgarch:{ms_label}", lambda: self._msgarch(ms_label))
            else:
                self._skip(f"msgarch:{ms_label}", "ingest failed")

        self._write_manifest()
        return self.result

    # -- stages ------------------------------------------------------------

    def _ingest(self, label: str) -> None:
        config = self.config
        bars = parse_bars(config.input_paths[label])
        built = build_day_grids(bars, config.scheme, config.max_missing_fraction)
        self.grids[label] = built
        self.result.notes[f"excluded_days:{label}"] = len(built.excluded)
        self.result.notes[f"flagged_first_day:{label}"] = any(
            d.synthetic_boundary for d in built.days)

        grid_path = self._emit(f"day_grids:{label}", self.result.output_dir / f"day_grids_{label}.jsonl")
        write_day_grids(built.days, grid_path)
        price_path = self._emit(f"daily_prices:{label}", self.result.output_dir / f"daily_prices_{label}.csv")
        write_csv_table(price_path, ["date", "close", "log_return"], daily_close_rows(built.days))

    def _volatility(self, label: str) -> None:
        built = self.grids[label]
        vols = daily_vols(built.days)
        vol_path = self._emit(f"daily_vol:{label}", self.result.output_dir / f"daily_vol_{label}.csv")
        write_csv_table(
            vol_path,
            ["date", "sigma", "sigma_gk", "clamped"],
            [[v.date.isoformat(), v.sigma, v.sigma_gk, v.clamped] for v in vols],
        )

        assignment = assign_periods(built.days, self.config.scheme)
        self.result.notes[f"dropped_days:{label}"] = assignment.dropped_count
        vol_by_date = {v.date: v for v in vols}
        by_period = {
            period: [vol_by_date[d.date] for d in days]
            for period, days in assignment.by_period.items()
        }
        self.vols_by_period[label] = by_period

        payload = period_summary_payload(by_period, self.config.scheme)
        json_path = self._emit(
            f"period_vol_summary:{label}",
            self.result.output_dir / f"period_vol_summary_{label}.json")
        write_json_table(json_path, payload)
        csv_path = self._emit(
            f"period_vol_summary_csv:{label}",
            self.result.output_dir / f"period_vol_summary_{label}.csv")
        header = ["period", "measure", "mean", "std_error", "n", "diff_from_baseline", "diff_t_stat"]
        write_csv_table(csv_path, header, [[row[k] for k in header] for row in payload])

    def _spectral(self, label: str) -> None:
        scheme = self.config.scheme
        built = self.grids[label]
        assignment = assign_periods(built.days, scheme)
        spectra_by_period = {
            period: [fourier_coefficients(day) for day in days]
            for period, days in assignment.by_period.items()
        }
        baseline_spectra = spectra_by_period.get(scheme.baseline, [])
        if not baseline_spectra:
            raise ValidationError(f"baseline period {scheme.baseline!r} has no days")
        baseline_rms = period_rms_amplitude(baseline_spectra)

        rms_rows: list[list[Any]] = []
        ratio_rows: list[list[Any]] = []
        band_payload: list[dict[str, Any]] = []
        for period in scheme.labels:
            if not spectra_by_period.get(period):
                continue
            rms = (baseline_rms if period == scheme.baseline
                   else period_rms_amplitude(spectra_by_period[period]))
            rms_rows.extend([period, w + 1, float(rms[w])] for w in range(rms.size))
            if period == scheme.baseline:
                continue
            ratios = change_ratios(rms, baseline_rms)
            ratio_rows.extend(
                [period, w + 1, float(ratios[w])] for w in range(ratios.size))
            for report in band_tests(ratios):
                band_payload.append({
                    "period": period,
                    "band": report.band,
                    "mean_change": report.mean_change,
                    "t_stat": report.t_stat,
                    "n": report.n,
                })

        rms_path = self._emit(
            f"rms_amplitudes:{label}", self.result.output_dir / f"rms_amplitudes_{label}.csv")
        write_csv_table(rms_path, ["period", "frequency", "rms_amplitude"], rms_rows)
        ratio_path = self._emit(
            f"change_ratios:{label}", self.result.output_dir / f"change_ratios_{label}.csv")
        write_csv_table(ratio_path, ["period", "frequency", "change_ratio"], ratio_rows)
        band_json = self._emit(
            f"band_report:{label}", self.result.output_dir / f"band_report_{label}.json")
        write_json_table(band_json, band_payload)
        band_csv = self._emit(
            f"band_report_csv:{label}", self.result.output_dir / f"band_report_{label}.csv")
        header = ["period", "band", "mean_change", "t_stat", "n"]
        write_csv_table(band_csv, header, [[row[k] for k in header] for row in band_payload])

    def _did(self) -> None:
        config = self.config
        scheme = config.scheme
        treatment = self.vols_by_period[config.treatment_label]
        control = self.vols_by_period[config.control_label]
        payload = []
        excluded_total = 0
        for period in scheme.labels:
            if period == scheme.baseline:
                continue
            if not treatment.get(period) and not control.get(period):
                continue
            build = build_panel(treatment, control, scheme.baseline, period)
            excluded_total += build.excluded
            estimate = estimate_dd(build.rows)
            payload.append({
                "period": period,
                "alpha": estimate.alpha,
                "beta1": estimate.beta1,
                "beta2": estimate.beta2,
                "beta3": estimate.beta3,
                "t_alpha": estimate.t_stats[0],
                "t_beta1": estimate.t_stats[1],
                "t_beta2": estimate.t_stats[2],
                "t_beta3": estimate.t_stats[3],
                "n_obs": estimate.n_obs,
                "residual_variance": estimate.residual_variance,
            })
        self.result.notes["did_excluded_days"] = excluded_total

        json_path = self._emit("did_estimates", self.result.output_dir / "did_estimates.json")
        write_json_table(json_path, payload)
        csv_path = self._emit("did_estimates_csv", self.result.output_dir / "did_estimates.csv")
        header = ["period", "alpha", "beta1", "beta2", "beta3",
                  "t_alpha", "t_beta1", "t_beta2", "t_beta3", "n_obs", "residual_variance"]
        write_csv_table(csv_path, header, [[row[k] for k in header] for row in payload])

    def _msgarch(self, label: str) -> None:
        days = self.grids[label].days
        dates, returns = daily_log_returns(days, RETURNS_SCALE)
        fit = fit_msgarch(returns, self.config.fit)
        self.result.notes["msgarch_converged"] = fit.converged
        json_path = self._emit(f"msgarch_fit:{label}", self.result.output_dir / f"msgarch_fit_{label}.json")
        write_json_table(json_path, msgarch_payload(fit, label))
        probs_path = self._emit(
            f"regime_probs:{label}", self.result.output_dir / f"regime_probs_{label}.csv")
        write_csv_table(
            probs_path,
            ["date", "p_low_variance_regime", "p_high_variance_regime"],
            [[date.isoformat(), float(fit.smoothed_probs[t, 0]), float(fit.smoothed_probs[t, 1])]
             for t, date in enumerate(dates)],
        )

    def _write_manifest(self) -> None:
        out = self.result.output_dir
        entries = [
            {"name": name, "path": path.name, "sha256": _sha256(path)}
            for name, path in sorted(self.result.outputs.items())
        ]
        manifest = {
            "config": config_echo(self.config),
            "outputs": entries,
            "stages": dict(sorted(self.result.status.items())),
            "errors": self.result.errors,
            "notes": dict(sorted(self.result.notes.items())),
        }
        path = out / "manifest.json"
        path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        self.result.manifest = manifest
        self.result.manifest_path = path


def msgarch_payload(fit: MsGarchFit, label: str) -> dict[str, Any]:
    return {
        "label": label,
        "regimes": [
            {
                "omega": r.omega, "alpha": r.alpha, "gamma": r.gamma, "beta": r.beta,
                "nu": r.nu, "xi": r.xi,
                "unconditional_variance": r.unconditional_variance,
            }
            for r in fit.params.regimes
        ],
        "p11": fit.params.p11,
        "p22": fit.params.p22,
        "log_likelihood": fit.log_likelihood,
        "converged": fit.converged,
        "iterations": fit.iterations,
        "n_obs": fit.n_obs,
        "returns_scale": RETURNS_SCALE,
        "regime_order": "ascending unconditional variance (regime 1 = low)",
    }


def run_pipeline(config: RunConfig, only: set[str] | None = None) -> PipelineResult:
    """Run the configured stages, write their reports, and finish with the manifest.

    A stage failure is recorded in the manifest and halts only the stages that
    depend on it; everything independent still runs.  Reruns on identical
    inputs produce byte-identical outputs and manifest.  ``only`` restricts the
    run to a subset of {"volatility", "spectral", "did", "msgarch"} (ingestion
    always runs; "did" pulls in "volatility").
    """
    if only is None:
        families = STAGE_FAMILIES
    else:
        unknown = set(only) - STAGE_FAMILIES
        if unknown:
            raise ConfigError(f"unknown stage families: {sorted(unknown)}")
        families = frozenset(only | {"volatility"} if "did" in only else only)
    return _Pipeline(config, families).run()
