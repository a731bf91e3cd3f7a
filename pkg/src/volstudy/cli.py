"""Command-line interface: ingest, rv, spectrum, bands, did, msgarch, simulate, report."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .market_data import (
    ParseError,
    PeriodScheme,
    ValidationError,
    assign_periods,
    build_day_grids,
    default_scheme,
    parse_bars,
    read_day_grids,
    write_day_grids,
)
from .event_study import RankDeficientError
from .pipeline import (
    ConfigError,
    RETURNS_SCALE,
    daily_log_returns,
    load_config,
    msgarch_payload,
    period_summary_payload,
    run_pipeline,
    write_csv_table,
    write_json_table,
)
from .regime_garch import FitConfig, fit_msgarch
from .spectral import (
    DegenerateVarianceError,
    N_FREQUENCIES,
    band_tests,
    change_ratios,
    fourier_coefficients,
    period_rms_amplitude,
)
from .synthetic import generate_synthetic
from .vol_estimators import daily_vols

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # usage problems are config errors (exit 1)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _exit_code(exc: Exception) -> int:
    if isinstance(exc, (ConfigError, FileNotFoundError)):
        return EXIT_CONFIG
    if isinstance(exc, (ParseError, ValidationError)):
        return EXIT_DATA
    if isinstance(exc, (DegenerateVarianceError, RankDeficientError,
                        np.linalg.LinAlgError, ValueError, ArithmeticError)):
        return EXIT_NUMERICAL
    raise exc


def _scheme_from(args: argparse.Namespace) -> PeriodScheme:
    if getattr(args, "config", None):
        scheme = load_config(args.config).scheme
    else:
        scheme = default_scheme()
    if getattr(args, "tz", None):
        scheme = PeriodScheme(scheme.periods, scheme.baseline, timezone=args.tz)
    return scheme


def _build_grids(args: argparse.Namespace, scheme: PeriodScheme):
    bars = parse_bars(args.input)
    built = build_day_grids(bars, scheme, args.max_missing)
    if built.excluded:
        print(f"excluded {len(built.excluded)} day(s):", file=sys.stderr)
        for day in built.excluded:
            print(f"  {day.date}: {day.reason}", file=sys.stderr)
    return built


def _cmd_ingest(args: argparse.Namespace) -> int:
    scheme = _scheme_from(args)
    built = _build_grids(args, scheme)
    write_day_grids(built.days, args.out)
    print(f"wrote {len(built.days)} day grid(s) to {args.out}")
    return EXIT_OK


def _cmd_rv(args: argparse.Namespace) -> int:
    scheme = _scheme_from(args)
    built = _build_grids(args, scheme)
    vols = daily_vols(built.days)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    label = Path(args.input).stem
    write_csv_table(
        out / f"daily_vol_{label}.csv",
        ["date", "sigma", "sigma_gk", "clamped"],
        [[v.date.isoformat(), v.sigma, v.sigma_gk, v.clamped] for v in vols],
    )
    assignment = assign_periods(built.days, scheme)
    vol_by_date = {v.date: v for v in vols}
    by_period = {p: [vol_by_date[d.date] for d in days] for p, days in assignment.by_period.items()}
    payload = period_summary_payload(by_period, scheme)
    write_json_table(out / f"period_vol_summary_{label}.json", payload)
    header = ["period", "measure", "mean", "std_error", "n", "diff_from_baseline", "diff_t_stat"]
    write_csv_table(out / f"period_vol_summary_{label}.csv", header,
                    [[row[k] for k in header] for row in payload])
    print(f"wrote daily and period volatility tables for {len(vols)} day(s) to {out}")
    return EXIT_OK


def _load_days(args: argparse.Namespace, scheme: PeriodScheme):
    if str(args.input).endswith(".jsonl"):
        return read_day_grids(args.input)
    return _build_grids(args, scheme).days


def _cmd_spectrum(args: argparse.Namespace) -> int:
    scheme = _scheme_from(args)
    days = _load_days(args, scheme)
    header = ["date"] + [f"w{w}" for w in range(1, N_FREQUENCIES + 1)]
    rows = []
    for day in days:
        spectrum = fourier_coefficients(day)
        rows.append([day.date.isoformat()] + [float(c) for c in spectrum.amplitudes])
    write_csv_table(Path(args.out), header, rows)
    print(f"wrote {len(rows)} daily spectra to {args.out}")
    return EXIT_OK


def _cmd_bands(args: argparse.Namespace) -> int:
    scheme = _scheme_from(args)
    days = _load_days(args, scheme)
    assignment = assign_periods(days, scheme)
    spectra = {p: [fourier_coefficients(d) for d in ds] for p, ds in assignment.by_period.items()}
    baseline = spectra.get(scheme.baseline)
    if not baseline:
        raise ValidationError(f"baseline period {scheme.baseline!r} has no days")
    baseline_rms = period_rms_amplitude(baseline)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    label = Path(args.input).stem
    rms_rows, ratio_rows, band_rows = [], [], []
    for period in scheme.labels:
        if not spectra.get(period):
            continue
        rms = baseline_rms if period == scheme.baseline else period_rms_amplitude(spectra[period])
        rms_rows.extend([period, w + 1, float(rms[w])] for w in range(rms.size))
        if period == scheme.baseline:
            continue
        ratios = change_ratios(rms, baseline_rms)
        ratio_rows.extend([period, w + 1, float(ratios[w])] for w in range(ratios.size))
        band_rows.extend(
            [period, rep.band, rep.mean_change, rep.t_stat, rep.n] for rep in band_tests(ratios))
    write_csv_table(out / f"rms_amplitudes_{label}.csv",
                    ["period", "frequency", "rms_amplitude"], rms_rows)
    write_csv_table(out / f"change_ratios_{label}.csv",
                    ["period", "frequency", "change_ratio"], ratio_rows)
    write_csv_table(out / f"band_report_{label}.csv",
                    ["period", "band", "mean_change", "t_stat", "n"], band_rows)
    print(f"wrote RMS amplitudes, change ratios, and band report to {out}")
    return EXIT_OK


def _cmd_did(args: argparse.Namespace) -> int:
    config = load_config(args.config, output_dir=args.out)
    if not config.dd_requested:
        raise ConfigError("config must set treatment_label and control_label for did")
    config.input_paths = {
        k: v for k, v in config.input_paths.items()
        if k in (config.treatment_label, config.control_label)
    }
    config.msgarch_label = None
    result = run_pipeline(config, only={"did"})
    if result.exceptions:
        _report_stage_errors(result)
        return _exit_code(result.exceptions[0][1])
    print(f"wrote difference-in-differences estimates to {result.outputs['did_estimates']}")
    return EXIT_OK


def _cmd_msgarch(args: argparse.Namespace) -> int:
    scheme = _scheme_from(args)
    days = _load_days(args, scheme)
    dates, returns = daily_log_returns(days, RETURNS_SCALE)
    fit = fit_msgarch(returns, FitConfig(max_iter=args.max_iter))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    label = Path(args.input).stem
    write_json_table(out / f"msgarch_fit_{label}.json", msgarch_payload(fit, label))
    write_csv_table(
        out / f"regime_probs_{label}.csv",
        ["date", "p_low_variance_regime", "p_high_variance_regime"],
        [[d.isoformat(), float(fit.smoothed_probs[t, 0]), float(fit.smoothed_probs[t, 1])]
         for t, d in enumerate(dates)],
    )
    status = "converged" if fit.converged else "did not converge"
    print(f"fit {status}: log-likelihood {fit.log_likelihood:.4f} on {fit.n_obs} returns")
    return EXIT_OK


def _cmd_simulate(args: argparse.Namespace) -> int:
    config = load_config(args.config, output_dir=args.out)
    if config.synthetic is None:
        raise ConfigError("config must carry a 'synthetic' section for simulate")
    seed = args.seed if args.seed is not None else config.seed
    spec = config.synthetic
    paths = generate_synthetic(
        config.scheme, spec.multipliers, seed, config.output_dir,
        control_multipliers=spec.control_multipliers,
        correlation=spec.correlation,
        base_minute_vol=spec.base_minute_vol,
    )
    for label, path in sorted(paths.items()):
        print(f"wrote {label} bars to {path}")
    return EXIT_OK


def _report_stage_errors(result) -> None:
    for entry in result.errors:
        print(f"stage {entry['stage']} failed: {entry['error']}", file=sys.stderr)


def _cmd_report(args: argparse.Namespace) -> int:
    config = load_config(args.config, output_dir=args.out)
    if args.seed is not None:
        config.seed = args.seed
    if args.max_missing is not None:
        config.max_missing_fraction = args.max_missing
    if args.tz:
        config.scheme = PeriodScheme(config.scheme.periods, config.scheme.baseline, timezone=args.tz)
    result = run_pipeline(config)
    print(f"wrote {len(result.outputs)} output(s); manifest at {result.manifest_path}")
    if result.notes.get("msgarch_converged") is False:
        print("note: regime fit did not converge (flagged in manifest)", file=sys.stderr)
    if result.exceptions:
        _report_stage_errors(result)
        return _exit_code(result.exceptions[0][1])
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="volstudy", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, func, help_text: str, needs_input=False, needs_out=True,
            out_help="output directory") -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(func=func)
        if needs_input:
            p.add_argument("--input", required=True, help="minute-bar CSV (or day-grid JSONL)")
        if needs_out:
            p.add_argument("--out", required=True, help=out_help)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--tz", help="analysis timezone override")
        p.add_argument("--max-missing", type=float, default=0.10,
                       help="max fraction of missing minutes per day (default 0.10)")
        return p

    add("ingest", _cmd_ingest, "build day grids from minute bars",
        needs_input=True, out_help="day-grid JSONL path")
    add("rv", _cmd_rv, "daily and period realized/Garman-Klass volatility", needs_input=True)
    add("spectrum", _cmd_spectrum, "per-day amplitude spectra",
        needs_input=True, out_help="spectra CSV path")
    add("bands", _cmd_bands, "change ratios and frequency-band tests", needs_input=True)

    p = sub.add_parser("did", help="difference-in-differences estimates (needs config)")
    p.set_defaults(func=_cmd_did)
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="output directory override")

    p = add("msgarch", _cmd_msgarch, "two-regime GJR fit on daily returns", needs_input=True)
    p.add_argument("--max-iter", type=int, default=500)

    p = sub.add_parser("simulate", help="generate synthetic treatment/control bars")
    p.set_defaults(func=_cmd_simulate)
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="output directory override")
    p.add_argument("--seed", type=int)

    p = sub.add_parser("report", help="run the full pipeline and write the manifest")
    p.set_defaults(func=_cmd_report)
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="output directory override")
    p.add_argument("--seed", type=int)
    p.add_argument("--tz")
    p.add_argument("--max-missing", type=float)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:
        code = _exit_code(exc)
        print(f"error: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":
    raise SystemExit(main())
