"""Command-line interface: fit, concentration, cv, simulate.

Every run writes its outputs into one flat directory together with a
``run_manifest.txt`` recording the resolved configuration and seed, so any
result can be reproduced bit-for-bit.  Progress goes to stderr; stdout
carries only machine-readable key=value summaries.  Exit codes: 0 success,
1 user or data error, 2 internal sampler error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import __version__
from .data import (
    DEFAULT_TRIM_END,
    DEFAULT_TRIM_START,
    load_timeseries,
    read_metadata,
    standardize,
    trim_series,
)
from .gibbs import SamplerError, run_chain
from .inference import (
    chain_diagnostics,
    model_probabilities,
    posterior_curve,
    posterior_derivative,
    scaled_derivative,
    write_curve_csv,
)
from .model import ModelConfig
from .simulate import (
    MetricsReport,
    Scenario,
    kfold_cv,
    run_replicates,
    summarize_reports,
)

__all__ = ["main"]


class UsageError(ValueError):
    """Bad flags, paths, or input data; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


_CONFIG_FLAG_TYPES = {"int": int, "float": float, "str": str}


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("model configuration overrides")
    group.add_argument("--config", metavar="FILE", help="key=value config file")
    for f in fields(ModelConfig):
        flag = "--" + f.name.replace("_", "-")
        if f.type == "bool":
            group.add_argument(
                flag, default=None, choices=("true", "false"), help=f"default {f.default}"
            )
        else:
            group.add_argument(
                flag,
                default=None,
                type=_CONFIG_FLAG_TYPES[f.type],
                metavar=f.type.upper(),
                help=f"default {f.default}",
            )


def _resolve_config(args: argparse.Namespace) -> ModelConfig:
    """defaults < config file < command-line flags."""
    mapping: dict = {}
    if args.config:
        mapping.update(ModelConfig.from_file(args.config).as_dict())
    for f in fields(ModelConfig):
        value = getattr(args, f.name, None)
        if value is not None:
            mapping[f.name] = value
    return ModelConfig.from_mapping(mapping)


def _add_input_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("input", help="CSV file of the recorded series")
    parser.add_argument("--time-column", default="time")
    parser.add_argument("--value-column", default="pressure_drop")
    parser.add_argument(
        "--trim-start",
        type=float,
        default=DEFAULT_TRIM_START,
        help="minutes dropped at the start (default %(default)s)",
    )
    parser.add_argument(
        "--trim-end",
        type=float,
        default=DEFAULT_TRIM_END,
        help="minutes dropped at the end (default %(default)s)",
    )
    parser.add_argument("--metadata", default=None, help="sidecar key=value file")
    parser.add_argument("--grid-points", type=int, default=100)


def build_parser() -> _Parser:
    parser = _Parser(prog="monoreg", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_fit = sub.add_parser("fit", help="fit the monotone curve to a series")
    _add_input_flags(p_fit)
    p_fit.add_argument("-o", "--output-dir", required=True)
    _add_config_flags(p_fit)
    p_fit.set_defaults(func=cmd_fit)

    p_conc = sub.add_parser(
        "concentration", help="fit and emit the mass-scaled derivative (ug/m3)"
    )
    _add_input_flags(p_conc)
    p_conc.add_argument("-o", "--output-dir", required=True)
    p_conc.add_argument("--filter-mass-ug", type=float, default=None)
    p_conc.add_argument("--flow-rate-lpm", type=float, default=None)
    _add_config_flags(p_conc)
    p_conc.set_defaults(func=cmd_concentration)

    p_cv = sub.add_parser("cv", help="k-fold cross-validated fit RMSE")
    _add_input_flags(p_cv)
    p_cv.add_argument("-o", "--output-dir", required=True)
    p_cv.add_argument("--folds", type=int, default=5)
    _add_config_flags(p_cv)
    p_cv.set_defaults(func=cmd_cv)

    p_sim = sub.add_parser("simulate", help="replicate the simulation study")
    p_sim.add_argument("--scenario", required=True)
    p_sim.add_argument("--n", type=int, default=100)
    p_sim.add_argument("--replicates", type=int, default=50)
    p_sim.add_argument("--noise-sd", type=float, default=0.25)
    p_sim.add_argument("--jobs", type=int, default=1)
    p_sim.add_argument("-o", "--output-dir", required=True)
    _add_config_flags(p_sim)
    p_sim.set_defaults(func=cmd_simulate)

    return parser


def _prepare_output_dir(args) -> Path:
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_manifest(out: Path, command: str, params: dict, config: ModelConfig) -> None:
    lines = [f"command = {command}", f"version = {__version__}"]
    lines += [f"{key} = {_fmt(value)}" for key, value in sorted(params.items())]
    lines += [f"config.{key} = {_fmt(value)}" for key, value in config.as_dict().items()]
    (out / "run_manifest.txt").write_text("\n".join(lines) + "\n")


def _load_dataset(args):
    series = load_timeseries(args.input, args.time_column, args.value_column)
    if args.trim_start > 0 or args.trim_end > 0:
        series = trim_series(series, args.trim_start, args.trim_end)
    meta = {}
    meta_path = args.metadata
    if meta_path is None:
        candidate = Path(args.input).with_suffix(".meta")
        if candidate.exists():
            meta_path = candidate
    if meta_path is not None:
        meta = read_metadata(meta_path)
    mass = meta.get("filter_mass_ug")
    flow = meta.get("flow_rate_lpm")
    dataset = standardize(series, filter_mass=mass, flow_rate=flow)
    print(f"rows_dropped={series.n_dropped}", file=sys.stderr)
    print(f"n_observations={dataset.n}", file=sys.stderr)
    return dataset


def _write_posterior_outputs(out: Path, sample, grid_points: int) -> dict:
    grid = np.linspace(0.0, 1.0, grid_points)
    curve = posterior_curve(sample, grid)
    deriv = posterior_derivative(sample, grid)
    diag = chain_diagnostics(sample, grid)
    write_curve_csv(curve, out / "curve.csv", "minutes", "fitted outcome, original units")
    write_curve_csv(
        deriv, out / "derivative.csv", "minutes", "outcome units per minute"
    )
    with open(out / "diagnostics.csv", "w") as handle:
        handle.write("x,ess,lag1_autocorr\n")
        for x, e, l1 in zip(diag.point, diag.ess, diag.lag1_autocorr):
            handle.write(f"{float(x)!r},{float(e)!r},{float(l1)!r}\n")
    prob_flat, prob_linear = model_probabilities(sample)
    mean_k = float(np.mean(sample.draws_k))
    mean_n0 = float(np.mean(sample.draws_n0))
    with open(out / "posterior_meta.csv", "w") as handle:
        handle.write("prob_flat,prob_linear,mean_k,mean_n0\n")
        handle.write(f"{prob_flat!r},{prob_linear!r},{mean_k!r},{mean_n0!r}\n")
    return {
        "prob_flat": prob_flat,
        "prob_linear": prob_linear,
        "mean_k": mean_k,
        "mean_n0": mean_n0,
    }


def cmd_fit(args) -> int:
    out = _prepare_output_dir(args)
    config = _resolve_config(args)
    dataset = _load_dataset(args)
    print("running sampler...", file=sys.stderr)
    sample = run_chain(config, dataset)
    meta = _write_posterior_outputs(out, sample, args.grid_points)
    _write_manifest(
        out,
        "fit",
        {
            "input": args.input,
            "grid_points": args.grid_points,
            "trim_start": args.trim_start,
            "trim_end": args.trim_end,
        },
        config,
    )
    for key, value in meta.items():
        print(f"{key}={_fmt(value)}")
    return 0


def cmd_concentration(args) -> int:
    out = _prepare_output_dir(args)
    config = _resolve_config(args)
    dataset = _load_dataset(args)
    mass = args.filter_mass_ug if args.filter_mass_ug is not None else dataset.filter_mass
    flow = args.flow_rate_lpm if args.flow_rate_lpm is not None else dataset.flow_rate
    if mass is None or flow is None:
        raise UsageError(
            "filter mass and flow rate are required "
            "(--filter-mass-ug/--flow-rate-lpm or sidecar metadata)"
        )
    if not mass > 0:
        raise UsageError("filter mass must be positive")
    if not flow > 0:
        raise UsageError("flow rate must be positive")
    print("running sampler...", file=sys.stderr)
    sample = run_chain(config, dataset)
    grid = np.linspace(0.0, 1.0, args.grid_points)
    conc = scaled_derivative(sample, grid, filter_mass=mass, flow_rate=flow)
    write_curve_csv(conc, out / "concentration.csv", "minutes", "concentration ug/m3")
    _write_manifest(
        out,
        "concentration",
        {
            "input": args.input,
            "grid_points": args.grid_points,
            "trim_start": args.trim_start,
            "trim_end": args.trim_end,
            "filter_mass_ug": float(mass),
            "flow_rate_lpm": float(flow),
        },
        config,
    )
    print(f"flat_draws_excluded={conc.n_flat_excluded}")
    print(f"n_draws_used={sample.n_draws - conc.n_flat_excluded}")
    return 0


def cmd_cv(args) -> int:
    out = _prepare_output_dir(args)
    config = _resolve_config(args)
    dataset = _load_dataset(args)
    if args.folds > dataset.n:
        raise UsageError(f"--folds {args.folds} exceeds the {dataset.n} observations")
    print(f"running {args.folds}-fold cross-validation...", file=sys.stderr)
    rmse = kfold_cv(dataset, config, k=args.folds)
    with open(out / "cv.csv", "w") as handle:
        handle.write("folds,cv_rmse\n")
        handle.write(f"{args.folds},{rmse!r}\n")
    _write_manifest(out, "cv", {"input": args.input, "folds": args.folds}, config)
    print(f"cv_rmse={rmse!r}")
    return 0


_REPORT_COLUMNS = (
    "rmse_f_x100",
    "coverage_f",
    "prob_flat",
    "prob_linear",
    "rmse_deriv_x100",
    "coverage_deriv",
    "n_nonzero_mean",
    "n_unique_mean",
)


def _report_row(report: MetricsReport) -> dict:
    return {
        "rmse_f_x100": 100.0 * report.rmse_f,
        "coverage_f": report.coverage_f,
        "prob_flat": report.prob_flat,
        "prob_linear": report.prob_linear,
        "rmse_deriv_x100": 100.0 * report.rmse_deriv,
        "coverage_deriv": report.coverage_deriv,
        "n_nonzero_mean": report.n_nonzero_mean,
        "n_unique_mean": report.n_unique_mean,
    }


def cmd_simulate(args) -> int:
    out = _prepare_output_dir(args)
    config = _resolve_config(args)
    scenario = Scenario(name=args.scenario, n=args.n, noise_sd=args.noise_sd)
    print(
        f"simulating {args.replicates} replicate(s) of scenario "
        f"{scenario.name!r} at n={scenario.n}...",
        file=sys.stderr,
    )
    reports = run_replicates(
        scenario, config, args.replicates, seed=config.seed, jobs=max(args.jobs, 1)
    )
    with open(out / "report.csv", "w") as handle:
        handle.write("replicate,scenario,n," + ",".join(_REPORT_COLUMNS) + "\n")
        for i, report in enumerate(reports):
            row = _report_row(report)
            cells = [str(i), scenario.name, str(scenario.n)]
            cells += [_fmt(row[c]) for c in _REPORT_COLUMNS]
            handle.write(",".join(cells) + "\n")
    summary = summarize_reports(reports)
    with open(out / "summary.csv", "w") as handle:
        keys = sorted(summary)
        handle.write(",".join(keys) + "\n")
        handle.write(",".join(_fmt(summary[k]) for k in keys) + "\n")
    _write_manifest(
        out,
        "simulate",
        {
            "scenario": scenario.name,
            "n": scenario.n,
            "noise_sd": scenario.noise_sd,
            "replicates": args.replicates,
        },
        config,
    )
    for name in ("rmse_f", "coverage_f", "prob_flat", "prob_linear"):
        print(f"{name}_mean={_fmt(summary[f'{name}_mean'])}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except SamplerError as exc:
        print(f"error: sampler failure: {exc}", file=sys.stderr)
        return 2
    except (UsageError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
