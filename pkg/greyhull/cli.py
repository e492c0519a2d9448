"""
Command-line interface: ``greyhull simulate|generate|fit|evaluate|export-plots``.

Exit codes are 0 on success, 2 for usage, configuration and file-format errors
and 1 for numerical failures.
"""

from __future__ import annotations
import argparse
from dataclasses import replace
import logging
from pathlib import Path
import sys
from typing import Sequence
import numpy as np
import pandas as pd

from . import __version__
from ._errors import (
    DegenerateTrajectoryError,
    FitInfeasibleError,
    SimulationFault,
)
from ._utils import fmt
from .dynamics import simulate
from .evaluation import evaluate_protocol
from .forces import KeyParams
from .identification import FitProblem, FitResult, fit
from .io import (
    load_config,
    read_dataset,
    read_params,
    read_scenario,
    write_dataset,
    write_params,
    write_table,
    write_yaml,
)
from .presets import PRESETS, VesselPreset, parameter_table
from .workbench import (
    Dataset,
    WorkbenchConfig,
    generate_dataset,
    overlay_frame,
    resolve_commands,
    sample_curves,
    split_indices,
    track_frame,
)


_SELECTORS = ("baseline", "fitted", "truth", "initial")


def _companion(out: Path, suffix: str) -> Path:
    return out.with_name(f"{out.stem}.{suffix}")


def _resolve_params(selector: str, preset: VesselPreset) -> KeyParams:
    if selector in _SELECTORS:
        return preset.params(selector)
    return read_params(selector)


def _preset_for(args: argparse.Namespace, dataset: Dataset | None = None) -> tuple[WorkbenchConfig, VesselPreset]:
    config = load_config(args.config)
    if args.config is None and dataset is not None:
        vessel = dataset.header.get("vessel")
        if vessel in PRESETS:
            config = WorkbenchConfig(preset=vessel, dt=dataset.dt, K=int(dataset.header.get("K", config.K)))
    return config, config.vessel_preset()


def _split(args: argparse.Namespace, config: WorkbenchConfig, dataset: Dataset):
    seed = config.seed if args.seed is None else args.seed
    train, test = split_indices(len(dataset), config.test_fraction, seed)
    return dataset.subset(train), dataset.subset(test)


def cmd_simulate(args: argparse.Namespace) -> int:
    config, preset = _preset_for(args)
    spec = read_scenario(args.scenario)
    spec.validate(preset.config)
    params = _resolve_params(args.params, preset)
    commands = resolve_commands([spec], params.asarray(), preset.config)[0]
    inputs = commands.copy()
    inputs[:, 1] = np.deg2rad(commands[:, 1])
    traj = simulate(spec.initial, inputs, None, params, preset.config, spec.dt, name=spec.name)
    header = {
        "format": "greyhull-dataset",
        "version": 1,
        "vessel": preset.name,
        "dt": float(spec.dt),
        "K": int(spec.K),
        "scenario": {"family": spec.family, "params": dict(spec.params)},
        "params": dict(params._asdict()),
    }
    out = Path(args.out)
    write_dataset(Dataset.from_trajectories([traj], header, rudder_commands_deg=[commands[:, 1]]), out)
    write_table(track_frame(traj), _companion(out, "plot.csv"))
    print(f"{traj.name}: {traj.K} steps, path length {fmt(traj.path_length)} m")
    return 0


def cmd_generate(args: argparse.Namespace) -> int:
    config, preset = _preset_for(args)
    seed = config.seed if args.seed is None else args.seed
    truth = _resolve_params(args.params, preset)
    if args.count is not None:
        config = replace(config, scenarios={**config.scenarios, "count": args.count})
    specs = config.scenario_specs(preset, truth, seed=seed)
    dataset = generate_dataset(
        preset,
        specs,
        truth,
        noise=config.noise,
        seed=seed,
        provenance={"maneuvering_weight": float(config.scenarios.get("maneuvering_weight", 0.7))},
    )
    write_dataset(dataset, args.out)
    print(f"{len(dataset)} trajectories written to {args.out}")
    return 0


def _write_fit_outputs(result: FitResult, preset: VesselPreset, out: Path, p_init: KeyParams) -> None:
    summary = {
        "termination": result.termination,
        "iterations": result.iterations,
        "initial_objective": result.initial_objective,
        "final_objective": result.final_objective,
        "max_violation": float(result.violations.max(initial=0.0)),
        "p_init": p_init,
        "p_star": result.p_star,
        "objective_trace": result.objective_trace,
        "trajectory_costs": result.trajectory_costs,
    }
    write_yaml(summary, out)
    write_params(result.p_star, _companion(out, "params.yaml"))
    write_table(result.history, _companion(out, "history.csv"))
    write_table(result.constraint_report, _companion(out, "constraints.csv"))
    curves = sample_curves(
        preset.constraints.u_grid,
        preset.constraints.a_grid,
        baseline=preset.baseline,
        fitted=result.p_star,
    )
    for name, df in curves.items():
        write_table(df, _companion(out, f"curves-{name}.csv"))


def cmd_fit(args: argparse.Namespace) -> int:
    dataset = read_dataset(args.dataset)
    config, preset = _preset_for(args, dataset)
    train, _ = _split(args, config, dataset)
    p_init = _resolve_params(args.init, preset)
    options = config.solver_options(max_iter=args.max_iter, fd_scheme=args.fd_scheme)
    problem = FitProblem(
        train,
        preset.config,
        p_init,
        preset.constraints,
        options=options,
        r_max=config.r_max,
        per_trajectory_r_max=config.per_trajectory_r_max,
    )
    out = Path(args.out)
    try:
        result = fit(problem)
    except FitInfeasibleError as e:
        if e.result is not None:
            _write_fit_outputs(e.result, preset, out, p_init)
        raise
    _write_fit_outputs(result, preset, out, p_init)
    print(f"{result.termination} after {result.iterations} iterations")
    print(f"objective {fmt(result.initial_objective)} -> {fmt(result.final_objective)}")
    for name, value in result.p_star._asdict().items():
        print(f"  {name} = {fmt(value)}")
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    dataset = read_dataset(args.dataset)
    config, preset = _preset_for(args, dataset)
    _, test = _split(args, config, dataset)
    baseline = _resolve_params(args.baseline, preset)
    fitted = _resolve_params(args.params, preset)
    report = evaluate_protocol(test, baseline, fitted, preset.config, r_max=config.r_max)
    out = Path(args.out)
    write_yaml({**report.summary(), "scenario_table": report.table()}, out)
    write_table(report.table(), _companion(out, "scenarios.csv"))
    overlays = [
        overlay_frame(measured, baseline=b, fitted=f)
        for measured, b, f in zip(test, report.baseline_runs, report.fitted_runs)
    ]
    write_table(pd.concat(overlays, ignore_index=True), _companion(out, "overlays.csv"))
    for name, caption in zip(report.scenarios, report.captions()):
        print(f"{name}: {caption}")
    print(f"mARI {fmt(report.mari)} %")
    print(f"cVDM median improvement {fmt(report.cvdm_median_improvement)} %")
    print(f"consistency {fmt(report.consistency)} %")
    return 0


def cmd_export_plots(args: argparse.Namespace) -> int:
    dataset = read_dataset(args.dataset)
    config, preset = _preset_for(args, dataset)
    train_idx, test_idx = split_indices(
        len(dataset), config.test_fraction, config.seed if args.seed is None else args.seed
    )
    baseline = _resolve_params(args.baseline, preset)
    fitted = _resolve_params(args.params, preset)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    curves = sample_curves(preset.constraints.u_grid, preset.constraints.a_grid, baseline=baseline, fitted=fitted)
    for name, df in curves.items():
        write_table(df, out / f"curves-{name}.csv")
    write_table(parameter_table(baseline=baseline, fitted=fitted), out / "parameters.csv", index=True)
    write_table(dataset.statistics(train_idx), out / "statistics-train.csv", index=True)
    write_table(dataset.statistics(test_idx), out / "statistics-test.csv", index=True)
    write_table(preset.envelope.to_frame(), out / "envelope.csv", index=True)

    test = dataset.subset(test_idx)
    report = evaluate_protocol(test, baseline, fitted, preset.config, r_max=config.r_max)
    best, moderate = report.select_examples()
    for label, i in (("best", best), ("moderate", moderate)):
        frame = overlay_frame(test[i], baseline=report.baseline_runs[i], fitted=report.fitted_runs[i])
        write_table(frame, out / f"track-{label}.csv")
        print(f"{label}: {report.scenarios[i]}: {report.caption(i)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="greyhull",
        description="Grey-box identification of ship maneuvering models from trajectories",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, dataset: bool = True) -> None:
        p.add_argument("--config", default=None, help="Workbench configuration YAML")
        if dataset:
            p.add_argument("--dataset", required=True, help="Dataset file")
        p.add_argument("--seed", type=int, default=None, help="Random seed (overrides the configuration)")
        p.add_argument("--out", required=True, help="Output path")
        p.add_argument("-v", "--verbose", action="count", default=0, help="Log INFO, or DEBUG when repeated")

    p = sub.add_parser("simulate", help="Simulate one scenario")
    common(p, dataset=False)
    p.add_argument("--scenario", required=True, help="Scenario YAML")
    p.add_argument("--params", default="baseline", help=f"One of {', '.join(_SELECTORS)} or a parameter file")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("generate", help="Generate a synthetic dataset")
    common(p, dataset=False)
    p.add_argument("--params", default="fitted", help="Truth parameters: selector or parameter file")
    p.add_argument("--count", type=int, default=None, help="Number of scenarios")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("fit", help="Fit the key parameters on the training split")
    common(p)
    p.add_argument("--init", default="initial", help="Starting point: selector or parameter file")
    p.add_argument("--max-iter", type=int, default=None, help="Iteration budget of the solver")
    p.add_argument("--fd-scheme", choices=("forward", "central"), default=None, help="Finite-difference scheme")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("evaluate", help="Compare baseline and fitted parameters on the test split")
    common(p)
    p.add_argument("--baseline", default="baseline", help="Baseline parameters: selector or parameter file")
    p.add_argument("--params", default="fitted", help="Fitted parameters: selector or parameter file")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("export-plots", help="Write plot data for curves and track overlays")
    common(p)
    p.add_argument("--baseline", default="baseline", help="Baseline parameters: selector or parameter file")
    p.add_argument("--params", default="fitted", help="Fitted parameters: selector or parameter file")
    p.set_defaults(func=cmd_export_plots)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING if args.verbose == 0 else logging.INFO if args.verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    logging.captureWarnings(True)
    try:
        return args.func(args)
    except (SimulationFault, FitInfeasibleError, DegenerateTrajectoryError, FloatingPointError) as e:
        print(f"greyhull: numerical failure: {e}", file=sys.stderr)
        return 1
    except (OSError, ValueError, KeyError) as e:
        print(f"greyhull: error: {e}", file=sys.stderr)
        return 2
    finally:
        logging.captureWarnings(False)
