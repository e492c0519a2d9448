import numpy as np
import pandas as pd
import pytest

from greyhull._errors import (
    ConfigurationError,
    DegenerateTrajectoryError,
    FitInfeasibleError,
    KnotMismatchError,
)
from greyhull.dynamics import Trajectory
from greyhull.identification import (
    ConstraintSet,
    FitProblem,
    SolverOptions,
    WeightSpec,
    constraint_report,
    constraint_values,
    evaluate_constraints,
    fd_gradient,
    fit,
    gradient_check,
    objective,
    objective_details,
    trajectory_cost,
)
from greyhull.presets import ship_a, ship_b
from greyhull.workbench import generate_dataset


def _pair(K=3):
    states = np.zeros((K + 1, 8))
    inputs = np.zeros((K, 2))
    return Trajectory(states, inputs, 1.0), Trajectory(states.copy(), inputs, 1.0)


def test_weight_diagonal():
    W = WeightSpec(100.0, 2.0, r_max=0.0314)
    np.testing.assert_allclose(
        W.diagonal, [0.01, 0.01, 1 / np.pi, 0.5, 0.5, 1 / 0.0314, 0.0, 0.0]
    )


def test_cost_of_position_error():
    meas, pred = _pair()
    meas.states[2, 0] = 3.0
    assert trajectory_cost(pred, meas, WeightSpec(100.0, 1.0)) == pytest.approx(0.09, rel=1e-14)


def test_cost_wraps_heading():
    meas, pred = _pair()
    meas.states[1, 2] = 2 * np.pi - 0.1
    assert trajectory_cost(pred, meas, WeightSpec(100.0, 1.0)) == pytest.approx(0.01 / np.pi, rel=1e-9)


def test_cost_ignores_actuator_channels():
    meas, pred = _pair()
    meas.states[1, 6] = 100.0
    meas.states[2, 7] = 0.3
    assert trajectory_cost(pred, meas, WeightSpec(10.0, 1.0)) == 0.0


def test_cost_accepts_explicit_weights():
    meas, pred = _pair()
    meas.states[1, 3] = 2.0
    assert trajectory_cost(pred, meas, np.ones(8)) == 4.0


def test_cost_knot_mismatch():
    meas, _ = _pair(3)
    pred, _ = _pair(4)
    with pytest.raises(KnotMismatchError):
        trajectory_cost(pred, meas, WeightSpec(1.0, 1.0))


def test_degenerate_weights():
    still, _ = _pair()
    with pytest.raises(DegenerateTrajectoryError):
        WeightSpec.from_trajectory(still)


def test_per_trajectory_yaw_normaliser(dataset):
    traj = dataset[0]
    W = WeightSpec.from_trajectory(traj, per_trajectory=True)
    assert W.r_max == np.max(np.abs(traj.channel("r")))
    assert WeightSpec.from_trajectory(traj).r_max == 0.0314


@pytest.mark.parametrize("factory", [ship_a, ship_b])
def test_published_fitted_parameters_are_feasible(factory):
    preset = factory()
    cs = preset.constraints.refine(10)
    assert np.max(evaluate_constraints(preset.fitted, cs, preset.config)) == 0.0


def test_constraint_count(preset):
    cs = ConstraintSet.default(n_points=64)
    assert constraint_values(preset.fitted, cs, preset.config).shape == (3 * 64 + 4 * 64 + 2,)
    P = np.stack([preset.fitted] * 5)
    assert constraint_values(P, cs, preset.config).shape == (5, 450)


@pytest.mark.parametrize(
    "change, name",
    [
        (dict(p3=-5000.0), "resistance_monotone"),
        (dict(p8=0.2), "drag_zero"),
        (dict(p0=0.1), "lateral_thrust"),
        (dict(p5=-3.0), "lift_lower"),
    ],
)
def test_constraint_violations_are_reported(preset, change, name):
    p = preset.fitted.replace(**change)
    report = constraint_report(p, preset.constraints, preset.config)
    assert list(report.columns) == ["constraint", "grid", "value", "bound", "violation"]
    assert report.loc[report["constraint"] == name, "violation"].max() > 0


def test_drag_at_zero_within_bound(preset):
    report = constraint_report(preset.fitted.replace(p8=0.048), preset.constraints, preset.config)
    row = report[report["constraint"] == "drag_zero"]
    assert row["violation"].item() == 0.0
    assert row["value"].item() == 0.048


def test_lift_sign_gate(preset):
    cs = ConstraintSet.default(n_points=101)
    p = preset.fitted.replace(p4=0.02, p5=0.0, p6=0.0, p7=0.0)
    report = constraint_report(p, cs, preset.config)
    lower = report[report["constraint"] == "lift_lower"]
    upper = report[report["constraint"] == "lift_upper"]
    assert lower["violation"].max() == 0.0
    violated = upper.loc[upper["violation"] > 0, "grid"]
    assert len(violated) > 0
    assert np.all(violated <= -np.deg2rad(2.0))


@pytest.mark.parametrize("factory", [ship_a, ship_b])
@pytest.mark.parametrize("which", ["baseline", "fitted", "steep"])
def test_dense_grid_agrees_with_coarse_grid(factory, which):
    preset = factory()
    p = preset.fitted.replace(p3=-5000.0) if which == "steep" else preset.params(which)
    coarse = constraint_report(p, preset.constraints, preset.config)
    dense = constraint_report(p, preset.constraints.refine(10), preset.config)
    violated_coarse = coarse.groupby("constraint", sort=False)["violation"].max() > 0
    violated_dense = dense.groupby("constraint", sort=False)["violation"].max() > 0
    pd.testing.assert_series_equal(violated_coarse, violated_dense)
    assert violated_dense.any() == (which == "steep")


def test_constraint_set_validation():
    with pytest.raises(ConfigurationError):
        ConstraintSet(np.array([0.0, 2.0, 1.0]), np.array([-0.1, 0.1]))
    with pytest.raises(ConfigurationError):
        ConstraintSet.default(resistance_max=-1.0)


@pytest.mark.parametrize(
    "kwargs",
    [dict(fd_scheme="backward"), dict(max_iter=0), dict(penalty_growth=1.0), dict(fd_step=-1e-6)],
)
def test_solver_options_validation(kwargs):
    with pytest.raises(ConfigurationError):
        SolverOptions(**kwargs)


def _quadratic(P):
    w = np.arange(1, 12, dtype=np.float64)
    return np.sum(w * (P - 0.5) ** 2, axis=-1)


@pytest.mark.parametrize("scheme", ["forward", "central"])
def test_fd_gradient_of_quadratic(scheme):
    p = np.linspace(0.8, 1.2, 11)
    f, g = fd_gradient(_quadratic, p, 1e-6, scheme)
    assert f == pytest.approx(_quadratic(p[None])[0], rel=1e-15)
    exact = 2 * np.arange(1, 12) * (p - 0.5)
    np.testing.assert_allclose(g, exact, rtol=1e-4)


def test_gradient_check_on_quadratic():
    p = np.linspace(0.8, 1.2, 11)
    assert gradient_check(p, fun=_quadratic, scheme="central") < 1e-8


def test_gradient_check_needs_an_objective():
    with pytest.raises(TypeError):
        gradient_check(np.ones(11))


@pytest.fixture(scope="module")
def problem(preset, dataset):
    return FitProblem(dataset.trajectories, preset.config, preset.fitted, preset.constraints)


def test_objective_vanishes_at_truth(problem):
    assert objective(problem.p_init, problem) == 0.0


def test_objective_is_mean_cost(problem, preset):
    value, costs, faulted = objective_details(preset.baseline, problem)
    assert not faulted
    assert costs.shape == (problem.M,)
    assert value == pytest.approx(np.mean(costs), rel=1e-12)
    assert value > 0


def test_objective_penalises_faulted_rollouts(problem, preset):
    value, _, faulted = objective_details(preset.fitted.replace(p3=1e300), problem)
    assert faulted
    assert value == problem.options.penalty


def test_perturbation_increases_objective(problem, preset):
    p = preset.fitted
    assert objective(p.replace(p1=1.1 * p.p1), problem) > objective(p, problem)


def test_weight_scale_keeps_grid_argmin(preset, specs_for):
    specs = specs_for(preset, preset.fitted, K=40)
    noisy = generate_dataset(preset, specs, preset.fitted, noise={"x": 1.0, "y": 1.0, "u": 0.05}, seed=4)
    truth = np.asarray(preset.fitted)
    slice_ = [(a, b) for a in np.linspace(0.8, 1.2, 5) for b in np.linspace(0.8, 1.2, 5)]

    def grid_values(scale):
        problem = FitProblem(
            noisy.trajectories, preset.config, preset.fitted, preset.constraints, weight_scale=scale
        )
        values = []
        for a, b in slice_:
            p = truth.copy()
            p[1] *= a
            p[3] *= b
            values.append(objective(p, problem))
        return np.array(values)

    unit = grid_values(1.0)
    scaled = grid_values(37.5)
    assert np.argmin(scaled) == np.argmin(unit)
    np.testing.assert_allclose(scaled, 37.5 * unit, rtol=1e-12)


def test_gradient_check_on_simulation(problem, preset):
    assert gradient_check(preset.baseline, problem) < 1e-3


def test_fit_from_truth_stops_immediately(problem, preset):
    result = fit(problem)
    assert result.termination == "converged"
    assert result.iterations == 0
    assert result.final_objective == 0.0
    assert result.p_star == preset.fitted
    np.testing.assert_array_equal(result.objective_trace, [0.0])


def test_fit_restores_feasibility(preset, dataset):
    p_init = preset.fitted.replace(p8=0.2)
    problem = FitProblem(
        dataset.trajectories,
        preset.config,
        p_init,
        preset.constraints,
        options=SolverOptions(max_iter=200),
    )
    seen = []
    result = fit(problem, callback=lambda outer, p, f, v: seen.append(outer))
    assert result.termination in ("converged", "max-iter")
    assert result.feasible
    assert np.max(result.violations) <= 1e-6
    assert result.p_star.p8 <= 0.05 + 1.5e-6
    assert np.all(np.diff(result.objective_trace) <= 0)
    assert result.final_objective < objective(preset.baseline, problem)
    assert seen == list(range(1, len(seen) + 1))
    assert list(result.history.columns[:3]) == ["outer", "iterations", "objective"]


def test_fit_reports_infeasible_constraints(preset, dataset):
    impossible = ConstraintSet.default(resistance_max=1.0, monotone_margin=1000.0)
    problem = FitProblem(
        dataset.trajectories,
        preset.config,
        preset.fitted,
        impossible,
        options=SolverOptions(max_iter=30, max_outer=3),
    )
    with pytest.raises(FitInfeasibleError) as e:
        fit(problem)
    result = e.value.result
    assert result.termination == "infeasible"
    assert not result.feasible
    assert result.constraint_report["violation"].max() > 0


def test_fit_problem_validation(preset, dataset):
    with pytest.raises(ValueError):
        FitProblem([], preset.config, preset.fitted, preset.constraints)
    first = dataset[0]
    other = Trajectory(first.states[:-1], first.inputs[:-1], first.dt, "short")
    with pytest.raises(KnotMismatchError):
        FitProblem([dataset[0], other], preset.config, preset.fitted, preset.constraints)
    with pytest.raises(ConfigurationError):
        FitProblem(dataset.trajectories, preset.config, preset.fitted, preset.constraints,
                   lower=np.ones(11), upper=np.zeros(11))


def test_result_struct_access(problem):
    result = fit(problem)
    assert result["termination"] == "converged"
    assert "p_star" in result
    assert "FitResult" in repr(result)
    plain = result.to_dict()
    assert plain["p_star"]["p1"] == problem.p_init.p1
