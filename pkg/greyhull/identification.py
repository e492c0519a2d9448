"""
Constrained nonlinear least-squares identification of the key parameters.

The problem is solved with an augmented-Lagrangian (Powell-Hestenes-Rockafellar)
outer loop whose subproblems are minimized by scipy's L-BFGS-B, a
box-constrained quasi-Newton method. Objective gradients are finite
differences; all perturbed parameter vectors are rolled out together in one
vectorised pass.
"""

from __future__ import annotations
from dataclasses import dataclass, field
from functools import cached_property, partial
import logging
from typing import Callable, Sequence
import numpy as np
import pandas as pd
from numpy.typing import ArrayLike
from scipy.optimize import Bounds, minimize

from ._const import (
    A_MAX,
    FEASIBILITY_TOL,
    IPSI,
    IR,
    LIFT_SIGN_GATE,
    PARAM_NAMES,
    PENALTY,
    R_MAX,
)
from ._errors import (
    ConfigurationError,
    DegenerateTrajectoryError,
    FitInfeasibleError,
    KnotMismatchError,
)
from ._utils import wrap_angle
from .dynamics import Trajectory, VesselConfig, VesselState, rollout
from .forces import (
    EnvInput,
    KeyParams,
    propeller_forces,
    resistance,
    resistance_slope,
    rudder_coefficients,
)
from .struct import ResultStruct

_log = logging.getLogger(__name__)

__all__ = [
    "WeightSpec",
    "ConstraintSet",
    "SolverOptions",
    "FitProblem",
    "FitResult",
    "trajectory_cost",
    "objective",
    "objective_details",
    "constraint_values",
    "evaluate_constraints",
    "constraint_report",
    "fd_gradient",
    "gradient_check",
    "fit",
]


@dataclass(frozen=True)
class WeightSpec:
    """
    Diagonal weights ``diag(1/L, 1/L, 1/pi, 1/U, 1/U, 1/r_max, 0, 0)``.

    ``length`` is the path length and ``speed`` the mean speed of the measured
    trajectory.
    """
    length: float
    speed: float
    r_max: float = R_MAX

    def __post_init__(self):
        if not self.length > 0:
            raise DegenerateTrajectoryError(f"Trajectory path length must be positive, got {self.length}.")
        if not self.speed > 0:
            raise DegenerateTrajectoryError(f"Trajectory mean speed must be positive, got {self.speed}.")
        if not self.r_max > 0:
            raise ValueError(f"r_max must be positive, got {self.r_max}.")

    @classmethod
    def from_trajectory(
        cls,
        measured: Trajectory,
        r_max: float = R_MAX,
        per_trajectory: bool = False,
    ) -> WeightSpec:
        """
        Build the weights of a measured trajectory.

        If ``per_trajectory`` is true the yaw-rate normaliser is the largest
        measured ``|r|`` instead of the global ``r_max`` (falling back to
        ``r_max`` for a trajectory that never turns).
        """
        if per_trajectory:
            r_peak = float(np.max(np.abs(measured.states[:, IR])))
            if r_peak > 0:
                r_max = r_peak
        try:
            return cls(measured.path_length, measured.mean_speed, r_max)
        except DegenerateTrajectoryError as e:
            name = f" {measured.name!r}" if measured.name else ""
            raise DegenerateTrajectoryError(f"Trajectory{name}: {e}") from None

    @property
    def diagonal(self) -> np.ndarray:
        L, U = self.length, self.speed
        return np.array([1 / L, 1 / L, 1 / np.pi, 1 / U, 1 / U, 1 / self.r_max, 0.0, 0.0])


def _residuals(measured: np.ndarray, predicted: np.ndarray) -> np.ndarray:
    res = measured - predicted
    res[..., IPSI] = wrap_angle(res[..., IPSI])
    return res


def _costs(predicted: np.ndarray, measured: np.ndarray, diag: np.ndarray) -> np.ndarray:
    res = _residuals(measured, predicted)
    return np.sum(diag[..., None, :] * res**2, axis=(-2, -1))


def trajectory_cost(
    predicted: Trajectory,
    measured: Trajectory,
    W: WeightSpec | ArrayLike,
) -> float:
    """
    Weighted squared deviation summed over all knots.

    Heading residuals are wrapped to (-pi, pi] before squaring.
    """
    if len(predicted) != len(measured):
        raise KnotMismatchError(
            f"Cannot compare trajectories of {len(predicted)} and {len(measured)} knots."
        )
    diag = W.diagonal if isinstance(W, WeightSpec) else np.asarray(W, dtype=np.float64)
    return float(_costs(predicted.states, measured.states, diag))


@dataclass(frozen=True, eq=False)
class ConstraintSet:
    """
    Domain-knowledge constraints, discretised on surge-speed and inflow-angle grids.

    Parameters
    ----------
    u_grid : array
        Surge speeds (m/s) where the resistance constraints are evaluated.
    a_grid : array
        Rudder inflow angles (rad) where the lift and drag constraints are
        evaluated.
    resistance_min, resistance_max : float
        Bounds of ``R(u)`` (N).
    monotone_margin : float
        Lower bound of ``dR/du`` (N·s/m).
    lateral_thrust_band : float
        Bound ``k`` of ``|Y_n| <= k |X_n|``.
    lift_max : float
        Bound of ``|c_L|``.
    lift_sign_gate : float
        ``c_L`` must share the sign of ``a_r`` outside ``|a_r| < lift_sign_gate``.
    drag_max : float
        Upper bound of ``c_D``; the lower bound is zero.
    drag_zero_max : float
        Upper bound of ``c_D(0)``.
    reference_speed : float
        Surge speed of the operating point (at full rpm) where the lateral
        thrust band is evaluated.
    """
    u_grid: np.ndarray
    a_grid: np.ndarray
    resistance_min: float = 0.0
    resistance_max: float = 80000.0
    monotone_margin: float = 1.0
    lateral_thrust_band: float = 0.05
    lift_max: float = 1.0
    lift_sign_gate: float = LIFT_SIGN_GATE
    drag_max: float = 1.5
    drag_zero_max: float = 0.05
    reference_speed: float = 0.0

    def __post_init__(self):
        for name in ("u_grid", "a_grid"):
            grid = np.asarray(getattr(self, name), dtype=np.float64)
            if grid.ndim != 1 or grid.size == 0:
                raise ConfigurationError(f"{name} must be a nonempty 1-D grid.")
            if not np.all(np.diff(grid) > 0):
                raise ConfigurationError(f"{name} must be strictly increasing.")
            object.__setattr__(self, name, grid)
        if not self.resistance_max > self.resistance_min:
            raise ConfigurationError("resistance_max must exceed resistance_min.")
        for name in ("lateral_thrust_band", "lift_max", "drag_max", "drag_zero_max"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive.")

    @classmethod
    def default(
        cls,
        u_max: float = 8.23,
        n_points: int = 64,
        a_max: float = A_MAX,
        **kwargs,
    ) -> ConstraintSet:
        """Grids of ``n_points`` over ``[0, u_max]`` and ``[-a_max, a_max]``."""
        if n_points < 2:
            raise ConfigurationError(f"n_points must be at least 2, got {n_points}.")
        return cls(
            u_grid=np.linspace(0.0, u_max, n_points),
            a_grid=np.linspace(-a_max, a_max, n_points),
            **kwargs,
        )

    def refine(self, factor: int = 10) -> ConstraintSet:
        """The same constraints on grids ``factor`` times denser."""
        def _dense(g: np.ndarray):
            return np.linspace(g[0], g[-1], (g.size - 1) * factor + 1)
        return ConstraintSet(
            _dense(self.u_grid),
            _dense(self.a_grid),
            self.resistance_min,
            self.resistance_max,
            self.monotone_margin,
            self.lateral_thrust_band,
            self.lift_max,
            self.lift_sign_gate,
            self.drag_max,
            self.drag_zero_max,
            self.reference_speed,
        )

    def with_options(self, **kwargs) -> ConstraintSet:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d.update(kwargs)
        return ConstraintSet(**d)


def _constraint_terms(p: np.ndarray, cs: ConstraintSet, config: VesselConfig):
    """
    Yield ``(name, grid, raw, bound, normalised)`` for each constraint family.

    ``normalised <= 0`` means satisfied.
    """
    pu = p[..., None, :]
    u = cs.u_grid
    a = cs.a_grid
    r_scale = cs.resistance_max

    R = resistance(u, pu)
    yield "resistance_lower", u, R, np.full_like(u, cs.resistance_min), (cs.resistance_min - R) / r_scale
    yield "resistance_upper", u, R, np.full_like(u, cs.resistance_max), (R - cs.resistance_max) / r_scale
    slope = resistance_slope(u, pu)
    yield "resistance_monotone", u, slope, np.full_like(u, cs.monotone_margin), (cs.monotone_margin - slope) / r_scale

    ref = VesselState(u=cs.reference_speed, n=config.n_max).asarray()
    prop = propeller_forces(ref, p, config)
    X_abs = np.abs(prop.X)
    ratio = np.abs(prop.Y) / np.where(X_abs > 0, X_abs, 1.0)
    ratio = ratio[..., None]
    k = np.array([cs.lateral_thrust_band])
    yield "lateral_thrust", np.array([cs.reference_speed]), ratio, k, ratio - k

    c_L, c_D = rudder_coefficients(a, pu)
    gate = cs.lift_sign_gate
    lift_lo = np.where(a >= gate, 0.0, -cs.lift_max)
    lift_hi = np.where(a <= -gate, 0.0, cs.lift_max)
    yield "lift_lower", a, c_L, lift_lo, (lift_lo - c_L) / cs.lift_max
    yield "lift_upper", a, c_L, lift_hi, (c_L - lift_hi) / cs.lift_max
    yield "drag_lower", a, c_D, np.zeros_like(a), -c_D / cs.drag_max
    yield "drag_upper", a, c_D, np.full_like(a, cs.drag_max), (c_D - cs.drag_max) / cs.drag_max
    c_D0 = p[..., 8:9]
    yield "drag_zero", np.zeros(1), c_D0, np.array([cs.drag_zero_max]), (c_D0 - cs.drag_zero_max) / cs.drag_max


def constraint_values(p: ArrayLike, cs: ConstraintSet, config: VesselConfig) -> np.ndarray:
    """
    Signed, normalised constraint values; a constraint holds where the value is <= 0.

    ``p`` may be a stack of parameter vectors, in which case the last axis of
    the result enumerates the constraints.
    """
    p = np.asarray(p, dtype=np.float64)
    return np.concatenate([t[-1] for t in _constraint_terms(p, cs, config)], axis=-1)


def evaluate_constraints(p: ArrayLike, cs: ConstraintSet, config: VesselConfig) -> np.ndarray:
    """Violation magnitude ``max(0, g)`` of every discretised constraint."""
    return np.maximum(constraint_values(p, cs, config), 0.0)


def constraint_report(p: ArrayLike, cs: ConstraintSet, config: VesselConfig) -> pd.DataFrame:
    """One row per discretised constraint with its grid point, value, bound and violation."""
    p = np.asarray(p, dtype=np.float64)
    frames = []
    for name, grid, raw, bound, normalised in _constraint_terms(p, cs, config):
        frames.append(pd.DataFrame({
            "constraint": name,
            "grid": np.broadcast_to(grid, normalised.shape),
            "value": np.broadcast_to(raw, normalised.shape),
            "bound": np.broadcast_to(bound, normalised.shape),
            "violation": np.maximum(normalised, 0.0),
        }))
    return pd.concat(frames, ignore_index=True)


_SCHEMES = ("forward", "central")


@dataclass(frozen=True)
class SolverOptions:
    """
    Options of :func:`fit`.

    ``max_iter`` bounds the total number of quasi-Newton iterations over all
    outer iterations. The solver stops when the iterate is feasible within
    ``feasibility_tol`` and either complementarity holds or the accepted
    objective decreased by less than ``rel_tol`` (relative) over the last
    ``stall_window`` outer iterations.
    """
    max_iter: int = 500
    feasibility_tol: float = FEASIBILITY_TOL
    rel_tol: float = 1e-8
    stall_window: int = 5
    fd_step: float = 1e-6
    fd_scheme: str = "forward"
    initial_penalty: float = 10.0
    penalty_growth: float = 10.0
    max_outer: int = 30
    penalty: float = PENALTY

    def __post_init__(self):
        if self.fd_scheme not in _SCHEMES:
            raise ConfigurationError(f"fd_scheme must be one of {_SCHEMES}, got {self.fd_scheme!r}.")
        for name in ("max_iter", "stall_window", "max_outer"):
            value = getattr(self, name)
            if not (isinstance(value, (int, np.integer)) and value >= 1):
                raise ConfigurationError(f"{name} must be a positive integer, got {value!r}.")
        for name in ("feasibility_tol", "rel_tol", "fd_step", "initial_penalty", "penalty"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ConfigurationError(f"{name} must be positive, got {value!r}.")
        if not self.penalty_growth > 1:
            raise ConfigurationError(f"penalty_growth must exceed 1, got {self.penalty_growth!r}.")


@dataclass(frozen=True, eq=False)
class FitProblem:
    """
    Dataset, vessel, starting point, bounds and constraints of one fit.

    Parameters
    ----------
    dataset : sequence of Trajectory
        Measured trajectories, all with the same number of knots and timestep.
    config : VesselConfig
        The vessel. Its coefficients are not fitted.
    p_init : KeyParams
        Starting point.
    constraints : ConstraintSet
        Domain-knowledge constraints.
    lower, upper : array, optional
        Parameter bounds. Unbounded by default.
    options : SolverOptions
        Solver settings.
    r_max : float
        Yaw-rate normaliser of the weights.
    per_trajectory_r_max : bool
        Use each trajectory's largest ``|r|`` as the yaw-rate normaliser.
    weight_scale : float
        Common factor applied to every weight.
    envs : sequence of EnvInput, optional
        Environment per step, shared by all trajectories.
    """
    dataset: Sequence[Trajectory]
    config: VesselConfig
    p_init: KeyParams
    constraints: ConstraintSet
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    options: SolverOptions = field(default_factory=SolverOptions)
    r_max: float = R_MAX
    per_trajectory_r_max: bool = False
    weight_scale: float = 1.0
    envs: Sequence[EnvInput] | None = None

    def __post_init__(self):
        dataset = tuple(self.dataset)
        if len(dataset) == 0:
            raise ValueError("Dataset must contain at least one trajectory.")
        knots = {len(t) for t in dataset}
        if len(knots) != 1:
            raise KnotMismatchError(f"All trajectories must have the same knot count, got {sorted(knots)}.")
        steps = {t.dt for t in dataset}
        if len(steps) != 1:
            raise ValueError(f"All trajectories must share one timestep, got {sorted(steps)}.")
        object.__setattr__(self, "dataset", dataset)
        object.__setattr__(self, "p_init", KeyParams.from_array(np.asarray(self.p_init)))
        n = len(PARAM_NAMES)
        lower = np.full(n, -np.inf) if self.lower is None else np.asarray(self.lower, dtype=np.float64)
        upper = np.full(n, np.inf) if self.upper is None else np.asarray(self.upper, dtype=np.float64)
        if lower.shape != (n,) or upper.shape != (n,):
            raise ConfigurationError("Parameter bounds must have one entry per parameter.")
        if np.any(lower > upper):
            raise ConfigurationError("Lower parameter bounds must not exceed upper bounds.")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        if not self.weight_scale > 0:
            raise ConfigurationError(f"weight_scale must be positive, got {self.weight_scale}.")

    @property
    def M(self) -> int:
        return len(self.dataset)

    @property
    def K(self) -> int:
        return self.dataset[0].K

    @property
    def dt(self) -> float:
        return self.dataset[0].dt

    @cached_property
    def weights(self) -> list[WeightSpec]:
        return [
            WeightSpec.from_trajectory(t, self.r_max, self.per_trajectory_r_max)
            for t in self.dataset
        ]

    @cached_property
    def measured(self) -> np.ndarray:
        return np.stack([t.states for t in self.dataset])

    @cached_property
    def inputs(self) -> np.ndarray:
        return np.stack([t.inputs for t in self.dataset])

    @cached_property
    def diagonals(self) -> np.ndarray:
        return np.stack([w.diagonal for w in self.weights]) * self.weight_scale


class FitResult(ResultStruct):
    """
    Outcome of :func:`fit`.

    Fields
    ------
    p_star : KeyParams
        Best accepted iterate.
    objective_trace : np.ndarray
        Objective of every accepted feasible iterate, non-increasing.
    history : pd.DataFrame
        One row per outer iteration.
    violations : np.ndarray
        Final constraint violations.
    constraint_report : pd.DataFrame
        Final violations with their grid points.
    trajectory_costs : np.ndarray
        Final cost of each trajectory.
    iterations : int
        Total quasi-Newton iterations.
    termination : str
        ``"converged"``, ``"max-iter"`` or ``"infeasible"``.
    """
    p_star: KeyParams
    objective_trace: np.ndarray
    history: pd.DataFrame
    violations: np.ndarray
    constraint_report: pd.DataFrame
    trajectory_costs: np.ndarray
    iterations: int
    termination: str
    initial_objective: float
    final_objective: float
    multipliers: np.ndarray

    @property
    def feasible(self) -> bool:
        return self.termination != "infeasible"


def _objective_values(P: np.ndarray, problem: FitProblem, with_costs: bool = False):
    """Objective of every row of ``P``; faulted rollouts get the penalty value."""
    P = np.atleast_2d(np.asarray(P, dtype=np.float64))
    predicted = rollout(
        problem.measured[:, 0, :],
        problem.inputs,
        P[:, None, :],
        problem.config,
        problem.dt,
        problem.envs,
    )
    with np.errstate(over="ignore", invalid="ignore"):
        costs = _costs(predicted, problem.measured, problem.diagonals)
    ok = np.all(np.isfinite(costs), axis=-1)
    values = np.where(ok, np.sum(np.where(np.isfinite(costs), costs, 0.0), axis=-1) / problem.M, problem.options.penalty)
    if with_costs:
        return values, costs, ~ok
    return values


def objective(p: KeyParams | ArrayLike, problem: FitProblem) -> float:
    """Mean trajectory cost of the dataset rolled out under ``p``."""
    return float(_objective_values(np.asarray(p, dtype=np.float64)[None], problem)[0])


def objective_details(p: KeyParams | ArrayLike, problem: FitProblem) -> tuple[float, np.ndarray, bool]:
    """
    Objective, per-trajectory costs and whether any rollout faulted.

    A faulted objective equals ``problem.options.penalty``.
    """
    values, costs, faulted = _objective_values(np.asarray(p, dtype=np.float64)[None], problem, with_costs=True)
    return float(values[0]), costs[0], bool(faulted[0])


def fd_gradient(
    fun: Callable[[np.ndarray], np.ndarray],
    p: ArrayLike,
    step: float = 1e-6,
    scheme: str = "forward",
) -> tuple[float, np.ndarray]:
    """
    Finite-difference gradient of a batched scalar function.

    Parameters
    ----------
    fun : callable
        Maps an array of shape (B, n) to values of shape (B,).
    p : array
        Point of evaluation.
    step : float
        Relative step; parameter j moves by ``step * max(1, |p_j|)``.
    scheme : {"forward", "central"}
        Difference scheme.

    Returns
    -------
    Value at ``p`` and the gradient.
    """
    p = np.asarray(p, dtype=np.float64)
    n = p.size
    h = step * np.maximum(1.0, np.abs(p))
    h = (p + h) - p
    E = np.diag(h)
    if scheme == "forward":
        F = np.asarray(fun(np.vstack([p, p + E])))
        return float(F[0]), (F[1:] - F[0]) / h
    elif scheme == "central":
        F = np.asarray(fun(np.vstack([p, p + E, p - E])))
        return float(F[0]), (F[1:n + 1] - F[n + 1:]) / (2 * h)
    raise ValueError(f"Unknown difference scheme {scheme!r}.")


def gradient_check(
    p: KeyParams | ArrayLike,
    problem: FitProblem | None = None,
    fun: Callable[[np.ndarray], np.ndarray] | None = None,
    scheme: str | None = None,
    reference_step: float = 1e-4,
) -> float:
    """
    Compare the solver's gradient against a central-difference oracle.

    Parameters
    ----------
    p : KeyParams or array
        Point of evaluation.
    problem : FitProblem, optional
        Problem whose objective and gradient settings are checked.
    fun : callable, optional
        Batched objective replacing the simulation objective.
    scheme : {"forward", "central"}, optional
        Scheme under test; the problem's solver setting by default.
    reference_step : float
        Relative step of the central-difference oracle.

    Returns
    -------
    Largest gradient discrepancy relative to the largest oracle component.
    """
    if fun is None:
        if problem is None:
            raise TypeError("Either 'problem' or 'fun' must be given.")
        fun = partial(_objective_values, problem=problem)
    options = problem.options if problem is not None else SolverOptions()
    _, g = fd_gradient(fun, p, options.fd_step, scheme or options.fd_scheme)
    _, g_ref = fd_gradient(fun, p, reference_step, "central")
    scale = max(float(np.max(np.abs(g_ref))), np.finfo(float).tiny)
    return float(np.max(np.abs(g - g_ref)) / scale)


# Lower limits of the variable scaling used inside the solver.
_SCALE_FLOOR = np.array([0.01, 100.0, 100.0, 10.0] + [0.01] * 7)


def _max_violation(c: np.ndarray) -> float:
    return float(np.max(c, initial=0.0))


def fit(problem: FitProblem, callback: Callable[[int, KeyParams, float, float], None] | None = None) -> FitResult:
    """
    Fit the key parameters to the dataset.

    Parameters
    ----------
    problem : FitProblem
        Problem definition.
    callback : callable, optional
        Called after every outer iteration as
        ``callback(outer, p, objective, max_violation)``.

    Returns
    -------
    FitResult

    Raises
    ------
    FitInfeasibleError
        If no iterate satisfies the constraints within the feasibility
        tolerance. The exception carries the result with its violation report.
    """
    opts = problem.options
    tol = opts.feasibility_tol
    fun = partial(_objective_values, problem=problem)
    cons = partial(constraint_values, cs=problem.constraints, config=problem.config)

    p0 = np.clip(problem.p_init.asarray(), problem.lower, problem.upper)
    scale = np.maximum(np.abs(p0), _SCALE_FLOOR)
    bounds = Bounds(problem.lower / scale, problem.upper / scale)

    f_init = float(fun(p0[None])[0])
    c_init = cons(p0)
    v_init = _max_violation(c_init)
    f_scale = f_init if 0 < f_init < opts.penalty else 1.0

    lam = np.zeros_like(c_init)
    mu = opts.initial_penalty
    best_p, best_f, best_v = p0, f_init, v_init
    trace = [f_init] if v_init <= tol else []
    rows = [dict(outer=0, iterations=0, objective=f_init, max_violation=v_init, penalty=mu, accepted=True)]
    total = 0
    termination = "max-iter"
    _log.info("start: objective=%.6e max_violation=%.3e", f_init, v_init)

    if v_init <= tol and f_init == 0.0:
        termination = "converged"
    else:
        z = p0 / scale
        prev_v = v_init
        for outer in range(1, opts.max_outer + 1):
            remaining = opts.max_iter - total
            if remaining <= 0:
                break

            def merit(z, lam=lam, mu=mu):
                p = z * scale
                f, g = fd_gradient(fun, p, opts.fd_step, opts.fd_scheme)
                c0, J = _constraint_jacobian(cons, p, opts.fd_step)
                shifted = np.maximum(0.0, c0 + lam / mu)
                value = f / f_scale + 0.5 * mu * np.sum(shifted**2) - np.sum(lam**2) / (2 * mu)
                grad = g / f_scale + mu * (J.T @ shifted)
                return value, grad * scale

            res = minimize(
                merit,
                z,
                jac=True,
                method="L-BFGS-B",
                bounds=bounds,
                options={"maxiter": remaining, "ftol": opts.rel_tol, "gtol": 1e-12, "maxcor": 20},
            )
            total += int(res.nit)
            z = res.x
            p = z * scale
            f = float(fun(p[None])[0])
            c = cons(p)
            v = _max_violation(c)

            if v <= tol:
                accepted = best_v > tol or f <= best_f
            else:
                accepted = best_v > tol and v < best_v
            if accepted:
                best_p, best_f, best_v = p, f, v
                if v <= tol:
                    trace.append(f)

            rows.append(dict(outer=outer, iterations=total, objective=f, max_violation=v, penalty=mu, accepted=accepted))
            _log.info(
                "outer %d: objective=%.6e max_violation=%.3e penalty=%.1e iterations=%d (%s)",
                outer, f, v, mu, total, res.message,
            )
            if callback is not None:
                callback(outer, KeyParams.from_array(p), f, v)

            lam_new = np.maximum(0.0, lam + mu * c)
            complementary = float(np.max(lam_new * np.abs(c), initial=0.0)) <= tol
            lam = lam_new
            if v > tol and v > 0.25 * prev_v:
                mu *= opts.penalty_growth
            prev_v = v

            if v <= tol and complementary and res.success:
                termination = "converged"
                break
            if _stalled(trace, opts.stall_window, opts.rel_tol):
                termination = "converged"
                break
            if total >= opts.max_iter:
                break

    final_f, costs, _ = objective_details(best_p, problem)
    violations = evaluate_constraints(best_p, problem.constraints, problem.config)
    if best_v > tol:
        termination = "infeasible"
    result = FitResult(
        p_star=KeyParams.from_array(best_p),
        objective_trace=np.asarray(trace, dtype=np.float64),
        history=pd.DataFrame(rows),
        violations=violations,
        constraint_report=constraint_report(best_p, problem.constraints, problem.config),
        trajectory_costs=costs,
        iterations=total,
        termination=termination,
        initial_objective=f_init,
        final_objective=final_f,
        multipliers=lam,
    )
    if termination == "infeasible":
        report = result.constraint_report
        worst = report.loc[report["violation"].idxmax()]
        raise FitInfeasibleError(
            f"No feasible iterate found; largest violation {best_v:.3e} in "
            f"{worst['constraint']} at {worst['grid']:.6g}.",
            result,
        )
    _log.info("%s after %d iterations: objective=%.6e", termination, total, final_f)
    return result


def _constraint_jacobian(cons, p: np.ndarray, step: float) -> tuple[np.ndarray, np.ndarray]:
    h = step * np.maximum(1.0, np.abs(p))
    h = (p + h) - p
    C = cons(np.vstack([p, p + np.diag(h)]))
    return C[0], ((C[1:] - C[0]) / h[:, None]).T


def _stalled(trace: list[float], window: int, rel_tol: float) -> bool:
    if len(trace) <= window:
        return False
    old, new = trace[-window - 1], trace[-1]
    return old - new <= rel_tol * max(abs(old), np.finfo(float).tiny)
