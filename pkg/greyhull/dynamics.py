"""
Three degree-of-freedom equations of motion and explicit-Euler rollouts.
"""

from __future__ import annotations
from dataclasses import dataclass, field, fields, replace
from functools import cached_property
from typing import NamedTuple, Sequence, Union
import numpy as np
from numpy.typing import ArrayLike

from ._const import (
    A_MAX,
    DEFAULT_DT,
    EPS_DET,
    EPS_U,
    IPSI,
    IR,
    IU,
    IV,
    IN,
    IDELTA,
    STATE_CHANNELS,
)
from ._errors import ConfigurationError, SimulationFault
from ._utils import clamp_toward, wrap_angle
from .forces import CALM, EnvInput, ForceTriple, KeyParams, PropellerModel, aggregate

__all__ = [
    "VesselState",
    "ControlInput",
    "HydroCoefficients",
    "VesselConfig",
    "Trajectory",
    "solve_accelerations",
    "step",
    "simulate",
    "rollout",
]


class VesselState(NamedTuple):
    """
    Vessel state ``[x, y, psi, u, v, r, n, delta]``.

    Positions in m, heading in rad, body velocities in m/s and rad/s,
    propeller revolutions in rpm and rudder angle in rad.
    """
    x: float = 0.0
    y: float = 0.0
    psi: float = 0.0
    u: float = 0.0
    v: float = 0.0
    r: float = 0.0
    n: float = 0.0
    delta: float = 0.0

    @classmethod
    def from_array(cls, arr: ArrayLike) -> VesselState:
        arr = np.asarray(arr, dtype=np.float64)
        if arr.shape != (len(STATE_CHANNELS),):
            raise ValueError(f"Expected a state of {len(STATE_CHANNELS)} channels, got shape {arr.shape}.")
        return cls(*(float(a) for a in arr))

    def asarray(self) -> np.ndarray:
        return np.asarray(self, dtype=np.float64)


class ControlInput(NamedTuple):
    """Commanded propeller revolutions (rpm) and rudder angle (rad)."""
    c_n: float = 0.0
    c_delta: float = 0.0


StateLike = Union[VesselState, np.ndarray]


@dataclass(frozen=True)
class HydroCoefficients:
    """
    Mass properties and maneuvering coefficients of the hull.

    All values are dimensional (SI) and multiply the velocity products they
    appear with in the equations of motion.
    """
    m: float
    I_zz: float
    x_G: float
    X_udot: float
    Y_vdot: float
    Y_rdot: float
    N_vdot: float
    N_rdot: float
    X_vr: float
    Y_v: float
    Y_r: float
    N_v: float
    N_r: float
    Y_vv: float
    Y_vr: float
    Y_rr: float
    N_rr: float
    N_rrv: float
    N_vvr: float

    def __post_init__(self):
        for f in fields(self):
            if not np.isfinite(getattr(self, f.name)):
                raise ConfigurationError(f"Hydrodynamic coefficient {f.name} is not finite.")
        if not self.m - self.X_udot > 0:
            raise ConfigurationError("Effective surge mass m - X_udot must be positive.")
        if not self.m - self.Y_vdot > 0:
            raise ConfigurationError("Effective sway mass m - Y_vdot must be positive.")
        if not self.I_zz - self.N_rdot > 0:
            raise ConfigurationError("Effective yaw inertia I_zz - N_rdot must be positive.")
        M = self.sway_yaw_matrix
        det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
        floor = EPS_DET * (self.m - self.Y_vdot) * (self.I_zz - self.N_rdot)
        if not abs(det) > floor:
            raise ConfigurationError(f"Sway/yaw inertia matrix is singular (det={det:.3e}).")

    @classmethod
    def from_nondimensional(
        cls,
        *,
        L: float,
        d: float,
        rho: float,
        m: float,
        I_zz: float,
        x_G: float,
        **primes: float,
    ) -> HydroCoefficients:
        """
        Scale non-dimensional maneuvering coefficients.

        Parameters
        ----------
        L, d : float
            Ship length and draught (m).
        rho : float
            Water density (kg/m^3).
        m, I_zz, x_G : float
            Dimensional mass, yaw inertia and CoG offset.
        **primes
            Non-dimensional coefficients keyed by the field names of this
            class, e.g. ``Y_v=-0.31``. Forces are scaled by ``rho L d / 2``
            times the power of L that matches the velocity product.
        """
        powers = {
            "X_udot": 2, "Y_vdot": 2, "Y_rdot": 3, "N_vdot": 3, "N_rdot": 4,
            "X_vr": 2, "Y_v": 1, "Y_r": 2, "N_v": 2, "N_r": 3,
            "Y_vv": 1, "Y_vr": 2, "Y_rr": 3, "N_rr": 4, "N_rrv": 4, "N_vvr": 3,
        }
        unknown = set(primes) - set(powers)
        if unknown:
            raise TypeError(f"Unknown coefficients: {', '.join(sorted(unknown))}.")
        missing = set(powers) - set(primes)
        if missing:
            raise TypeError(f"Missing coefficients: {', '.join(sorted(missing))}.")
        half = 0.5 * rho * d
        dims = {k: primes[k] * half * L**powers[k] for k in powers}
        return cls(m=m, I_zz=I_zz, x_G=x_G, **dims)

    @property
    def sway_yaw_matrix(self) -> np.ndarray:
        return np.array([
            [self.m - self.Y_vdot, self.m * self.x_G - self.Y_rdot],
            [self.m * self.x_G - self.N_vdot, self.I_zz - self.N_rdot],
        ])

    @cached_property
    def sway_yaw_inverse(self) -> np.ndarray:
        M = self.sway_yaw_matrix
        det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
        return np.array([[M[1, 1], -M[0, 1]], [-M[1, 0], M[0, 0]]]) / det


@dataclass(frozen=True)
class VesselConfig:
    """
    Everything about a vessel that is not fitted.

    Angles are in rad, rates in rad/s and rpm/s. ``x_R`` and ``x_P`` are
    negative aft of midship.
    """
    hydro: HydroCoefficients
    L: float
    A_R: float
    x_R: float
    x_P: float
    prop: PropellerModel
    delta_max: float
    n_max: float
    delta_rate: float = float(np.deg2rad(2.32))
    n_rate: float = 10.0
    rho: float = 1025.0
    a_max: float = A_MAX
    dt: float = DEFAULT_DT

    def __post_init__(self):
        for name in ("L", "rho", "A_R", "delta_rate", "n_rate", "delta_max", "n_max", "a_max", "dt"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ConfigurationError(f"{name} must be positive and finite, got {value!r}.")

    def replace(self, **kwargs) -> VesselConfig:
        return replace(self, **kwargs)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """
    ``K + 1`` states and the ``K`` control inputs that produced them.

    ``states`` has shape ``(K + 1, 8)`` and ``inputs`` shape ``(K, 2)``, both in
    internal units (rad).
    """
    states: np.ndarray
    inputs: np.ndarray
    dt: float
    name: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        states = np.asarray(self.states, dtype=np.float64)
        inputs = np.asarray(self.inputs, dtype=np.float64)
        if states.ndim != 2 or states.shape[1] != len(STATE_CHANNELS):
            raise ValueError(f"states must have shape (K+1, 8), got {states.shape}.")
        if inputs.ndim != 2 or inputs.shape[1] != 2:
            raise ValueError(f"inputs must have shape (K, 2), got {inputs.shape}.")
        if states.shape[0] != inputs.shape[0] + 1:
            raise ValueError(
                f"Expected {inputs.shape[0] + 1} states for {inputs.shape[0]} inputs, "
                f"got {states.shape[0]}."
            )
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}.")
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "inputs", inputs)

    def __len__(self) -> int:
        return self.states.shape[0]

    @property
    def K(self) -> int:
        return self.inputs.shape[0]

    @property
    def time(self) -> np.ndarray:
        return np.arange(self.K + 1) * self.dt

    @property
    def initial(self) -> VesselState:
        return VesselState.from_array(self.states[0])

    def state(self, k: int) -> VesselState:
        return VesselState.from_array(self.states[k])

    def channel(self, name: str) -> np.ndarray:
        return self.states[:, STATE_CHANNELS.index(name)]

    @cached_property
    def path_length(self) -> float:
        """Cartesian length of the track."""
        steps = np.diff(self.states[:, :2], axis=0)
        return float(np.sum(np.hypot(steps[:, 0], steps[:, 1])))

    @cached_property
    def mean_speed(self) -> float:
        return float(np.mean(np.hypot(self.states[:, IU], self.states[:, IV])))

    def with_states(self, states: np.ndarray) -> Trajectory:
        return Trajectory(states, self.inputs, self.dt, self.name, dict(self.meta))


def _accelerations(s: np.ndarray, forces: ForceTriple, h: HydroCoefficients):
    u = s[..., IU]
    v = s[..., IV]
    r = s[..., IR]
    U = np.hypot(u, v)
    moving = U >= EPS_U
    U_safe = np.where(moving, U, 1.0)
    rrv = np.where(moving, r * r * v / U_safe, 0.0)
    vvr = np.where(moving, v * v * r / U_safe, 0.0)

    X, Y, N = forces
    u_dot = (
        X - (h.Y_vdot - h.X_vr - h.m) * v * r - (h.Y_rdot - h.m * h.x_G) * r**2
    ) / (h.m - h.X_udot)
    rhs_Y = Y - (
        -h.Y_v * U * v
        + (h.m * u - h.Y_r * U) * r
        - h.Y_vv * v * np.abs(v)
        - h.Y_vr * v * np.abs(r)
        - h.Y_rr * r * np.abs(r)
    )
    rhs_N = N - (
        -h.N_v * U * v
        + (h.m * h.x_G * u - h.N_r * U) * r
        - h.N_rr * r * np.abs(r)
        - h.N_rrv * rrv
        - h.N_vvr * vvr
    )
    inv = h.sway_yaw_inverse
    v_dot = inv[0, 0] * rhs_Y + inv[0, 1] * rhs_N
    r_dot = inv[1, 0] * rhs_Y + inv[1, 1] * rhs_N
    return u_dot, v_dot, r_dot


def solve_accelerations(
    state: StateLike,
    total_forces: ForceTriple,
    hydro: HydroCoefficients,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Body accelerations ``(u_dot, v_dot, r_dot)`` from the equations of motion.

    The surge row is solved as a scalar after moving its centripetal terms to
    the right-hand side; sway and yaw are solved together through the 2x2
    inertia matrix.
    """
    s = np.asarray(state, dtype=np.float64)
    forces = ForceTriple(*(np.asarray(f, dtype=np.float64) for f in total_forces))
    if not (np.all(np.isfinite(s)) and all(np.all(np.isfinite(f)) for f in forces)):
        raise SimulationFault("non-finite state or force passed to the equations of motion")
    return _accelerations(s, forces, hydro)


def _advance(
    s: np.ndarray,
    c: np.ndarray,
    env: EnvInput | None,
    params: np.ndarray,
    config: VesselConfig,
    dt: float,
) -> np.ndarray:
    forces = aggregate(s, env, params, config)
    u_dot, v_dot, r_dot = _accelerations(s, forces, config.hydro)
    psi = s[..., IPSI]
    u = s[..., IU]
    v = s[..., IV]
    r = s[..., IR]
    cos_psi = np.cos(psi)
    sin_psi = np.sin(psi)
    n_new = np.clip(
        clamp_toward(s[..., IN], c[..., 0], config.n_rate * dt),
        -config.n_max, config.n_max,
    )
    delta_new = np.clip(
        clamp_toward(s[..., IDELTA], c[..., 1], config.delta_rate * dt),
        -config.delta_max, config.delta_max,
    )
    return np.stack(
        [
            s[..., 0] + dt * (u * cos_psi - v * sin_psi),
            s[..., 1] + dt * (u * sin_psi + v * cos_psi),
            wrap_angle(psi + dt * r),
            u + dt * u_dot,
            v + dt * v_dot,
            r + dt * r_dot,
            n_new,
            delta_new,
        ],
        axis=-1,
    )


def step(
    state: StateLike,
    input: ControlInput | ArrayLike,
    env: EnvInput | None,
    params: KeyParams | ArrayLike,
    config: VesselConfig,
    dt: float | None = None,
) -> VesselState | np.ndarray:
    """
    Advance the vessel by one explicit-Euler step.

    Parameters
    ----------
    state : VesselState or array
        Current state, or a stack of states.
    input : ControlInput or array
        Actuator commands.
    env : EnvInput or None
        Environmental conditions. None means calm water.
    params : KeyParams or array
        Force-model parameters.
    config : VesselConfig
        Vessel configuration.
    dt : float, optional
        Timestep, ``config.dt`` by default.

    Returns
    -------
    VesselState for a single state, array for a stack.
    """
    dt = config.dt if dt is None else dt
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}.")
    s = np.asarray(state, dtype=np.float64)
    if not np.all(np.isfinite(s)):
        raise SimulationFault("non-finite state")
    with np.errstate(all="ignore"):
        out = _advance(
            s,
            np.asarray(input, dtype=np.float64),
            env,
            np.asarray(params, dtype=np.float64),
            config,
            dt,
        )
    if not np.all(np.isfinite(out)):
        raise SimulationFault("state became non-finite")
    if out.ndim == 1:
        return VesselState.from_array(out)
    return out


def rollout(
    initial: ArrayLike,
    inputs: ArrayLike,
    params: ArrayLike,
    config: VesselConfig,
    dt: float | None = None,
    envs: Sequence[EnvInput] | None = None,
) -> np.ndarray:
    """
    Vectorised rollout of one or many trajectories.

    Parameters
    ----------
    initial : array, shape (..., 8)
        Initial states.
    inputs : array, shape (..., K, 2)
        Command sequences.
    params : array, shape (..., 11)
        Parameter vectors, broadcast against the leading axes of ``initial``.
    config : VesselConfig
        Vessel configuration.
    dt : float, optional
        Timestep, ``config.dt`` by default.
    envs : sequence of EnvInput, optional
        One environment per step, shared by every trajectory.

    Returns
    -------
    np.ndarray of shape (..., K + 1, 8). Faulted trajectories contain
    non-finite values from the faulting step on; no exception is raised.
    """
    dt = config.dt if dt is None else dt
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}.")
    s = np.asarray(initial, dtype=np.float64)
    c = np.asarray(inputs, dtype=np.float64)
    p = np.asarray(params, dtype=np.float64)
    K = c.shape[-2]
    if envs is not None and len(envs) != K:
        raise ValueError(f"Expected {K} environment records, got {len(envs)}.")
    lead = np.broadcast_shapes(s.shape[:-1], c.shape[:-2], p.shape[:-1])
    s = np.broadcast_to(s, lead + s.shape[-1:])
    out = np.empty(lead + (K + 1, s.shape[-1]))
    out[..., 0, :] = s
    with np.errstate(all="ignore"):
        for k in range(K):
            env = CALM if envs is None else envs[k]
            out[..., k + 1, :] = _advance(out[..., k, :], c[..., k, :], env, p, config, dt)
    return out


def simulate(
    initial: StateLike,
    inputs: Sequence[ControlInput] | ArrayLike,
    envs: Sequence[EnvInput] | None,
    params: KeyParams | ArrayLike,
    config: VesselConfig,
    dt: float | None = None,
    name: str = "",
) -> Trajectory:
    """
    Generate a trajectory from an initial state and a command sequence.

    Raises
    ------
    SimulationFault
        If any step produces a non-finite state; ``step`` holds its index.
    """
    dt = config.dt if dt is None else dt
    s0 = np.asarray(initial, dtype=np.float64)
    c = np.asarray(inputs, dtype=np.float64)
    if s0.shape != (len(STATE_CHANNELS),):
        raise ValueError(f"initial must be a single state, got shape {s0.shape}.")
    if c.ndim != 2 or c.shape[1] != 2 or c.shape[0] < 1:
        raise ValueError(f"inputs must have shape (K, 2) with K >= 1, got {c.shape}.")
    if not np.all(np.isfinite(s0)):
        raise SimulationFault("non-finite initial state", step=0)
    states = rollout(s0, c, np.asarray(params, dtype=np.float64), config, dt, envs)
    finite = np.all(np.isfinite(states), axis=-1)
    if not np.all(finite):
        k = int(np.argmin(finite)) - 1
        raise SimulationFault("state became non-finite", step=k)
    return Trajectory(states, c, dt, name)
