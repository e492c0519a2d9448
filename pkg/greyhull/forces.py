"""
External forces acting on the hull: resistance, propeller, rudder and
environment, parameterized by the eleven key parameters.

All functions accept a single state (``VesselState`` or a length-8 array) or a
stack of states whose last axis holds the channels. Parameter vectors broadcast
against the leading axes the same way.
"""

from __future__ import annotations
from dataclasses import dataclass
from typing import NamedTuple, TYPE_CHECKING, Union
import numpy as np
from numpy.typing import ArrayLike

from ._const import EPS_N, EPS_U, IU, IV, IR, IN, IDELTA, PARAM_NAMES
from ._errors import ConfigurationError

if TYPE_CHECKING:
    from .dynamics import VesselConfig, VesselState

    StateLike = Union[VesselState, np.ndarray]

__all__ = [
    "KeyParams",
    "ForceTriple",
    "EnvInput",
    "SteadyDisturbance",
    "PropellerModel",
    "resistance",
    "resistance_slope",
    "propeller_forces",
    "rudder_coefficients",
    "rudder_forces",
    "aggregate",
]


class KeyParams(NamedTuple):
    """
    The eleven fitted force-model parameters.

    p0 couples lateral propeller force to thrust, p1-p3 are the resistance
    polynomial, p4-p7 the lift-coefficient cubic and p8-p10 the
    drag-coefficient quadratic in the rudder inflow angle.
    """
    p0: float
    p1: float
    p2: float
    p3: float
    p4: float
    p5: float
    p6: float
    p7: float
    p8: float
    p9: float
    p10: float

    @classmethod
    def from_array(cls, arr: ArrayLike) -> KeyParams:
        arr = np.asarray(arr, dtype=np.float64)
        if arr.shape != (len(PARAM_NAMES),):
            raise ValueError(f"Expected {len(PARAM_NAMES)} parameters, got shape {arr.shape}.")
        if not np.all(np.isfinite(arr)):
            raise ValueError("Key parameters must be finite.")
        return cls(*(float(a) for a in arr))

    @classmethod
    def from_dict(cls, d: dict[str, float]) -> KeyParams:
        missing = [k for k in PARAM_NAMES if k not in d]
        if missing:
            raise KeyError(f"Missing parameters: {', '.join(missing)}.")
        return cls.from_array([d[k] for k in PARAM_NAMES])

    def asarray(self) -> np.ndarray:
        return np.asarray(self, dtype=np.float64)

    def replace(self, **kwargs) -> KeyParams:
        return self._replace(**kwargs)


class ForceTriple(NamedTuple):
    """Surge force X (N), sway force Y (N) and yaw moment N (N·m)."""
    X: np.ndarray | float
    Y: np.ndarray | float
    N: np.ndarray | float


@dataclass(frozen=True)
class EnvInput:
    """
    Environmental conditions at one knot.

    The base record describes calm water and contributes no force. Subclasses
    describing wind, waves or currents override :meth:`forces`.
    """

    def forces(self, state: StateLike) -> ForceTriple:
        zeros = np.zeros_like(np.asarray(state, dtype=np.float64)[..., IU])
        return ForceTriple(zeros, zeros, zeros)


@dataclass(frozen=True)
class SteadyDisturbance(EnvInput):
    """Constant body-frame force and moment."""
    X: float = 0.0
    Y: float = 0.0
    N: float = 0.0

    def forces(self, state: StateLike) -> ForceTriple:
        ones = np.ones_like(np.asarray(state, dtype=np.float64)[..., IU])
        return ForceTriple(self.X * ones, self.Y * ones, self.N * ones)


CALM = EnvInput()


@dataclass(frozen=True)
class PropellerModel:
    """
    Open-water propeller model.

    Parameters
    ----------
    D : float
        Propeller diameter (m).
    w : float
        Wake fraction, 0 <= w < 1.
    t : float
        Thrust deduction, 0 <= t < 1.
    kt0, kt1, kt2 : float
        Thrust coefficient ``K_T = kt0 + kt1 J + kt2 J^2``.
    """
    D: float
    w: float = 0.25
    t: float = 0.2
    kt0: float = 0.2931
    kt1: float = -0.2753
    kt2: float = -0.1359

    def __post_init__(self):
        if not self.D > 0:
            raise ConfigurationError(f"Propeller diameter must be positive, got {self.D}.")
        if not 0 <= self.w < 1:
            raise ConfigurationError(f"Wake fraction must be in [0, 1), got {self.w}.")
        if not 0 <= self.t < 1:
            raise ConfigurationError(f"Thrust deduction must be in [0, 1), got {self.t}.")


def _params(params: ArrayLike) -> np.ndarray:
    return np.asarray(params, dtype=np.float64)


def resistance(u: ArrayLike, params: ArrayLike) -> np.ndarray:
    """
    Hull resistance ``R(u) = p1 u + p2 u^2 + p3 u^3``.

    Negative surge speeds use the odd extension ``R(u) = -R(|u|)``.
    """
    p = _params(params)
    u = np.asarray(u, dtype=np.float64)
    au = np.abs(u)
    r = p[..., 1] * au + p[..., 2] * au**2 + p[..., 3] * au**3
    return np.where(u < 0, -r, r)


def resistance_slope(u: ArrayLike, params: ArrayLike) -> np.ndarray:
    """Derivative ``dR/du`` of :func:`resistance`."""
    p = _params(params)
    au = np.abs(np.asarray(u, dtype=np.float64))
    return p[..., 1] + 2 * p[..., 2] * au + 3 * p[..., 3] * au**2


def propeller_forces(state: StateLike, params: ArrayLike, config: VesselConfig) -> ForceTriple:
    """Thrust from the open-water model and the lateral force ``Y_n = p0 X_n``."""
    s = np.asarray(state, dtype=np.float64)
    p = _params(params)
    prop = config.prop
    u = s[..., IU]
    n_s = s[..., IN] / 60.0
    turning = np.abs(n_s) >= EPS_N
    n_safe = np.where(turning, n_s, 1.0)
    J = np.where(turning, u * (1 - prop.w) / (n_safe * prop.D), 0.0)
    kt = prop.kt0 + prop.kt1 * J + prop.kt2 * J**2
    X = (1 - prop.t) * config.rho * n_s**2 * prop.D**4 * kt * np.sign(n_s)
    Y = p[..., 0] * X
    N = config.x_P * Y
    return ForceTriple(X, Y, N)


def rudder_coefficients(a_r: ArrayLike, params: ArrayLike) -> tuple[np.ndarray, np.ndarray]:
    """Lift and drag coefficients at rudder inflow angle ``a_r`` (rad)."""
    p = _params(params)
    a = np.asarray(a_r, dtype=np.float64)
    c_L = p[..., 4] + p[..., 5] * a + p[..., 6] * a**2 + p[..., 7] * a**3
    c_D = p[..., 8] + p[..., 9] * a + p[..., 10] * a**2
    return c_L, c_D


def rudder_inflow(state: StateLike, config: VesselConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Rudder inflow geometry.

    Returns
    -------
    a_r : np.ndarray
        Inflow angle of attack, clamped to ``config.a_max``.
    beta_R : np.ndarray
        Drift angle of the flow at the rudder.
    U_R2 : np.ndarray
        Squared inflow speed.
    """
    s = np.asarray(state, dtype=np.float64)
    u = s[..., IU]
    v_R = s[..., IV] + config.x_R * s[..., IR]
    beta_R = np.arctan2(v_R, np.maximum(u, EPS_U))
    a_r = np.clip(s[..., IDELTA] - beta_R, -config.a_max, config.a_max)
    U_R2 = u**2 + v_R**2
    return a_r, beta_R, U_R2


def rudder_forces(state: StateLike, params: ArrayLike, config: VesselConfig) -> ForceTriple:
    """Rudder lift and drag resolved into body axes."""
    a_r, beta_R, U_R2 = rudder_inflow(state, config)
    c_L, c_D = rudder_coefficients(a_r, params)
    q = 0.5 * config.rho * config.A_R * U_R2
    F_L = q * c_L
    F_D = q * c_D
    cos_b = np.cos(beta_R)
    sin_b = np.sin(beta_R)
    X = -F_D * cos_b + F_L * sin_b
    Y = F_L * cos_b + F_D * sin_b
    N = config.x_R * Y
    return ForceTriple(X, Y, N)


def aggregate(
    state: StateLike,
    env: EnvInput | None,
    params: ArrayLike,
    config: VesselConfig,
) -> ForceTriple:
    """
    Total external force on the hull.

    Resistance enters the surge balance as a retarding term,
    ``-sign(u) |R(u)|``. ``env=None`` means calm water.
    """
    s = np.asarray(state, dtype=np.float64)
    env = CALM if env is None else env
    prop = propeller_forces(s, params, config)
    rud = rudder_forces(s, params, config)
    ext = env.forces(s)
    u = s[..., IU]
    drag = -np.sign(u) * np.abs(resistance(u, params))
    X = prop.X + rud.X + ext.X + drag
    Y = prop.Y + rud.Y + ext.Y
    N = prop.N + rud.N + ext.N
    return ForceTriple(X, Y, N)
