"""
Command schedules for synthetic maneuvers.

Rudder commands are produced in whole or fractional degrees and converted to
radians only when applied, so that the values written to dataset files replay
exactly.
"""

from __future__ import annotations
from dataclasses import dataclass, field
import logging
from typing import Callable, Mapping
import numpy as np
from numpy.typing import ArrayLike
from scipy.optimize import brentq

from ._const import DEFAULT_DT, DEFAULT_KNOTS, IPSI, IU
from ._errors import ConfigurationError, ScenarioError
from ._utils import wrap_angle
from .dynamics import VesselConfig, VesselState
from .forces import KeyParams, aggregate

_log = logging.getLogger(__name__)

__all__ = ["ScenarioSpec", "FAMILIES", "sample_scenarios", "equilibrium_speed"]

# Command callback: (knot index, current state) -> (c_n in rpm, c_delta in deg).
Controller = Callable[[int, np.ndarray], "tuple[float, float]"]

_REQUIRED = {
    "turning_circle": ("rpm", "rudder", "start"),
    "zigzag": ("rpm", "rudder", "heading"),
    "speed_run": ("rpm", "rpm_final", "switch"),
    "port_approach": ("rpm", "rpm_slow", "slow_at", "rudder", "turn_at", "turn_end", "rpm_astern", "stop_at"),
}

FAMILIES = tuple(_REQUIRED)
MANEUVERING = ("turning_circle", "zigzag", "port_approach")
TRANSIT = ("speed_run",)


@dataclass(frozen=True)
class ScenarioSpec:
    """
    One synthetic maneuver.

    Parameters
    ----------
    family : str
        One of ``turning_circle``, ``zigzag``, ``speed_run`` and ``port_approach``.
    params : mapping
        Schedule parameters of the family; rpm values in rpm, rudder angles and
        heading thresholds in degrees, times as knot indices. A port approach
        goes astern from ``stop_at`` until the surge speed falls to
        ``stop_speed`` (m/s, default 0.5), or to ``stop_fraction`` of the
        initial speed when given, and then stops the propeller.
    initial : VesselState
        Initial state.
    K : int
        Number of steps.
    dt : float
        Timestep (s).
    name : str
        Scenario name written to dataset files.
    """
    family: str
    params: Mapping[str, float]
    initial: VesselState = field(default_factory=VesselState)
    K: int = DEFAULT_KNOTS
    dt: float = DEFAULT_DT
    name: str = ""

    def __post_init__(self):
        if self.family not in _REQUIRED:
            raise ConfigurationError(f"Unknown scenario family {self.family!r}; choose from {', '.join(FAMILIES)}.")
        missing = [k for k in _REQUIRED[self.family] if k not in self.params]
        if missing:
            raise ConfigurationError(f"Scenario family {self.family!r} requires {', '.join(missing)}.")
        if not (isinstance(self.K, (int, np.integer)) and self.K >= 1):
            raise ConfigurationError(f"K must be a positive integer, got {self.K!r}.")
        if not self.dt > 0:
            raise ConfigurationError(f"dt must be positive, got {self.dt!r}.")
        object.__setattr__(self, "params", {k: float(v) for k, v in self.params.items()})
        object.__setattr__(self, "initial", VesselState.from_array(np.asarray(self.initial)))

    def rpm_values(self) -> list[float]:
        return [v for k, v in self.params.items() if k.startswith("rpm")] + [self.initial.n]

    def rudder_values(self) -> list[float]:
        return [self.params.get("rudder", 0.0), float(np.rad2deg(self.initial.delta))]

    def validate(self, config: VesselConfig, index: int | None = None) -> None:
        """Raise ScenarioError if any command exceeds the actuator limits."""
        n_max = config.n_max
        delta_max = float(np.rad2deg(config.delta_max))
        for rpm in self.rpm_values():
            if abs(rpm) > n_max:
                raise ScenarioError(f"propeller command {rpm} rpm exceeds the limit of {n_max} rpm", index)
        for rud in self.rudder_values():
            if abs(rud) > delta_max:
                raise ScenarioError(f"rudder command {rud} deg exceeds the limit of {delta_max:.6g} deg", index)

    def controller(self) -> Controller:
        """
        A fresh command callback.

        Zigzag and port-approach commands depend on the current state; the
        callback holds the switching memory of one run.
        """
        p = self.params
        if self.family == "turning_circle":
            def command(k, state):
                return p["rpm"], (p["rudder"] if k >= p["start"] else 0.0)

        elif self.family == "zigzag":
            psi0 = self.initial.psi
            threshold = np.deg2rad(p["heading"])
            memory = {"rudder": p["rudder"], "side": 0.0}

            def command(k, state):
                dev = float(wrap_angle(state[IPSI] - psi0))
                side = float(np.sign(dev))
                if abs(dev) >= threshold and side != memory["side"]:
                    memory["rudder"] = -memory["rudder"]
                    memory["side"] = side
                return p["rpm"], memory["rudder"]

        elif self.family == "speed_run":
            def command(k, state):
                return (p["rpm_final"] if k >= p["switch"] else p["rpm"]), p.get("rudder", 0.0)

        else:
            if "stop_fraction" in p:
                stop_speed = p["stop_fraction"] * self.initial.u
            else:
                stop_speed = p.get("stop_speed", 0.5)
            memory = {"stopped": False}

            def command(k, state):
                if k < p["slow_at"]:
                    rpm = p["rpm"]
                elif k < p["stop_at"]:
                    rpm = p["rpm_slow"]
                elif memory["stopped"] or state[IU] <= stop_speed:
                    memory["stopped"] = True
                    rpm = 0.0
                else:
                    rpm = p["rpm_astern"]
                rudder = p["rudder"] if p["turn_at"] <= k < p["turn_end"] else 0.0
                return rpm, rudder

        return command


def _surge_force(u: float, n: float, params: ArrayLike, config: VesselConfig) -> float:
    s = VesselState(u=u, n=n).asarray()
    return float(aggregate(s, None, params, config).X)


def equilibrium_speed(n: float, params: KeyParams | ArrayLike, config: VesselConfig) -> float:
    """
    Steady straight-running surge speed at ``n`` rpm with the rudder amidships.
    """
    if n == 0:
        return 0.0
    p = np.asarray(params, dtype=np.float64)
    direction = float(np.sign(n))
    bound = direction
    for _ in range(64):
        if direction * _surge_force(bound, n, p, config) < 0:
            break
        bound *= 2.0
    else:
        raise ConfigurationError(f"No equilibrium speed found at {n} rpm.")
    lo, hi = sorted((0.0, bound))
    return float(brentq(_surge_force, lo, hi, args=(n, p, config), xtol=1e-12))


def _sample_one(
    family: str,
    rng: np.random.Generator,
    n_max: float,
    rudder_max: float,
    K: int,
) -> dict[str, float]:
    def rpm(lo: float, hi: float) -> float:
        return round(float(rng.uniform(lo, hi)) * n_max, 1)

    def rudder(lo: int, hi: int) -> float:
        hi = min(hi, int(rudder_max))
        return float(rng.integers(lo, hi + 1)) * float(rng.choice([-1.0, 1.0]))

    if family == "turning_circle":
        return dict(rpm=rpm(0.4, 0.95), rudder=rudder(15, 35), start=float(rng.integers(5, 20)))
    elif family == "zigzag":
        amp = abs(rudder(10, 20))
        return dict(rpm=rpm(0.4, 0.95), rudder=amp * float(rng.choice([-1.0, 1.0])), heading=amp)
    elif family == "speed_run":
        # one low and one high setting, in either order
        settings = [rpm(0.1, 0.5), rpm(0.5, 0.95)]
        if rng.random() < 0.5:
            settings.reverse()
        return dict(
            rpm=settings[0],
            rpm_final=settings[1],
            switch=float(rng.integers(K // 4, K // 2)),
            rudder=float(rng.integers(-2, 3)),
        )
    slow_at = int(rng.integers(5, 15))
    turn_at = slow_at + int(rng.integers(0, 10))
    return dict(
        rpm=rpm(0.5, 0.9),
        rpm_slow=rpm(0.15, 0.35),
        slow_at=float(slow_at),
        rudder=rudder(10, 30),
        turn_at=float(turn_at),
        turn_end=float(turn_at + int(rng.integers(15, 40))),
        rpm_astern=-rpm(0.3, 0.6),
        stop_at=float(slow_at + int(rng.integers(15, 25))),
        stop_fraction=round(float(rng.uniform(0.75, 0.9)), 2),
    )


def sample_scenarios(
    count: int,
    config: VesselConfig,
    params: KeyParams | ArrayLike,
    rng: np.random.Generator | int | None = None,
    maneuvering_weight: float = 0.7,
    K: int = DEFAULT_KNOTS,
    dt: float = DEFAULT_DT,
    rudder_max: float | None = None,
) -> list[ScenarioSpec]:
    """
    Draw a mix of maneuvering and transit scenarios.

    Maneuvering scenarios (turning circles, zigzags and port approaches) are
    drawn with probability ``maneuvering_weight``, straight speed runs
    otherwise. Every scenario starts in steady straight running at its
    initial rpm under ``params`` with a random heading.

    Parameters
    ----------
    count : int
        Number of scenarios.
    config : VesselConfig
        The vessel; its actuator limits bound the commands.
    params : KeyParams or array
        Parameters used to find the initial steady speed.
    rng : Generator or int, optional
        Random generator or seed.
    maneuvering_weight : float
        Probability of a maneuvering scenario.
    K, dt : int, float
        Length and timestep of every scenario.
    rudder_max : float, optional
        Largest rudder command in degrees; the vessel limit by default.
    """
    if count < 1:
        raise ConfigurationError(f"count must be positive, got {count}.")
    if not 0 <= maneuvering_weight <= 1:
        raise ConfigurationError(f"maneuvering_weight must be in [0, 1], got {maneuvering_weight}.")
    rng = np.random.default_rng(rng)
    limit = float(np.rad2deg(config.delta_max))
    rudder_max = limit if rudder_max is None else min(rudder_max, limit)

    specs = []
    for i in range(count):
        if rng.random() < maneuvering_weight:
            family = MANEUVERING[int(rng.integers(len(MANEUVERING)))]
        else:
            family = TRANSIT[int(rng.integers(len(TRANSIT)))]
        params_i = _sample_one(family, rng, config.n_max, rudder_max, K)
        psi0 = float(rng.uniform(-np.pi, np.pi))
        u0 = equilibrium_speed(params_i["rpm"], params, config)
        initial = VesselState(psi=psi0, u=u0, n=params_i["rpm"])
        specs.append(ScenarioSpec(family, params_i, initial, K, dt, name=f"s{i:03d}-{family}"))
        _log.debug("scenario %d: %s %s", i, family, params_i)
    return specs
