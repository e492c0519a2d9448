"""
Vessel presets for the two reference container feeders.

Each preset bundles the vessel configuration, the baseline and fitted key
parameters, the starting point used for fitting and the statistics envelope
of the training data.
"""

from __future__ import annotations
from dataclasses import dataclass
from typing import Callable, NamedTuple
import numpy as np
import pandas as pd

from ._const import A_MAX, PARAM_NAMES
from ._errors import ConfigurationError
from .dynamics import HydroCoefficients, VesselConfig
from .forces import KeyParams, PropellerModel
from .identification import ConstraintSet

__all__ = ["Envelope", "VesselPreset", "get_preset", "PRESETS", "ship_a", "ship_b"]


class Bounds3(NamedTuple):
    min: float
    mean: float
    max: float


ENVELOPE_CHANNELS = ("u", "v", "r", "n", "delta")


@dataclass(frozen=True)
class Envelope:
    """
    Minimum, mean and maximum of the training data per channel.

    ``delta`` is in degrees, the other channels in their state units.
    """
    u: Bounds3
    v: Bounds3
    r: Bounds3
    n: Bounds3
    delta: Bounds3

    def __post_init__(self):
        for ch in ENVELOPE_CHANNELS:
            b = Bounds3(*getattr(self, ch))
            if not b.min <= b.mean <= b.max:
                raise ConfigurationError(f"Envelope of {ch!r} must satisfy min <= mean <= max, got {tuple(b)}.")
            object.__setattr__(self, ch, b)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [tuple(getattr(self, ch)) for ch in ENVELOPE_CHANNELS],
            index=pd.Index(ENVELOPE_CHANNELS, name="channel"),
            columns=["min", "mean", "max"],
        )

    def excursions(self, stats: pd.DataFrame, atol: float = 1e-9) -> list[str]:
        """
        Channels of ``stats`` whose range leaves the envelope.

        ``stats`` is indexed by channel with ``min`` and ``max`` columns, as
        returned by :meth:`greyhull.workbench.Dataset.statistics`.
        """
        out = []
        for ch in ENVELOPE_CHANNELS:
            if ch not in stats.index:
                continue
            b = getattr(self, ch)
            lo, hi = stats.loc[ch, "min"], stats.loc[ch, "max"]
            if lo < b.min - atol or hi > b.max + atol:
                out.append(f"{ch} in [{lo:.4g}, {hi:.4g}] outside [{b.min:.4g}, {b.max:.4g}]")
        return out


@dataclass(frozen=True)
class VesselPreset:
    """
    A named vessel with its reference parameter sets.

    Parameters
    ----------
    name : str
        Preset name.
    config : VesselConfig
        Vessel configuration.
    baseline : KeyParams
        Parameters from conventional marine-engineering practice.
    fitted : KeyParams
        Reference fitted parameters, used as synthetic truth.
    initial_guess : KeyParams
        Published starting point of the fit.
    envelope : Envelope
        Statistics envelope of the training data.
    constraints : ConstraintSet
        Constraints with vessel-specific bounds.
    """
    name: str
    config: VesselConfig
    baseline: KeyParams
    fitted: KeyParams
    initial_guess: KeyParams
    envelope: Envelope
    constraints: ConstraintSet | None = None

    def __post_init__(self):
        if self.constraints is None:
            object.__setattr__(self, "constraints", ConstraintSet.default(u_max=self.envelope.u.max))

    def params(self, selector: str) -> KeyParams:
        """Parameter set by name: ``baseline``, ``fitted`` (or ``truth``) and ``initial``."""
        if selector == "baseline":
            return self.baseline
        elif selector in ("fitted", "truth"):
            return self.fitted
        elif selector == "initial":
            return self.initial_guess
        raise KeyError(f"Unknown parameter set {selector!r}.")

    def replace(self, **kwargs) -> VesselPreset:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d.update(kwargs)
        return VesselPreset(**d)


def reorder_published_guess(values) -> KeyParams:
    """
    Convert a starting point listed as ``[p1, p2, p3, p0, p4, ..., p10]`` to
    :class:`KeyParams`.
    """
    values = list(values)
    if len(values) != len(PARAM_NAMES):
        raise ValueError(f"Expected {len(PARAM_NAMES)} values, got {len(values)}.")
    return KeyParams.from_array([values[3], *values[:3], *values[4:]])


# Non-dimensional maneuvering coefficients shared by both hulls.
_PRIMES = dict(
    X_udot=-0.012,
    Y_vdot=-0.16,
    Y_rdot=-0.008,
    N_vdot=-0.006,
    N_rdot=-0.009,
    X_vr=0.002,
    Y_v=-0.31,
    Y_r=0.08,
    N_v=-0.10,
    N_r=-0.05,
    Y_vv=-1.2,
    Y_vr=-0.4,
    Y_rr=0.008,
    N_rr=-0.012,
    N_rrv=0.055,
    N_vvr=-0.29,
)

_RUDDER_BASELINE = [-0.012, 0.864, 0.182, -1.191, 0.005, -0.1230, 0.779]


def _hull(L: float, B: float, d: float, Cb: float, x_G: float, rho: float = 1025.0) -> HydroCoefficients:
    m = rho * L * B * d * Cb
    I_zz = m * (0.25 * L) ** 2
    return HydroCoefficients.from_nondimensional(L=L, d=d, rho=rho, m=m, I_zz=I_zz, x_G=x_G, **_PRIMES)


def ship_a() -> VesselPreset:
    """1750 DWT feeder, 85 m."""
    config = VesselConfig(
        hydro=_hull(L=85.0, B=13.6, d=4.6, Cb=0.68, x_G=1.2),
        L=85.0,
        A_R=12.0,
        x_R=-42.0,
        x_P=-40.0,
        prop=PropellerModel(D=3.5),
        delta_max=float(np.deg2rad(35.0)),
        n_max=249.4,
    )
    envelope = Envelope(
        u=(-4.47, 3.27, 8.23),
        v=(-2.05, -0.02, 1.76),
        r=(-0.03, 0.0, 0.03),
        n=(-249.1, 95.0, 249.4),
        delta=(-32.5, 1.2, 33.5),
    )
    return VesselPreset(
        name="shipA",
        config=config,
        baseline=KeyParams.from_array([0.0, 10500.0, -1900.0, 346.0, *_RUDDER_BASELINE]),
        fitted=KeyParams.from_array(
            [-0.017, 34187.0, -12568.0, 1594.0, -0.039, 3.193, 0.205, -4.882, 0.048, 0.0746, 1.370]
        ),
        initial_guess=reorder_published_guess(
            [34187.03, -12569.98, 1586.29, 0.00, -0.02, 2.70, 0.42, -3.23, 0.06, -0.11, 1.97]
        ),
        envelope=envelope,
        constraints=ConstraintSet.default(u_max=envelope.u.max, a_max=A_MAX, resistance_max=3.5e5, lift_max=1.005),
    )


def ship_b() -> VesselPreset:
    """8000 DWT feeder, 130 m."""
    config = VesselConfig(
        hydro=_hull(L=130.0, B=20.0, d=7.5, Cb=0.65, x_G=1.0),
        L=130.0,
        A_R=22.0,
        x_R=-64.0,
        x_P=-62.0,
        prop=PropellerModel(D=3.5),
        delta_max=float(np.deg2rad(40.0)),
        n_max=169.7,
    )
    envelope = Envelope(
        u=(-0.47, 3.83, 6.17),
        v=(-1.04, 0.04, 1.03),
        r=(-0.02, 0.0, 0.02),
        n=(-158.8, 93.3, 169.7),
        delta=(-40.0, -1.0, 40.0),
    )
    return VesselPreset(
        name="shipB",
        config=config,
        baseline=KeyParams.from_array([0.0, 5669.0, -1127.0, 538.0, *_RUDDER_BASELINE]),
        fitted=KeyParams.from_array(
            [-0.027, 5505.0, -4215.0, 1077.0, 0.012, 2.420, -0.019, -3.195, 0.047, 0.0001, 1.359]
        ),
        initial_guess=reorder_published_guess(
            [5504.65, -4218.06, 1063.42, -0.05, -0.01, 2.73, 0.35, -3.10, 0.06, -0.11, 1.97]
        ),
        envelope=envelope,
        constraints=ConstraintSet.default(u_max=envelope.u.max, a_max=A_MAX, resistance_max=1.5e5),
    )


PRESETS: dict[str, Callable[[], VesselPreset]] = {
    "shipA": ship_a,
    "shipB": ship_b,
}


def get_preset(name: str) -> VesselPreset:
    """Build a preset by name."""
    try:
        factory = PRESETS[name]
    except KeyError:
        raise ConfigurationError(
            f"Unknown vessel preset {name!r}; choose from {', '.join(PRESETS)}."
        ) from None
    return factory()


def parameter_table(**rows: KeyParams) -> pd.DataFrame:
    """Parameter sets side by side, one row per set, e.g. ``baseline=..., fitted=...``."""
    return pd.DataFrame(
        [tuple(p) for p in rows.values()],
        index=pd.Index(list(rows), name="set"),
        columns=list(PARAM_NAMES),
    )
