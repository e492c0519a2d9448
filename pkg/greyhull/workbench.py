"""
Synthetic datasets, train/test splits and the workbench configuration.
"""

from __future__ import annotations
from dataclasses import dataclass, field, fields, replace
from functools import cached_property
import logging
from typing import Any, Iterator, Mapping, Sequence
import warnings
import numpy as np
import pandas as pd

from ._const import (
    DEFAULT_DT,
    DEFAULT_KNOTS,
    FILE_UNITS,
    INPUT_CHANNELS,
    PARAM_NAMES,
    R_MAX,
    STATE_CHANNELS,
    TEST_FRACTION,
)
from ._errors import ConfigurationError, ScenarioError, SimulationFault
from .dynamics import HydroCoefficients, Trajectory, VesselConfig, rollout, step
from .forces import KeyParams, PropellerModel, resistance, rudder_coefficients
from .identification import ConstraintSet, SolverOptions
from .presets import VesselPreset, get_preset
from .scenarios import ScenarioSpec, sample_scenarios

_log = logging.getLogger(__name__)

__all__ = [
    "Dataset",
    "WorkbenchConfig",
    "generate_dataset",
    "split_indices",
    "resolve_commands",
    "sample_curves",
    "track_frame",
    "overlay_frame",
]

FRAME_COLUMNS = ("trajectory", "k") + STATE_CHANNELS + INPUT_CHANNELS
_DEGREE_STATE = STATE_CHANNELS.index("delta")


class Dataset:
    """
    Measured trajectories together with their file header.

    The dataset keeps its rows in file units (rudder angles in degrees) and
    derives the trajectories in internal units from them, so writing a dataset
    that was read reproduces the file byte for byte.

    Parameters
    ----------
    frame : pd.DataFrame
        One row per knot with columns ``trajectory, k, x, y, psi, u, v, r, n,
        delta, c_n, c_delta``. Inputs of the last knot of each trajectory are
        NaN.
    header : dict
        File header; must hold ``dt``.
    """
    def __init__(self, frame: pd.DataFrame, header: Mapping[str, Any]):
        missing = [c for c in FRAME_COLUMNS if c not in frame.columns]
        if missing:
            raise ValueError(f"Dataset frame lacks columns {', '.join(missing)}.")
        if "dt" not in header:
            raise ValueError("Dataset header must define 'dt'.")
        self._frame = frame.loc[:, list(FRAME_COLUMNS)].reset_index(drop=True)
        self._header = dict(header)

    @classmethod
    def from_trajectories(
        cls,
        trajectories: Sequence[Trajectory],
        header: Mapping[str, Any] | None = None,
        rudder_commands_deg: Sequence[np.ndarray] | None = None,
    ) -> Dataset:
        """
        Build a dataset from trajectories in internal units.

        ``rudder_commands_deg`` supplies the rudder commands in degrees
        exactly as they were generated; otherwise they are converted from
        radians.
        """
        trajectories = list(trajectories)
        if len(trajectories) == 0:
            raise ValueError("A dataset needs at least one trajectory.")
        dts = {t.dt for t in trajectories}
        if len(dts) != 1:
            raise ValueError(f"All trajectories must share one timestep, got {sorted(dts)}.")
        names = [t.name or f"trajectory-{i}" for i, t in enumerate(trajectories)]
        if len(set(names)) != len(names):
            raise ValueError("Trajectory names must be unique within a dataset.")
        frames = []
        for i, t in enumerate(trajectories):
            states = t.states.copy()
            states[:, _DEGREE_STATE] = np.rad2deg(states[:, _DEGREE_STATE])
            inputs = np.full((len(t), len(INPUT_CHANNELS)), np.nan)
            inputs[:-1, 0] = t.inputs[:, 0]
            if rudder_commands_deg is None:
                inputs[:-1, 1] = np.rad2deg(t.inputs[:, 1])
            else:
                inputs[:-1, 1] = rudder_commands_deg[i]
            df = pd.DataFrame(np.hstack([states, inputs]), columns=list(STATE_CHANNELS + INPUT_CHANNELS))
            df.insert(0, "k", np.arange(len(t), dtype=np.int64))
            df.insert(0, "trajectory", names[i])
            frames.append(df)
        header = dict(header or {})
        header.setdefault("dt", float(trajectories[0].dt))
        header.setdefault("K", int(trajectories[0].K))
        header["M"] = len(trajectories)
        header.setdefault("units", dict(FILE_UNITS))
        return cls(pd.concat(frames, ignore_index=True), header)

    @property
    def frame(self) -> pd.DataFrame:
        return self._frame

    @property
    def header(self) -> dict[str, Any]:
        return self._header

    @property
    def dt(self) -> float:
        return float(self._header["dt"])

    @cached_property
    def trajectories(self) -> list[Trajectory]:
        out = []
        for name, df in self._frame.groupby("trajectory", sort=False):
            values = df[list(STATE_CHANNELS)].to_numpy(dtype=np.float64, copy=True)
            values[:, _DEGREE_STATE] = np.deg2rad(values[:, _DEGREE_STATE])
            inputs = df[list(INPUT_CHANNELS)].to_numpy(dtype=np.float64, copy=True)[:-1]
            inputs[:, 1] = np.deg2rad(inputs[:, 1])
            out.append(Trajectory(values, inputs, self.dt, name=str(name)))
        return out

    @property
    def names(self) -> list[str]:
        return [t.name for t in self.trajectories]

    def __len__(self) -> int:
        return len(self.trajectories)

    def __getitem__(self, i: int) -> Trajectory:
        return self.trajectories[i]

    def __iter__(self) -> Iterator[Trajectory]:
        return iter(self.trajectories)

    def __repr__(self) -> str:
        vessel = self._header.get("vessel", "?")
        return f"{self.__class__.__name__}(vessel={vessel!r}, M={len(self)}, dt={self.dt})"

    def subset(self, indices: Sequence[int]) -> list[Trajectory]:
        return [self.trajectories[i] for i in indices]

    def split(self, test_fraction: float = TEST_FRACTION, seed: int = 0) -> tuple[list[Trajectory], list[Trajectory]]:
        """Seeded train/test split, see :func:`split_indices`."""
        train, test = split_indices(len(self), test_fraction, seed)
        return self.subset(train), self.subset(test)

    def statistics(self, indices: Sequence[int] | None = None) -> pd.DataFrame:
        """
        Minimum, mean and maximum of ``u, v, r, n, delta`` in file units.
        """
        frame = self._frame
        if indices is not None:
            names = [self.trajectories[i].name for i in indices]
            frame = frame[frame["trajectory"].isin(names)]
        cols = ["u", "v", "r", "n", "delta"]
        stats = frame[cols].agg(["min", "mean", "max"]).T
        stats.index.name = "channel"
        return stats


def split_indices(M: int, test_fraction: float = TEST_FRACTION, seed: int = 0) -> tuple[list[int], list[int]]:
    """
    Partition ``range(M)`` by a seeded shuffle.

    The test split holds ``max(1, round(test_fraction * M))`` trajectories, and
    at least one trajectory is left for training when ``M >= 2``.
    """
    if M < 1:
        raise ValueError("Cannot split an empty dataset.")
    if not 0 < test_fraction < 1:
        raise ConfigurationError(f"test_fraction must be in (0, 1), got {test_fraction}.")
    n_test = max(1, int(round(test_fraction * M)))
    if M >= 2:
        n_test = min(n_test, M - 1)
    perm = np.random.default_rng(seed).permutation(M)
    test = sorted(int(i) for i in perm[:n_test])
    train = sorted(int(i) for i in perm[n_test:])
    return train, test


def resolve_commands(
    specs: Sequence[ScenarioSpec],
    truth: np.ndarray,
    config: VesselConfig,
) -> np.ndarray:
    """Run every scenario's controller and return commands as (M, K, 2) in rpm and deg."""
    K = specs[0].K
    out = np.empty((len(specs), K, 2))
    for i, spec in enumerate(specs):
        command = spec.controller()
        state = spec.initial.asarray()
        for k in range(K):
            out[i, k] = command(k, state)
            c = (out[i, k, 0], np.deg2rad(out[i, k, 1]))
            try:
                state = step(state, c, None, truth, config, spec.dt).asarray()
            except SimulationFault as e:
                raise ScenarioError(f"simulation diverged at step {k}: {e}", index=i) from None
        _log.debug("scenario %d (%s) commands resolved", i, spec.name)
    return out


def generate_dataset(
    preset: VesselPreset,
    specs: Sequence[ScenarioSpec],
    truth: KeyParams,
    noise: Mapping[str, float] | None = None,
    seed: int = 0,
    provenance: Mapping[str, Any] | None = None,
) -> Dataset:
    """
    Simulate scenarios under known parameters.

    Parameters
    ----------
    preset : VesselPreset
        The vessel.
    specs : sequence of ScenarioSpec
        Scenarios, all with the same K and dt.
    truth : KeyParams
        Parameters of the data-generating model.
    noise : mapping, optional
        Standard deviation of additive Gaussian measurement noise per state
        channel, e.g. ``{"x": 1.0, "u": 0.05}``.
    seed : int
        Seed of the measurement noise.
    provenance : mapping, optional
        Extra generator information written to the header.

    Returns
    -------
    Dataset
        The header records the truth parameters and the envelope excursions.
    """
    specs = list(specs)
    if len(specs) == 0:
        raise ValueError("At least one scenario is required.")
    shapes = {(s.K, s.dt) for s in specs}
    if len(shapes) != 1:
        raise ConfigurationError("All scenarios must share one K and dt.")
    noise = dict(noise or {})
    unknown = set(noise) - set(STATE_CHANNELS)
    if unknown:
        raise ConfigurationError(f"Noise given for unknown channels: {', '.join(sorted(unknown))}.")
    config = preset.config
    for i, spec in enumerate(specs):
        spec.validate(config, index=i)
    p = truth.asarray()

    commands_deg = resolve_commands(specs, p, config)
    inputs = commands_deg.copy()
    inputs[..., 1] = np.deg2rad(inputs[..., 1])
    initial = np.stack([s.initial.asarray() for s in specs])
    states = rollout(initial, inputs, p[None, None, :], config, specs[0].dt)[0]
    finite = np.all(np.isfinite(states), axis=(-2, -1))
    if not np.all(finite):
        raise ScenarioError("simulation diverged", index=int(np.argmin(finite)))

    if noise:
        rng = np.random.default_rng(seed)
        sigma = np.array([noise.get(ch, 0.0) for ch in STATE_CHANNELS])
        states = states + rng.standard_normal(states.shape) * sigma

    trajectories = [
        Trajectory(states[i], inputs[i], spec.dt, name=spec.name or f"s{i:03d}")
        for i, spec in enumerate(specs)
    ]
    header = {
        "format": "greyhull-dataset",
        "version": 1,
        "vessel": preset.name,
        "dt": float(specs[0].dt),
        "K": int(specs[0].K),
        "M": len(specs),
        "units": dict(FILE_UNITS),
        "generator": {
            "seed": int(seed),
            "families": [s.family for s in specs],
            "noise": {k: float(v) for k, v in noise.items()},
            **dict(provenance or {}),
        },
        "truth": {k: float(v) for k, v in zip(PARAM_NAMES, truth)},
    }
    dataset = Dataset.from_trajectories(trajectories, header, rudder_commands_deg=commands_deg[..., 1])
    excursions = preset.envelope.excursions(dataset.statistics())
    dataset.header["envelope_excursions"] = excursions
    if excursions:
        warnings.warn(
            f"Generated data leaves the {preset.name} envelope: {'; '.join(excursions)}.",
            UserWarning,
        )
    _log.info("generated %d trajectories of %d knots for %s", len(specs), specs[0].K + 1, preset.name)
    return dataset


def sample_curves(
    u_grid: np.ndarray,
    a_grid: np.ndarray,
    **params: KeyParams,
) -> dict[str, pd.DataFrame]:
    """
    Fitted curves ``R(u)``, ``c_L(a_r)`` and ``c_D(a_r)`` of several parameter sets.

    Returns
    -------
    dict with a ``resistance`` frame (column ``u`` and one ``R_<name>`` per set)
    and a ``rudder`` frame (``a_r`` in rad, ``a_r_deg`` and ``c_L_<name>``,
    ``c_D_<name>`` per set).
    """
    u_grid = np.asarray(u_grid, dtype=np.float64)
    a_grid = np.asarray(a_grid, dtype=np.float64)
    res = pd.DataFrame({"u": u_grid})
    rud = pd.DataFrame({"a_r": a_grid, "a_r_deg": np.rad2deg(a_grid)})
    for name, p in params.items():
        p = np.asarray(p, dtype=np.float64)
        res[f"R_{name}"] = resistance(u_grid, p)
        c_L, c_D = rudder_coefficients(a_grid, p)
        rud[f"c_L_{name}"] = c_L
        rud[f"c_D_{name}"] = c_D
    return {"resistance": res, "rudder": rud}


def track_frame(trajectory: Trajectory) -> pd.DataFrame:
    """Knot-indexed state table for plotting; the rudder angle is in degrees."""
    df = pd.DataFrame(trajectory.states, columns=list(STATE_CHANNELS))
    df["delta"] = np.rad2deg(df["delta"])
    df.insert(0, "t", trajectory.time)
    df.insert(0, "k", np.arange(len(trajectory), dtype=np.int64))
    return df


def overlay_frame(measured: Trajectory, **predicted: Trajectory) -> pd.DataFrame:
    """Long-format table of a measured trajectory and its predictions, column ``source``."""
    frames = []
    for source, traj in {"measured": measured, **predicted}.items():
        df = track_frame(traj)
        df.insert(0, "source", source)
        df.insert(0, "scenario", measured.name)
        frames.append(df)
    return pd.concat(frames, ignore_index=True)


_VESSEL_KEYS = {f.name for f in fields(VesselConfig)} - {"hydro", "prop"}
_HYDRO_KEYS = {f.name for f in fields(HydroCoefficients)}
_PROP_KEYS = {f.name for f in fields(PropellerModel)}
_SOLVER_KEYS = {f.name for f in fields(SolverOptions)}
_CONSTRAINT_KEYS = {f.name for f in fields(ConstraintSet)} - {"u_grid", "a_grid"} | {"n_points", "u_max", "a_max"}
_SCENARIO_KEYS = {"count", "maneuvering_weight", "rudder_max"}
_SPLIT_KEYS = {"test_fraction"}


def _check_keys(section: str, given: Mapping[str, Any], allowed: set[str]) -> dict[str, Any]:
    if given is None:
        return {}
    if not isinstance(given, Mapping):
        raise ConfigurationError(f"Section {section!r} must be a mapping.")
    unknown = set(given) - allowed
    if unknown:
        raise ConfigurationError(f"Unknown keys in {section!r}: {', '.join(sorted(unknown))}.")
    return dict(given)


@dataclass(frozen=True)
class WorkbenchConfig:
    """
    Settings shared by the command-line tools, usually read from YAML.

    Every section is optional. ``vessel`` overrides fields of the preset's
    :class:`VesselConfig`, with nested ``hydro`` and ``prop`` mappings.
    Angles in ``vessel`` are in radians.
    """
    preset: str = "shipA"
    vessel: dict = field(default_factory=dict)
    dt: float = DEFAULT_DT
    K: int = DEFAULT_KNOTS
    r_max: float = R_MAX
    per_trajectory_r_max: bool = False
    solver: dict = field(default_factory=dict)
    constraints: dict = field(default_factory=dict)
    scenarios: dict = field(default_factory=dict)
    noise: dict = field(default_factory=dict)
    split: dict = field(default_factory=dict)
    seed: int = 0

    @classmethod
    def from_dict(cls, d: Mapping[str, Any] | None) -> WorkbenchConfig:
        d = dict(d or {})
        allowed = {f.name for f in fields(cls)}
        unknown = set(d) - allowed
        if unknown:
            raise ConfigurationError(f"Unknown configuration keys: {', '.join(sorted(unknown))}.")
        vessel = _check_keys("vessel", d.get("vessel"), _VESSEL_KEYS | {"hydro", "prop"})
        if "hydro" in vessel:
            _check_keys("vessel.hydro", vessel["hydro"], _HYDRO_KEYS)
        if "prop" in vessel:
            _check_keys("vessel.prop", vessel["prop"], _PROP_KEYS)
        out = dict(d)
        out["vessel"] = vessel
        out["solver"] = _check_keys("solver", d.get("solver"), _SOLVER_KEYS)
        out["constraints"] = _check_keys("constraints", d.get("constraints"), _CONSTRAINT_KEYS)
        out["scenarios"] = _check_keys("scenarios", d.get("scenarios"), _SCENARIO_KEYS)
        out["noise"] = _check_keys("noise", d.get("noise"), set(STATE_CHANNELS))
        out["split"] = _check_keys("split", d.get("split"), _SPLIT_KEYS)
        try:
            config = cls(**out)
            config.solver_options()
        except TypeError as e:
            raise ConfigurationError(str(e)) from None
        return config

    def vessel_preset(self) -> VesselPreset:
        """The preset with vessel overrides and configured constraints applied."""
        preset = get_preset(self.preset)
        config = preset.config
        overrides = dict(self.vessel)
        try:
            hydro = overrides.pop("hydro", None)
            prop = overrides.pop("prop", None)
            if hydro:
                overrides["hydro"] = replace(config.hydro, **hydro)
            if prop:
                overrides["prop"] = replace(config.prop, **prop)
            overrides.setdefault("dt", self.dt)
            config = config.replace(**overrides)
        except TypeError as e:
            raise ConfigurationError(str(e)) from None
        preset = preset.replace(config=config)
        if self.constraints:
            preset = preset.replace(constraints=self.constraint_set(preset))
        return preset

    def constraint_set(self, preset: VesselPreset) -> ConstraintSet:
        opts = dict(self.constraints)
        n_points = int(opts.pop("n_points", preset.constraints.u_grid.size))
        u_max = float(opts.pop("u_max", preset.constraints.u_grid[-1]))
        a_max = float(opts.pop("a_max", preset.constraints.a_grid[-1]))
        base = preset.constraints
        scalars = {
            f.name: getattr(base, f.name) for f in fields(ConstraintSet) if f.name not in ("u_grid", "a_grid")
        }
        scalars.update(opts)
        return ConstraintSet.default(u_max=u_max, n_points=n_points, a_max=a_max, **scalars)

    def solver_options(self, **overrides) -> SolverOptions:
        opts = {**self.solver, **{k: v for k, v in overrides.items() if v is not None}}
        try:
            return SolverOptions(**opts)
        except TypeError as e:
            raise ConfigurationError(str(e)) from None

    @property
    def test_fraction(self) -> float:
        return float(self.split.get("test_fraction", TEST_FRACTION))

    def scenario_specs(self, preset: VesselPreset, truth: KeyParams, seed: int | None = None) -> list[ScenarioSpec]:
        """Draw the configured number of scenarios for ``preset``."""
        opts = dict(self.scenarios)
        env = preset.envelope.delta
        rudder_max = opts.get("rudder_max", float(np.floor(min(-env.min, env.max))))
        return sample_scenarios(
            int(opts.get("count", 46)),
            preset.config,
            truth,
            rng=self.seed if seed is None else seed,
            maneuvering_weight=float(opts.get("maneuvering_weight", 0.7)),
            K=self.K,
            dt=self.dt,
            rudder_max=rudder_max,
        )
