"""
Trajectory distance measures and the baseline-versus-fitted evaluation protocol.
"""

from __future__ import annotations
from dataclasses import dataclass
import logging
from typing import Sequence
import warnings
import numpy as np
import pandas as pd

from ._const import METRIC_CHANNELS, R_MAX
from ._errors import KnotMismatchError
from ._utils import wrap_angle
from .dynamics import Trajectory, VesselConfig, simulate
from .forces import EnvInput, KeyParams
from .identification import WeightSpec
from .struct import ResultStruct

_log = logging.getLogger(__name__)

__all__ = [
    "TrajectoryComparison",
    "EvaluationReport",
    "manhattan_distance",
    "cvdm",
    "compare",
    "evaluate_protocol",
]

_N_METRIC = len(METRIC_CHANNELS)
_CAPTION_NAMES = ("x", "y", "psi", "u", "v", "r")


def _abs_residuals(measured: Trajectory, predicted: Trajectory) -> np.ndarray:
    if len(measured) != len(predicted):
        raise KnotMismatchError(
            f"Cannot compare trajectories of {len(measured)} and {len(predicted)} knots."
        )
    if measured.K < 1:
        raise ValueError("Trajectories must have at least one step.")
    res = measured.states[1:, :_N_METRIC] - predicted.states[1:, :_N_METRIC]
    res[:, 2] = wrap_angle(res[:, 2])
    return np.abs(res)


def manhattan_distance(measured: Trajectory, predicted: Trajectory) -> np.ndarray:
    """
    Mean absolute deviation per channel ``(x, y, psi, u, v, r)``.

    The initial knot is shared by construction and is excluded; heading
    deviations are wrapped to (-pi, pi].
    """
    res = _abs_residuals(measured, predicted)
    return np.sum(res, axis=0) / measured.K


def cvdm(measured: Trajectory, predicted: Trajectory, r_max: float = R_MAX) -> float:
    """
    Non-dimensional vessel distance in percent.

    Positions are normalised by the path length of the measured trajectory,
    speeds by its mean speed, heading by pi and yaw rate by ``r_max``. The
    measure is therefore not symmetric in its arguments.
    """
    res = _abs_residuals(measured, predicted)
    w = WeightSpec.from_trajectory(measured, r_max).diagonal[:_N_METRIC]
    return float(100.0 * np.sum(res * w) / measured.K)


@dataclass(frozen=True)
class TrajectoryComparison:
    """Manhattan distances, cVDM and the normalisers used for one pair."""
    md: np.ndarray
    cvdm: float
    length: float
    speed: float
    r_max: float


def compare(measured: Trajectory, predicted: Trajectory, r_max: float = R_MAX) -> TrajectoryComparison:
    return TrajectoryComparison(
        md=manhattan_distance(measured, predicted),
        cvdm=cvdm(measured, predicted, r_max),
        length=measured.path_length,
        speed=measured.mean_speed,
        r_max=r_max,
    )


def _improvement(before: np.ndarray, after: np.ndarray) -> np.ndarray:
    before = np.asarray(before, dtype=np.float64)
    after = np.asarray(after, dtype=np.float64)
    ok = before > 0
    return np.where(ok, 100.0 * (before - after) / np.where(ok, before, 1.0), np.nan)


class EvaluationReport(ResultStruct):
    """
    Outcome of :func:`evaluate_protocol`.

    Per-scenario arrays follow the order of ``scenarios``; the second axis of
    the MD arrays follows ``(x, y, psi, u, v, r)``. Improvements are NaN where
    the baseline distance is zero, and such channels are listed in
    ``degenerate``.
    """
    scenarios: list[str]
    md_baseline: np.ndarray
    md_fitted: np.ndarray
    md_improvement: np.ndarray
    ari: np.ndarray
    cvdm_baseline: np.ndarray
    cvdm_fitted: np.ndarray
    cvdm_improvement: np.ndarray
    mari: float
    cvdm_median_improvement: float
    consistency: float
    degenerate: list[str]
    baseline_runs: list[Trajectory]
    fitted_runs: list[Trajectory]

    def table(self) -> pd.DataFrame:
        """Flat per-scenario table."""
        df = pd.DataFrame({"scenario": self.scenarios})
        for j, ch in enumerate(METRIC_CHANNELS):
            df[f"md_baseline_{ch}"] = self.md_baseline[:, j]
            df[f"md_fitted_{ch}"] = self.md_fitted[:, j]
            df[f"md_improvement_{ch}"] = self.md_improvement[:, j]
        df["ari"] = self.ari
        df["cvdm_baseline"] = self.cvdm_baseline
        df["cvdm_fitted"] = self.cvdm_fitted
        df["cvdm_improvement"] = self.cvdm_improvement
        return df

    def caption(self, i: int) -> str:
        """One-line summary of the relative improvements of scenario ``i``."""
        parts = ", ".join(
            f"{name}:{value:.1f}" for name, value in zip(_CAPTION_NAMES, self.md_improvement[i])
        )
        return f"MD(%) per dimension is: {parts}, and cVDM(%) is {self.cvdm_improvement[i]:.1f}"

    def captions(self) -> list[str]:
        return [self.caption(i) for i in range(len(self.scenarios))]

    def select_examples(self) -> tuple[int, int]:
        """
        Indices of the best and of a moderate scenario.

        The best scenario has the largest cVDM improvement; the moderate one
        the lower median improvement.
        """
        imp = np.asarray(self.cvdm_improvement)
        valid = np.flatnonzero(np.isfinite(imp))
        if valid.size == 0:
            return 0, 0
        order = valid[np.argsort(imp[valid], kind="stable")]
        best = int(order[-1])
        moderate = int(order[(order.size - 1) // 2])
        return best, moderate

    def summary(self) -> dict:
        """Aggregate statistics and per-scenario captions as plain values."""
        return {
            "scenarios": list(self.scenarios),
            "mari": float(self.mari),
            "cvdm_median_improvement": float(self.cvdm_median_improvement),
            "consistency": float(self.consistency),
            "degenerate": list(self.degenerate),
            "captions": self.captions(),
        }


def _nanmedian(values: np.ndarray) -> float:
    values = np.asarray(values, dtype=np.float64)
    if not np.any(np.isfinite(values)):
        return float("nan")
    return float(np.nanmedian(values))


def evaluate_protocol(
    dataset_test: Sequence[Trajectory],
    baseline_p: KeyParams,
    fitted_p: KeyParams,
    config: VesselConfig,
    r_max: float = R_MAX,
    envs: Sequence[EnvInput] | None = None,
) -> EvaluationReport:
    """
    Compare baseline and fitted predictions against measured trajectories.

    Each test trajectory is re-simulated from its measured initial state and
    inputs under both parameter sets.

    Parameters
    ----------
    dataset_test : sequence of Trajectory
        Held-out measured trajectories.
    baseline_p, fitted_p : KeyParams
        Parameter sets to compare.
    config : VesselConfig
        The vessel.
    r_max : float
        Yaw-rate normaliser of cVDM.
    envs : sequence of EnvInput, optional
        Environment per step.

    Returns
    -------
    EvaluationReport
    """
    dataset_test = list(dataset_test)
    if len(dataset_test) == 0:
        raise ValueError("Test split is empty; nothing to evaluate.")

    names: list[str] = []
    md_b, md_f, cv_b, cv_f = [], [], [], []
    runs_b: list[Trajectory] = []
    runs_f: list[Trajectory] = []
    for i, measured in enumerate(dataset_test):
        name = measured.name or f"scenario-{i}"
        names.append(name)
        pred_b = simulate(measured.states[0], measured.inputs, envs, baseline_p, config, measured.dt, name=name)
        pred_f = simulate(measured.states[0], measured.inputs, envs, fitted_p, config, measured.dt, name=name)
        runs_b.append(pred_b)
        runs_f.append(pred_f)
        cmp_b = compare(measured, pred_b, r_max)
        cmp_f = compare(measured, pred_f, r_max)
        md_b.append(cmp_b.md)
        md_f.append(cmp_f.md)
        cv_b.append(cmp_b.cvdm)
        cv_f.append(cmp_f.cvdm)
        _log.debug("%s: cVDM baseline=%.6g fitted=%.6g", name, cmp_b.cvdm, cmp_f.cvdm)

    md_b = np.array(md_b)
    md_f = np.array(md_f)
    cv_b = np.array(cv_b)
    cv_f = np.array(cv_f)

    md_imp = _improvement(md_b, md_f)
    degenerate = [
        f"{names[i]}:{METRIC_CHANNELS[j]}" for i, j in zip(*np.nonzero(~(md_b > 0)))
    ]
    if degenerate:
        warnings.warn(
            f"Baseline distance is zero in {len(degenerate)} channel(s) "
            f"({', '.join(degenerate)}); they are excluded from the relative improvements.",
            UserWarning,
        )

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        ari = np.nanmean(md_imp, axis=1)

    cv_imp = _improvement(cv_b, cv_f)
    if np.any(~(cv_b > 0)):
        warnings.warn("Baseline cVDM is zero in some scenarios; their improvement is undefined.", UserWarning)

    var_b = float(np.var(cv_b))
    var_f = float(np.var(cv_f))
    if var_b > 0:
        consistency = 100.0 * (1.0 - var_f / var_b)
    else:
        warnings.warn("Baseline cVDM has zero variance; consistency is undefined.", UserWarning)
        consistency = float("nan")

    return EvaluationReport(
        scenarios=names,
        md_baseline=md_b,
        md_fitted=md_f,
        md_improvement=md_imp,
        ari=ari,
        cvdm_baseline=cv_b,
        cvdm_fitted=cv_f,
        cvdm_improvement=cv_imp,
        mari=_nanmedian(ari),
        cvdm_median_improvement=_nanmedian(cv_imp),
        consistency=consistency,
        degenerate=degenerate,
        baseline_runs=runs_b,
        fitted_runs=runs_f,
    )
