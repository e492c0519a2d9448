from __future__ import annotations
from typing import Any


class GreyhullError(Exception):
    """Base class of all errors raised by greyhull."""


class ConfigurationError(GreyhullError, ValueError):
    """Vessel, constraint or solver configuration is invalid."""


class SimulationFault(GreyhullError, RuntimeError):
    """A rollout produced a non-finite state."""

    def __init__(self, message: str, step: int | None = None):
        if step is not None:
            message = f"step {step}: {message}"
        super().__init__(message)
        self.step = step


class KnotMismatchError(GreyhullError, ValueError):
    """Two trajectories compared knot by knot have different lengths."""


class DegenerateTrajectoryError(GreyhullError, ValueError):
    """Measured trajectory has zero path length or zero mean speed."""


class ScenarioError(GreyhullError, ValueError):
    """Scenario commands exceed the actuator limits of the vessel."""

    def __init__(self, message: str, index: int | None = None):
        if index is not None:
            message = f"scenario {index}: {message}"
        super().__init__(message)
        self.index = index


class FitInfeasibleError(GreyhullError, RuntimeError):
    """The solver terminated without a feasible iterate."""

    def __init__(self, message: str, result: Any = None):
        super().__init__(message)
        self.result = result


class DatasetFormatError(GreyhullError, ValueError):
    """A dataset, parameter or scenario file could not be parsed."""

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)
        self.path = path
        self.line = line
