__version__ = "0.3.0"

from .forces import KeyParams, EnvInput, SteadyDisturbance, PropellerModel
from .dynamics import (
    VesselState,
    ControlInput,
    HydroCoefficients,
    VesselConfig,
    Trajectory,
    step,
    simulate,
    rollout,
)
from .identification import (
    WeightSpec,
    ConstraintSet,
    SolverOptions,
    FitProblem,
    FitResult,
    trajectory_cost,
    objective,
    evaluate_constraints,
    gradient_check,
    fit,
)
from .evaluation import manhattan_distance, cvdm, evaluate_protocol, EvaluationReport
from .presets import VesselPreset, get_preset
from .workbench import Dataset, generate_dataset
from .struct import ResultStruct

__all__ = [
    "KeyParams",
    "EnvInput",
    "SteadyDisturbance",
    "PropellerModel",
    "VesselState",
    "ControlInput",
    "HydroCoefficients",
    "VesselConfig",
    "Trajectory",
    "step",
    "simulate",
    "rollout",
    "WeightSpec",
    "ConstraintSet",
    "SolverOptions",
    "FitProblem",
    "FitResult",
    "trajectory_cost",
    "objective",
    "evaluate_constraints",
    "gradient_check",
    "fit",
    "manhattan_distance",
    "cvdm",
    "evaluate_protocol",
    "EvaluationReport",
    "VesselPreset",
    "get_preset",
    "Dataset",
    "generate_dataset",
    "ResultStruct",
]
