"""Differentiable cellular-automata wildfire spread simulation with
gradient-based parameter calibration."""

from .calibration import (
    AdamWState,
    CalibrationResult,
    Observation,
    ObservationSchedule,
    adamw_update,
    calibrate,
)
from .estimator import FireSpreadEstimator
from .kernel import (
    DEFAULT_NORM_C,
    NEIGHBOR_POSITIONS,
    PropagationFields,
    SimulationResult,
    WindUpdate,
    build_fields,
    ignition_prob,
    inject_ignitions,
    normalize_prob,
    propagate_prob,
    run_simulation,
    slope_factor,
    step_forward,
    wind_factor,
)
from .losses import (
    LossBreakdown,
    NormCandidate,
    combined_loss,
    fit_normalization_constant,
    jaccard_index,
    manhattan_distance,
)
from .model import (
    FireState,
    Landscape,
    ModelParams,
    RunManifest,
    StepRings,
    clamp_params,
    new_fire_state,
    validate_landscape,
    validate_params,
)
from .rng import Channel, derive_epoch_seed, uniform_draw, uniform_grid
from .tape import Tape, attachment_plan, backward_params, check_if_attach

__version__ = "0.1.0"

__all__ = [
    "AdamWState",
    "CalibrationResult",
    "Channel",
    "DEFAULT_NORM_C",
    "FireSpreadEstimator",
    "FireState",
    "Landscape",
    "LossBreakdown",
    "ModelParams",
    "NEIGHBOR_POSITIONS",
    "NormCandidate",
    "Observation",
    "ObservationSchedule",
    "PropagationFields",
    "RunManifest",
    "SimulationResult",
    "StepRings",
    "Tape",
    "WindUpdate",
    "adamw_update",
    "attachment_plan",
    "backward_params",
    "build_fields",
    "calibrate",
    "check_if_attach",
    "clamp_params",
    "combined_loss",
    "derive_epoch_seed",
    "fit_normalization_constant",
    "ignition_prob",
    "inject_ignitions",
    "jaccard_index",
    "manhattan_distance",
    "new_fire_state",
    "normalize_prob",
    "propagate_prob",
    "run_simulation",
    "slope_factor",
    "step_forward",
    "uniform_draw",
    "uniform_grid",
    "validate_landscape",
    "validate_params",
    "wind_factor",
]
