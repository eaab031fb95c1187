"""ltvbench: LTV identification, finite-horizon LQR, and tracking benchmarks
on perturbed and reconfiguring spring-mass-damper plants."""

__version__ = "0.1.0"

from .control import (
    CostWeights,
    GainSchedule,
    ReferenceSpec,
    closed_loop,
    default_reference,
    default_weights,
    feedforward,
    lqr_ltv,
    tracking_errors,
)
from .datagen import (
    Dataset,
    ExcitationSpec,
    Split,
    build_dataset,
    chirp,
    default_excitations,
    load_dataset,
    save_dataset,
    tvera_experiments,
)
from .dynamics import (
    BUILTIN_SCENARIOS,
    Kind,
    ScenarioSpec,
    Trajectory,
    derivative,
    discretize,
    ground_truth_ltv,
    params_at,
    sat,
    scenario,
    simulate,
    step_rk4,
)
from .models import LtvModel, MatrixPair, load_model, save_model

__all__ = [
    "BUILTIN_SCENARIOS",
    "CostWeights",
    "Dataset",
    "ExcitationSpec",
    "GainSchedule",
    "Kind",
    "LtvModel",
    "MatrixPair",
    "ReferenceSpec",
    "ScenarioSpec",
    "Split",
    "Trajectory",
    "build_dataset",
    "chirp",
    "closed_loop",
    "default_excitations",
    "default_reference",
    "default_weights",
    "derivative",
    "discretize",
    "feedforward",
    "ground_truth_ltv",
    "load_dataset",
    "load_model",
    "lqr_ltv",
    "params_at",
    "sat",
    "save_dataset",
    "save_model",
    "scenario",
    "simulate",
    "step_rk4",
    "tracking_errors",
    "tvera_experiments",
]
