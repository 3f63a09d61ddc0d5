"""Simulation and analysis toolkit for an SIR epidemic model driven by
Brownian motion and compound-Poisson jumps."""

from .engine import (
    EnsembleResult,
    SimConfig,
    TrajectoryRecord,
    log_drift_rates,
    path_rng,
    run_ensemble,
    simulate_path,
    step,
)
from .levy import (
    FiniteLevyMeasure,
    JumpBatch,
    LevyAtom,
    NoiseSpec,
    pure_diffusion_measure,
    single_atom_measure,
    zero_noise,
)
from .model import (
    AssumptionReport,
    ModelParams,
    MomentConstants,
    StateTriple,
    check_assumptions,
    compute_moment_constants,
    validate_params,
)
from .thresholds import (
    ThresholdReport,
    basic_reproduction_number,
    classify,
    extinction_exponent,
    stochastic_threshold,
    threshold_report,
)
from .verify import VerifyPlan, run_verification

__version__ = "0.1.0"

__all__ = [
    "AssumptionReport",
    "EnsembleResult",
    "FiniteLevyMeasure",
    "JumpBatch",
    "LevyAtom",
    "ModelParams",
    "MomentConstants",
    "NoiseSpec",
    "SimConfig",
    "StateTriple",
    "ThresholdReport",
    "TrajectoryRecord",
    "VerifyPlan",
    "basic_reproduction_number",
    "check_assumptions",
    "classify",
    "compute_moment_constants",
    "extinction_exponent",
    "log_drift_rates",
    "path_rng",
    "pure_diffusion_measure",
    "run_ensemble",
    "run_verification",
    "simulate_path",
    "single_atom_measure",
    "step",
    "stochastic_threshold",
    "threshold_report",
    "validate_params",
    "zero_noise",
]
