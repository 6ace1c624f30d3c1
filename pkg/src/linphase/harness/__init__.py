"""Experiment orchestration, file formats and the command line interface."""
from .config import ConfigError, ExperimentConfig, GaussParams, load_config
from .experiments import (
    TrialRecord,
    run_antenna_benchmark,
    run_gauss_sweep,
    run_solve,
    solve_instance,
    trial_seed,
)
from .io import FormatError

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "FormatError",
    "GaussParams",
    "TrialRecord",
    "load_config",
    "run_antenna_benchmark",
    "run_gauss_sweep",
    "run_solve",
    "solve_instance",
    "trial_seed",
]
