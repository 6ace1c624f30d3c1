"""Phase retrieval from partially coherent measurements.

Main entry points: :func:`solve_linear_pc` (linear formulation),
:func:`solve_nonconvex` (intensity least squares baseline) and the
experiment harness in :mod:`linphase.harness`.
"""
from .coherence import (
    CoherenceError,
    CoherenceStructure,
    MagnitudePhaseData,
    build_augmented_system,
    extract_phase_data,
    interferometric_phase,
)
from .metrics import DB_FLOOR, deviation_report, epsilon_c, epsilon_m, success_rate
from .solvers import (
    NonconvexSettings,
    coherent_resolve,
    solve_coherent,
    solve_linear_pc,
    solve_nonconvex,
    spectral_initialize,
)

__version__ = "0.1.0"

__all__ = [
    "DB_FLOOR",
    "CoherenceError",
    "CoherenceStructure",
    "MagnitudePhaseData",
    "NonconvexSettings",
    "build_augmented_system",
    "coherent_resolve",
    "deviation_report",
    "epsilon_c",
    "epsilon_m",
    "extract_phase_data",
    "interferometric_phase",
    "solve_coherent",
    "solve_linear_pc",
    "solve_nonconvex",
    "spectral_initialize",
    "success_rate",
]
