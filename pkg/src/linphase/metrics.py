"""Near-field deviation measures, success statistics and far-field cut deviation.

All deviations are in dB. An exact match yields ``-inf``; serialised tables
replace it by :data:`DB_FLOOR`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DB_FLOOR = -400.0
SUCCESS_THRESHOLD_DB = -90.0


def _pair(predicted, reference):
    x = np.asarray(predicted, dtype=np.complex128).ravel()
    y = np.asarray(reference, dtype=np.complex128).ravel()
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.shape} vs {y.shape}")
    ref_norm = np.linalg.norm(y)
    if ref_norm == 0.0:
        raise ValueError("reference vector is zero")
    return x, y, ref_norm


def _db(ratio: float) -> float:
    if ratio == 0.0:
        return float("-inf")
    return float(20.0 * np.log10(ratio))


def alignment_phase(predicted, reference) -> float:
    """Global phase that best rotates ``predicted`` onto ``reference``.

    Minimises ``||exp(-1j*t) x - y||`` over ``t``; the optimum is the phase of
    ``<y, x> = sum(conj(y) * x)``.
    """
    x = np.asarray(predicted, dtype=np.complex128).ravel()
    y = np.asarray(reference, dtype=np.complex128).ravel()
    return float(np.angle(np.vdot(y, x)))


def epsilon_c(predicted, reference) -> float:
    """Relative complex deviation after removing the global phase."""
    x, y, ref_norm = _pair(predicted, reference)
    theta = alignment_phase(x, y)
    return _db(np.linalg.norm(np.exp(-1j * theta) * x - y) / ref_norm)


def epsilon_m(predicted, reference) -> float:
    """Relative magnitude deviation ``|| |x| - |y| || / ||y||`` in dB."""
    x, y, ref_norm = _pair(predicted, reference)
    return _db(np.linalg.norm(np.abs(x) - np.abs(y)) / ref_norm)


@dataclass(frozen=True)
class DeviationReport:
    epsilon_c: float
    epsilon_m: float
    aligned_phase: float


def deviation_report(predicted, reference) -> DeviationReport:
    return DeviationReport(
        epsilon_c(predicted, reference),
        epsilon_m(predicted, reference),
        alignment_phase(predicted, reference),
    )


def success_rate(deviations, threshold: float = SUCCESS_THRESHOLD_DB) -> float:
    """Fraction of deviations strictly below ``threshold``."""
    d = np.asarray(deviations, dtype=float)
    if d.size == 0:
        raise ValueError("no deviations given")
    return float(np.count_nonzero(d < threshold) / d.size)


def normalize_pattern(pattern) -> np.ndarray:
    """Scale a complex pattern so its peak has magnitude 1 and phase 0."""
    p = np.asarray(pattern, dtype=np.complex128)
    k = int(np.argmax(np.abs(p)))
    if p[k] == 0:
        raise ValueError("pattern is identically zero")
    return p / p[k]


def ff_cut_deviation(result_pattern, reference_pattern) -> np.ndarray:
    """Per-angle deviation of a far-field cut from its reference, in dB.

    Both cuts are first normalised to unit peak with zero peak phase; the
    curve is then ``20 log10(|result - reference| / max|reference|)``.
    """
    r = np.asarray(result_pattern)
    ref = np.asarray(reference_pattern)
    if r.shape != ref.shape:
        raise ValueError(f"angle grids differ: {r.shape} vs {ref.shape}")
    diff = np.abs(normalize_pattern(r) - normalize_pattern(ref))
    with np.errstate(divide="ignore"):
        return 20.0 * np.log10(diff)


def to_db_floor(value: float) -> float:
    """Replace ``-inf`` by :data:`DB_FLOOR` for serialisation."""
    return max(float(value), DB_FLOOR)
