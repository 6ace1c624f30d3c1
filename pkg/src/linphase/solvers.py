"""Retrieval algorithms.

* :func:`solve_linear_pc` -- the linear partial-coherence formulation: the
  unknown group phases ``psi`` are appended to the source coefficients ``z``
  and one of them is pinned to 1, which turns phase retrieval into a single
  dense least-squares solve.
* :func:`solve_nonconvex` -- intensity least squares minimised by L-BFGS,
  started from :func:`spectral_initialize`. Used on the plain (incoherent)
  system and on the interferometrically augmented one.
* :func:`coherent_resolve` -- re-imposes ``|psi_g| = 1`` on a linear solution
  and re-solves the resulting fully coherent system.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .coherence import CoherenceError, CoherenceStructure, MagnitudePhaseData, build_BC
from .lbfgs import minimize_lbfgs
from .numerics import DimensionError, as_matrix, as_vector, dominant_eigenvector

CONDITION_LIMIT = 1e12


class AnchorError(CoherenceError):
    """No usable phase reference group."""


class UnderdeterminedWarning(UserWarning):
    pass


@dataclass(frozen=True)
class StackedUnknowns:
    """Source coefficients ``z`` (length n) and group phases ``psi`` (length q)."""

    z: np.ndarray
    psi: np.ndarray

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.z, self.psi])


@dataclass
class NonconvexSettings:
    max_iterations: int = 2000
    memory: int = 10
    gradient_tolerance: float = 1e-12
    sufficient_decrease: float = 1e-4
    curvature: float = 0.9

    def __post_init__(self):
        if self.max_iterations < 1 or self.memory < 1:
            raise ValueError("max_iterations and memory must be >= 1")
        if not (self.gradient_tolerance > 0):
            raise ValueError("gradient_tolerance must be > 0")
        if not (0 < self.sufficient_decrease < self.curvature < 1):
            raise ValueError("line search needs 0 < sufficient_decrease < curvature < 1")


@dataclass
class SolveReport:
    """Outcome of one solver call.

    ``psi`` and ``anchor`` are only set by the linear solver. ``objective`` is
    the residual norm for linear solves and the intensity loss otherwise.
    """

    z: np.ndarray
    psi: np.ndarray | None = None
    anchor: int | None = None
    iterations: int = 0
    objective: float = float("nan")
    converged: bool = True
    underdetermined: bool = False
    condition_warning: bool = False
    rank: int | None = None
    message: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def solution(self) -> StackedUnknowns | np.ndarray:
        if self.psi is None:
            return self.z
        return StackedUnknowns(self.z, self.psi)


# -- linear partial-coherence solve -------------------------------------------------

def choose_anchor(structure: CoherenceStructure, data: MagnitudePhaseData) -> int:
    """Group whose anchor sample has the largest magnitude (lowest index on ties)."""
    data.check(structure)
    anchor_mags = data.magnitudes[structure.anchors]
    g = int(np.argmax(anchor_mags))
    if anchor_mags[g] <= 0.0:
        raise AnchorError("all anchor magnitudes are zero")
    return g


def linear_pc_system(A, data: MagnitudePhaseData, structure: CoherenceStructure) -> np.ndarray:
    """The homogeneous system matrix ``[A, -B C]`` acting on ``[z; psi]``."""
    A = as_matrix(A, "A")
    if A.shape[0] != structure.m:
        raise DimensionError(f"A has {A.shape[0]} rows, structure has {structure.m}")
    return np.hstack([A, -build_BC(structure, data)])


def solve_linear_pc(
    A,
    data: MagnitudePhaseData,
    structure: CoherenceStructure,
    s: int | None = None,
) -> SolveReport:
    """Solve ``[A, -B C] [z; psi] = 0`` subject to ``psi_s = 1``.

    The constraint is eliminated exactly: column ``n + s`` moves to the
    right-hand side and the remaining ``m x (n + q - 1)`` system is solved in
    the least-squares sense (minimum norm if rank-deficient).

    Args:
        A: (m, n) forward operator.
        data: measured magnitudes and in-group phase differences.
        structure: coherence groups of the m samples.
        s: index of the group whose phase is fixed; defaults to
            :func:`choose_anchor`.
    """
    M = linear_pc_system(A, data, structure)
    m, n = structure.m, M.shape[1] - structure.q
    q = structure.q
    if s is None:
        s = choose_anchor(structure, data)
    if not 0 <= s < q:
        raise AnchorError(f"anchor group {s} outside 0..{q - 1}")
    if data.magnitudes[structure.groups[s][0]] <= 0.0:
        raise AnchorError(f"anchor of group {s} has zero magnitude")

    unknowns = n + q - 1
    underdetermined = m < unknowns
    if underdetermined:
        warnings.warn(
            f"linear PC system has {m} rows for {unknowns} unknowns; returning minimum-norm solution",
            UnderdeterminedWarning,
            stacklevel=2,
        )
    keep = np.ones(n + q, dtype=bool)
    keep[n + s] = False
    rhs = -M[:, n + s]
    x, _, rank, sv = np.linalg.lstsq(M[:, keep], rhs, rcond=None)

    full = np.empty(n + q, dtype=np.complex128)
    full[keep] = x
    full[n + s] = 1.0
    cond = float(sv[0] / sv[-1]) if sv.size and sv[-1] > 0 else float("inf")
    rank_deficient = not underdetermined and rank < unknowns
    return SolveReport(
        z=full[:n],
        psi=full[n:],
        anchor=s,
        objective=float(np.linalg.norm(M @ full)),
        underdetermined=underdetermined,
        condition_warning=bool(rank_deficient or cond > CONDITION_LIMIT),
        rank=int(rank),
        extra={"condition": cond},
    )


def coherent_resolve(
    A,
    data: MagnitudePhaseData,
    structure: CoherenceStructure,
    psi,
) -> np.ndarray | None:
    """Project group phases onto the unit circle and solve the coherent system.

    Forms ``b_hat = B C (psi / |psi|)`` and returns the least-squares solution
    of ``A z = b_hat``. Returns ``None`` (refinement skipped) if any entry of
    ``psi`` is zero.
    """
    A = as_matrix(A, "A")
    psi = as_vector(psi, "psi")
    if psi.shape[0] != structure.q:
        raise DimensionError(f"psi has {psi.shape[0]} entries, expected q={structure.q}")
    mag = np.abs(psi)
    if np.any(mag == 0.0):
        return None
    b_hat = build_BC(structure, data) @ (psi / mag)
    z, *_ = np.linalg.lstsq(A, b_hat, rcond=None)
    return z


def solve_coherent(A, b) -> SolveReport:
    """Least-squares solve with full phase information (reference method)."""
    A = as_matrix(A, "A")
    b = as_vector(b, "b")
    z, _, rank, sv = np.linalg.lstsq(A, b, rcond=None)
    cond = float(sv[0] / sv[-1]) if sv.size and sv[-1] > 0 else float("inf")
    return SolveReport(
        z=z,
        objective=float(np.linalg.norm(A @ z - b)),
        underdetermined=A.shape[0] < A.shape[1],
        condition_warning=bool(rank < A.shape[1] or cond > CONDITION_LIMIT),
        rank=int(rank),
        extra={"condition": cond},
    )


# -- nonconvex intensity least squares ------------------------------------------------

def intensity_objective(A: np.ndarray, intensities: np.ndarray, z: np.ndarray):
    """Intensity loss and its Wirtinger gradient.

    ``f(z) = 1/(2m) * sum_k (|(Az)_k|^2 - y_k)^2`` with ``y = |b|^2`` and
    ``grad = df/d(conj z) = 1/m * A^H [(|Az|^2 - y) * Az]``.

    The gradient with respect to the real and imaginary parts of ``z`` is
    ``2 Re(grad)`` and ``2 Im(grad)``.
    """
    m = A.shape[0]
    Az = A @ z
    r = (Az.real**2 + Az.imag**2) - intensities
    f = float(r @ r) / (2.0 * m)
    grad = (A.conj().T @ (r * Az)) / m
    return f, grad


def spectral_initialize(A, magnitudes, iterations: int = 40) -> np.ndarray:
    """Spectral starting point for intensity-based phase retrieval.

    Leading eigenvector of ``Y = 1/m * sum_k |b_k|^2 a_k a_k^H`` (``a_k^H``
    the k-th row of ``A``) from ``iterations`` power iterations, scaled by the
    norm estimate ``sqrt(sum |b_k|^2 / sum ||a_k||^2)``.
    """
    A = as_matrix(A, "A")
    mags = np.asarray(magnitudes, dtype=float)
    if mags.shape != (A.shape[0],):
        raise DimensionError(f"{mags.shape[0]} magnitudes for {A.shape[0]} rows")
    y = mags**2
    total = float(y.sum())
    if total == 0.0:
        warnings.warn("all magnitudes are zero; spectral estimate is the zero vector", stacklevel=2)
        return np.zeros(A.shape[1], dtype=np.complex128)
    Y = (A.conj().T * y) @ A / A.shape[0]
    v = dominant_eigenvector(Y, iterations)
    scale = np.sqrt(total / float(np.sum(np.abs(A) ** 2)))
    return scale * v


def solve_nonconvex(
    A,
    magnitudes,
    z0,
    settings: NonconvexSettings | None = None,
) -> SolveReport:
    """Minimise the intensity loss by L-BFGS from ``z0``.

    The complex unknown is handed to the optimiser as its interleaved
    real/imaginary float view; the real gradient is twice the Wirtinger
    gradient. Hitting the iteration cap is not an error: the best iterate is
    returned with ``converged=False``.
    """
    settings = settings or NonconvexSettings()
    A = as_matrix(A, "A")
    z0 = as_vector(z0, "z0")
    mags = np.asarray(magnitudes, dtype=float)
    if z0.shape[0] != A.shape[1]:
        raise DimensionError(f"z0 has {z0.shape[0]} entries, A has {A.shape[1]} columns")
    if mags.shape != (A.shape[0],):
        raise DimensionError(f"{mags.shape[0]} magnitudes for {A.shape[0]} rows")
    intensities = mags**2
    AH = np.ascontiguousarray(A.conj().T)
    m = A.shape[0]

    def fun(x):
        z = x.view(np.complex128)
        Az = A @ z
        r = (Az.real**2 + Az.imag**2) - intensities
        f = float(r @ r) / (2.0 * m)
        g = (AH @ (r * Az)) * (2.0 / m)
        return f, g.view(np.float64)

    res = minimize_lbfgs(
        fun,
        z0.copy().view(np.float64),
        max_iterations=settings.max_iterations,
        memory=settings.memory,
        gradient_tolerance=settings.gradient_tolerance,
        c1=settings.sufficient_decrease,
        c2=settings.curvature,
    )
    return SolveReport(
        z=res.x.view(np.complex128).copy(),
        iterations=res.iterations,
        objective=res.f,
        converged=res.converged,
        message=res.message,
        extra={"evaluations": res.evaluations, "grad_norm": res.grad_norm},
    )
