"""Dense complex linear algebra used throughout the package.

Vectors and matrices are plain ``numpy`` arrays of dtype ``complex128``.
The helpers here validate shapes and finiteness once at the boundary so the
rest of the code can work with raw arrays.
"""
from __future__ import annotations

import numpy as np


class DimensionError(ValueError):
    """Operand shapes do not fit together."""


def as_vector(x, name: str = "vector") -> np.ndarray:
    """Return ``x`` as a 1-D complex128 array, rejecting NaN/Inf."""
    v = np.asarray(x, dtype=np.complex128)
    if v.ndim != 1:
        raise DimensionError(f"{name} must be 1-D, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains non-finite entries")
    return v


def as_matrix(M, name: str = "matrix") -> np.ndarray:
    """Return ``M`` as a 2-D complex128 array, rejecting NaN/Inf."""
    A = np.asarray(M, dtype=np.complex128)
    if A.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} contains non-finite entries")
    return A


def matvec(M: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Matrix-vector product ``M @ x`` with a dimension check."""
    M = np.asarray(M)
    x = np.asarray(x)
    if M.ndim != 2 or x.ndim != 1 or M.shape[1] != x.shape[0]:
        raise DimensionError(f"cannot multiply {M.shape} by {x.shape}")
    return M @ x


def least_squares_solve(M: np.ndarray, y: np.ndarray, rcond: float | None = None) -> np.ndarray:
    """Minimum-norm least-squares solution of ``M x = y``.

    Backed by LAPACK's SVD-based ``gelsd`` (via :func:`numpy.linalg.lstsq`), so
    rank-deficient systems return the minimum-norm minimiser instead of
    raising.

    Args:
        M: (m, n) complex matrix, ``m >= 1``.
        y: length-m right-hand side.
        rcond: relative singular-value cutoff; ``None`` uses machine precision
            times ``max(m, n)``.

    Returns:
        Length-n solution vector.
    """
    M = np.asarray(M, dtype=np.complex128)
    y = np.asarray(y, dtype=np.complex128)
    if M.ndim != 2 or y.ndim != 1 or M.shape[0] != y.shape[0] or M.shape[0] < 1:
        raise DimensionError(f"least squares: matrix {M.shape} vs rhs {y.shape}")
    x, *_ = np.linalg.lstsq(M, y, rcond=rcond)
    return x


def condition_number(M: np.ndarray) -> float:
    """Ratio of largest to smallest singular value (``inf`` if rank-deficient)."""
    s = np.linalg.svd(np.asarray(M), compute_uv=False)
    if s.size == 0 or s[-1] == 0.0:
        return float("inf")
    return float(s[0] / s[-1])


def dominant_eigenvector(
    H: np.ndarray,
    iterations: int,
    seed: int | None = None,
) -> np.ndarray:
    """Power iteration on a Hermitian matrix.

    The start vector is the normalised all-ones vector, or a complex Gaussian
    draw when ``seed`` is given. Exactly ``iterations`` multiplications are
    performed; no convergence check is made. If an iterate collapses to zero
    (e.g. ``H == 0``) the normalised start vector is returned.
    """
    H = np.asarray(H, dtype=np.complex128)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise DimensionError(f"power iteration needs a square matrix, got {H.shape}")
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    n = H.shape[0]
    if seed is None:
        start = np.ones(n, dtype=np.complex128)
    else:
        rng = np.random.default_rng(seed)
        start = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    start /= np.linalg.norm(start)

    v = start
    for _ in range(iterations):
        w = H @ v
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            return start.copy()
        v = w / nrm
    return v
