"""Limited-memory BFGS with a strong-Wolfe line search.

Operates on real 1-D float arrays. Complex unknowns are handled by the
caller through a real view (``z.view(np.float64)``), i.e. interleaved
real/imaginary stacking.

Line search follows Nocedal & Wright, *Numerical Optimization* (2006),
Algorithms 3.5 (bracketing) and 3.6 (zoom) with safeguarded cubic
interpolation.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Callable

import numpy as np

Objective = Callable[[np.ndarray], "tuple[float, np.ndarray]"]


class NonFiniteObjectiveError(FloatingPointError):
    """The objective or its gradient evaluated to NaN/Inf."""


@dataclass
class LBFGSResult:
    x: np.ndarray
    f: float
    grad_norm: float
    iterations: int
    evaluations: int
    converged: bool
    message: str


def _cubic_min(a, fa, da, b, fb, db):
    """Minimiser of the cubic through (a, fa, da) and (b, fb, db), or None."""
    d1 = da + db - 3.0 * (fa - fb) / (a - b)
    rad = d1 * d1 - da * db
    if rad < 0.0:
        return None
    d2 = np.sign(b - a) * np.sqrt(rad)
    denom = db - da + 2.0 * d2
    if denom == 0.0:
        return None
    return b - (b - a) * (db + d2 - d1) / denom


class _LineFunction:
    def __init__(self, fun: Objective, x: np.ndarray, d: np.ndarray):
        self.fun, self.x, self.d = fun, x, d
        self.evaluations = 0

    def __call__(self, alpha: float):
        f, g = self.fun(self.x + alpha * self.d)
        self.evaluations += 1
        if not np.isfinite(f) or not np.all(np.isfinite(g)):
            raise NonFiniteObjectiveError(f"objective not finite at step {alpha:g}")
        return f, g, float(g @ self.d)


def strong_wolfe(
    phi: _LineFunction,
    f0: float,
    dphi0: float,
    alpha0: float,
    c1: float = 1e-4,
    c2: float = 0.9,
    max_evals: int = 30,
    alpha_max: float = 1e10,
):
    """Find a step satisfying the strong Wolfe conditions.

    Returns ``(alpha, f, g)`` or ``None`` when no step with sufficient
    decrease was found within ``max_evals`` evaluations.
    """
    a_prev, f_prev, d_prev, g_prev = 0.0, f0, dphi0, None
    alpha = alpha0
    evals = 0
    while evals < max_evals:
        f, g, dphi = phi(alpha)
        evals += 1
        if f > f0 + c1 * alpha * dphi0 or (evals > 1 and f >= f_prev):
            return _zoom(phi, f0, dphi0, a_prev, f_prev, d_prev, alpha, f, dphi,
                         g_prev, c1, c2, max_evals - evals)
        if abs(dphi) <= -c2 * dphi0:
            return alpha, f, g
        if dphi >= 0.0:
            return _zoom(phi, f0, dphi0, alpha, f, dphi, a_prev, f_prev, d_prev,
                         g, c1, c2, max_evals - evals)
        a_prev, f_prev, d_prev, g_prev = alpha, f, dphi, g
        alpha = min(4.0 * alpha, alpha_max)
    # extrapolation budget exhausted; last point still decreased
    if a_prev > 0.0:
        return a_prev, f_prev, g_prev
    return None


def _zoom(phi, f0, dphi0, a_lo, f_lo, d_lo, a_hi, f_hi, d_hi, g_lo, c1, c2, budget):
    for _ in range(max(budget, 0)):
        lo, hi = min(a_lo, a_hi), max(a_lo, a_hi)
        width = hi - lo
        alpha = _cubic_min(a_lo, f_lo, d_lo, a_hi, f_hi, d_hi)
        if alpha is None or not (lo + 0.1 * width <= alpha <= hi - 0.1 * width):
            alpha = 0.5 * (lo + hi)
        if width <= 1e-16 * max(hi, 1.0):
            break
        f, g, dphi = phi(alpha)
        if f > f0 + c1 * alpha * dphi0 or f >= f_lo:
            a_hi, f_hi, d_hi = alpha, f, dphi
        else:
            if abs(dphi) <= -c2 * dphi0:
                return alpha, f, g
            if dphi * (a_hi - a_lo) >= 0.0:
                a_hi, f_hi, d_hi = a_lo, f_lo, d_lo
            a_lo, f_lo, d_lo, g_lo = alpha, f, dphi, g
    # accept the best sufficient-decrease point seen, if any
    if a_lo > 0.0 and g_lo is not None and f_lo < f0:
        return a_lo, f_lo, g_lo
    return None


def minimize_lbfgs(
    fun: Objective,
    x0: np.ndarray,
    max_iterations: int = 2000,
    memory: int = 10,
    gradient_tolerance: float = 1e-12,
    c1: float = 1e-4,
    c2: float = 0.9,
    callback: Callable[[np.ndarray, float], None] | None = None,
) -> LBFGSResult:
    """Minimise ``fun`` (returning value and gradient) from ``x0``.

    ``callback(x, f)`` is invoked after every accepted step.

    Stops after ``max_iterations`` iterations, when the gradient norm drops
    below ``gradient_tolerance`` times its initial value, or when no step
    with sufficient decrease exists along steepest descent. Every accepted
    step strictly decreases the objective, so the final iterate is the best.
    """
    x = np.array(x0, dtype=float)
    f, g = fun(x)
    evaluations = 1
    if not np.isfinite(f) or not np.all(np.isfinite(g)):
        raise NonFiniteObjectiveError("objective not finite at the starting point")
    gnorm = float(np.linalg.norm(g))
    target = gradient_tolerance * gnorm
    s_hist: deque = deque(maxlen=memory)
    y_hist: deque = deque(maxlen=memory)
    rho_hist: deque = deque(maxlen=memory)

    if gnorm == 0.0:
        return LBFGSResult(x, f, gnorm, 0, evaluations, True, "stationary start")

    it = 0
    message = "iteration limit"
    converged = False
    while it < max_iterations:
        # two-loop recursion
        d = -g
        if s_hist:
            alphas = []
            q = g.copy()
            for s, y, rho in zip(reversed(s_hist), reversed(y_hist), reversed(rho_hist)):
                a = rho * (s @ q)
                q -= a * y
                alphas.append(a)
            gamma = (s_hist[-1] @ y_hist[-1]) / (y_hist[-1] @ y_hist[-1])
            r = gamma * q
            for (s, y, rho), a in zip(zip(s_hist, y_hist, rho_hist), reversed(alphas)):
                b = rho * (y @ r)
                r += (a - b) * s
            d = -r
        dphi0 = float(g @ d)
        if not s_hist or dphi0 >= 0.0:
            s_hist.clear(), y_hist.clear(), rho_hist.clear()
            d = -g
            dphi0 = -gnorm * gnorm
            alpha0 = min(1.0, 1.0 / gnorm)
        else:
            alpha0 = 1.0

        phi = _LineFunction(fun, x, d)
        step = strong_wolfe(phi, f, dphi0, alpha0, c1, c2)
        evaluations += phi.evaluations
        if step is None:
            if s_hist:
                s_hist.clear(), y_hist.clear(), rho_hist.clear()
                continue
            message = "line search failed along steepest descent"
            break
        alpha, f_new, g_new = step
        it += 1
        s = alpha * d
        y = g_new - g
        sy = float(s @ y)
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            s_hist.append(s)
            y_hist.append(y)
            rho_hist.append(1.0 / sy)
        x = x + s
        f, g = f_new, g_new
        gnorm = float(np.linalg.norm(g))
        if callback is not None:
            callback(x, f)
        if gnorm <= target:
            converged = True
            message = "gradient tolerance reached"
            break
    return LBFGSResult(x, f, gnorm, it, evaluations, converged, message)
