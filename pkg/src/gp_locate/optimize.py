"""Nonlinear conjugate gradient (Polak-Ribiere+) with a backtracking
Armijo line search."""

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError


@dataclass
class CGResult:
    x: np.ndarray
    fun: float
    grad: np.ndarray
    n_iter: int
    converged: bool
    message: str


def minimize_cg(fun, fun_and_grad, x0, max_iter=500, rel_tol=1e-4, max_step=2.0,
                c1=1e-4, shrink=0.5, min_step=1e-12):
    """Minimize ``fun`` starting from ``x0``.

    Parameters
    ----------
    fun : callable
        ``fun(x) -> float``; used by the line search.  May raise
        :class:`NumericalError`, which the line search treats as an
        infeasible trial point.
    fun_and_grad : callable
        ``fun_and_grad(x) -> (float, ndarray)``.
    max_iter : int
    rel_tol : float
        Stop once ``||grad|| <= rel_tol * (1 + |f|)``.
    max_step : float
        Upper bound on the Euclidean length of a trial step.

    Returns
    -------
    CGResult
        ``converged`` is False when the iteration cap is hit or the line
        search cannot make progress; ``fun`` never exceeds ``fun(x0)``.
    """
    x = np.array(x0, dtype=float)
    n = x.size
    f, g = fun_and_grad(x)
    if not np.isfinite(f) or not np.all(np.isfinite(g)):
        raise NumericalError("objective is not finite at the starting point")
    d = -g
    prev_step = None
    prev_slope = None
    since_restart = 0

    for k in range(max_iter):
        gnorm = np.linalg.norm(g)
        if gnorm <= rel_tol * (1.0 + abs(f)):
            return CGResult(x, f, g, k, True, "gradient tolerance reached")

        slope = g @ d
        if slope >= 0:
            d = -g
            slope = -(g @ g)
            since_restart = 0

        dnorm = np.linalg.norm(d)
        if prev_step is None:
            t = 1.0
        else:
            t = prev_step * prev_slope / slope
        t = min(t, max_step / dnorm)

        accepted = _backtrack(fun, x, f, d, slope, t, c1, shrink, min_step / dnorm,
                              max_step / dnorm)
        if accepted is None:
            if since_restart == 0:
                return CGResult(x, f, g, k, False, "line search failed along steepest descent")
            d = -g
            since_restart = 0
            prev_step = None
            continue

        t, _ = accepted
        x_new = x + t * d
        f_new, g_new = fun_and_grad(x_new)

        # PR+ with periodic restart
        since_restart += 1
        if since_restart >= n:
            beta = 0.0
            since_restart = 0
        else:
            beta = max(0.0, g_new @ (g_new - g) / (g @ g))
        prev_step, prev_slope = t, slope
        x, f, g = x_new, f_new, g_new
        d = -g + beta * d

    gnorm = np.linalg.norm(g)
    converged = bool(gnorm <= rel_tol * (1.0 + abs(f)))
    return CGResult(x, f, g, max_iter, converged,
                    "gradient tolerance reached" if converged else "iteration cap reached")


def _quadratic_min(f0, slope, t, ft):
    """Minimizer of the parabola through f(0), f'(0) and f(t)."""
    curv = ft - f0 - slope * t
    if curv <= 0:
        return np.inf
    return -slope * t * t / (2.0 * curv)


def _backtrack(fun, x, f, d, slope, t, c1, shrink, t_min, t_max, expand=4.0, max_expand=6):
    """Armijo backtracking with safeguarded quadratic interpolation.

    When the first trial step is accepted the step is extrapolated while the
    interpolated minimizer lies beyond it and the objective keeps dropping.
    """
    def evaluate(step):
        try:
            value = fun(x + step * d)
        except NumericalError:
            return np.inf
        return value if np.isfinite(value) else np.inf

    first = True
    while t >= t_min:
        ft = evaluate(t)
        if ft <= f + c1 * t * slope:
            if first:
                for _ in range(max_expand):
                    t_next = min(_quadratic_min(f, slope, t, ft), expand * t, t_max)
                    if not t_next > 1.5 * t:
                        break
                    f_next = evaluate(t_next)
                    if not f_next < ft:
                        break
                    t, ft = t_next, f_next
            return t, ft
        first = False
        t_q = _quadratic_min(f, slope, t, ft) if np.isfinite(ft) else shrink * t
        t = min(max(t_q, 0.1 * t), shrink * t)
    return None
