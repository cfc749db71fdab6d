"""Prediction-quality metrics and the Bayesian Cramer-Rao bound on RMSE."""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, DomainError
from .predict import two_sigma_bars


@dataclass(frozen=True)
class MetricsReport:
    method: str
    num_rrh: int
    sigma_z2: float
    trial: int
    rmse: float
    lpd: float
    coverage_2sigma: float
    bcrlb_rmse: float
    seed: int
    mean_bar2_x: float = float("nan")
    mean_bar2_y: float = float("nan")


def _errors(truth, pred):
    truth = np.atleast_2d(np.asarray(truth, dtype=float))
    if truth.shape != (len(pred), 2):
        raise DomainError(f"truth has shape {truth.shape}, expected ({len(pred)}, 2)")
    if len(pred) < 1:
        raise DomainError("need at least one test user")
    return truth[:, 0] - pred.means_x, truth[:, 1] - pred.means_y


def rmse(truth, pred):
    """Root mean (over users) of the squared Euclidean location error."""
    ex, ey = _errors(truth, pred)
    return math.sqrt(float(np.mean(ex**2 + ey**2)))


def lpd(truth, pred):
    """Mean log predictive density per user from the per-axis marginals."""
    ex, ey = _errors(truth, pred)
    vx, vy = np.asarray(pred.vars_x), np.asarray(pred.vars_y)
    if np.any(vx <= 0) or np.any(vy <= 0):
        raise DomainError("log predictive density needs strictly positive variances")
    terms = np.log(vx) + np.log(vy) + ex**2 / vx + ey**2 / vy
    return -math.log(2 * math.pi) - float(np.sum(terms)) / (2 * len(pred))


def coverage_2sigma(truth, pred):
    """Fraction of users whose true location lies inside the 2-sigma box.

    Both axes must satisfy ``|error| <= 2 sqrt(var)``; the boundary counts
    as inside.
    """
    ex, ey = _errors(truth, pred)
    bx, by = two_sigma_bars(pred)
    inside = (np.abs(ex) <= bx) & (np.abs(ey) <= by)
    return float(np.mean(inside))


def bcrlb_rmse(pred_nagp):
    """Bound on RMSE: ``sqrt(sum(vars_x + vars_y) / L)`` from NaGP variances.

    The NaGP variances approximate the true predictive distribution, so the
    same bound serves both predictors; CGP variances are rejected.
    """
    if pred_nagp.method != "NaGP":
        raise ContractError(
            "the RMSE bound is computed from NaGP predictive variances for every "
            "method; pass the NaGP prediction"
        )
    total = float(np.sum(pred_nagp.vars_x) + np.sum(pred_nagp.vars_y))
    return math.sqrt(total / len(pred_nagp))


def evaluate(truth, pred, pred_nagp, *, num_rrh, sigma_z2, trial, seed):
    """All metrics for one prediction, with the bound taken from ``pred_nagp``."""
    bx, by = two_sigma_bars(pred)
    return MetricsReport(
        method=pred.method,
        num_rrh=int(num_rrh),
        sigma_z2=float(sigma_z2),
        trial=int(trial),
        rmse=rmse(truth, pred),
        lpd=lpd(truth, pred),
        coverage_2sigma=coverage_2sigma(truth, pred),
        bcrlb_rmse=bcrlb_rmse(pred_nagp),
        seed=int(seed),
        mean_bar2_x=float(np.mean(bx)),
        mean_bar2_y=float(np.mean(by)),
    )
