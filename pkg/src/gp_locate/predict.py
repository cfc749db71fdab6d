"""Location predictors: conventional GP (CGP) and Monte-Carlo
moment-matching GP (NaGP) for noisy test RSS."""

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _rng
from .errors import DomainError, NumericalError
from .gp import kernel_diag

NEGATIVE_VARIANCE_TOL = 1e-9


@dataclass(frozen=True)
class SampleLedger:
    """Per-sample CGP moments behind an NaGP prediction, shape (L, S) each."""

    means_x: np.ndarray
    vars_x: np.ndarray
    means_y: np.ndarray
    vars_y: np.ndarray


@dataclass(frozen=True, eq=False)
class PredictiveDistribution:
    """Per-user Gaussian marginals for the x and y coordinates."""

    means_x: np.ndarray
    means_y: np.ndarray
    vars_x: np.ndarray
    vars_y: np.ndarray
    method: str
    samples: SampleLedger = None
    num_samples: int = 0
    seed: int = None

    def __post_init__(self):
        n = len(self.means_x)
        if not all(len(a) == n for a in (self.means_y, self.vars_x, self.vars_y)):
            raise DomainError("inconsistent prediction lengths")
        if self.method not in ("CGP", "NaGP"):
            raise DomainError(f"unknown method tag {self.method!r}")

    def __len__(self):
        return len(self.means_x)

    @property
    def means(self):
        return np.column_stack([self.means_x, self.means_y])


@dataclass(frozen=True)
class TestNoiseModel:
    """Diagonal shadowing covariance per test user, shape (L, M), in dB^2."""

    variances: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.variances, dtype=float))
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise DomainError("shadowing variances must be finite and >= 0")
        object.__setattr__(self, "variances", v)

    @classmethod
    def isotropic(cls, sigma_z2, num_users, num_rrh):
        return cls(np.full((num_users, num_rrh), float(sigma_z2)))


def _clamp_variance(var, prior):
    """Clamp tiny negative variances from cancellation; reject real ones."""
    floor = -NEGATIVE_VARIANCE_TOL * np.maximum(1.0, prior)
    if np.any(var < floor):
        raise NumericalError(f"negative predictive variance {var.min():.3g}")
    if np.any(var < 0):
        warnings.warn("clamping slightly negative predictive variances to 0", RuntimeWarning,
                      stacklevel=3)
        var = np.maximum(var, 0.0)
    return var


def _check_models(model_x, model_y, test_rss):
    p = np.atleast_2d(np.asarray(test_rss, dtype=float))
    m = model_x.num_inputs
    if model_y.num_inputs != m:
        raise DomainError("x and y models have different input dimensions")
    if p.ndim != 2 or p.shape[1] != m:
        raise DomainError(f"test RSS must have {m} columns, got shape {p.shape}")
    return p


def _moments(model, p):
    mean, var = model.predict_moments(p)
    return mean, _clamp_variance(var, kernel_diag(p, model.hyper))


def cgp_predict(model_x, model_y, test_rss):
    """Treat the test RSS as exact and condition each axis GP on it."""
    p = _check_models(model_x, model_y, test_rss)
    mx, vx = _moments(model_x, p)
    my, vy = _moments(model_y, p)
    return PredictiveDistribution(mx, my, vx, vy, "CGP")


def nagp_predict(model_x, model_y, test_rss, noise, num_samples, seed=0):
    """Moment-matched Monte-Carlo average of CGP predictions.

    For test user ``l`` we draw ``S`` inputs from ``N(p_l, Sigma_l)`` around
    the observed RSS, evaluate the CGP mean and variance at each sample and
    return the first two moments of the equal-weight mixture:

        mean = avg_s mu_s
        var  = avg_s (mu_s - mean)**2 + avg_s v_s

    Both axes share the same samples.  Each user draws from its own random
    stream keyed by ``(seed, user)``, so results do not depend on the order in
    which users are processed.  Samples are not re-thresholded.
    """
    p = _check_models(model_x, model_y, test_rss)
    if int(num_samples) != num_samples or num_samples < 1:
        raise DomainError(f"number of Monte-Carlo samples must be >= 1, got {num_samples}")
    s = int(num_samples)
    if not isinstance(noise, TestNoiseModel):
        noise = TestNoiseModel(noise)
    sigma = noise.variances
    if sigma.shape[0] == 1 and p.shape[0] > 1:
        sigma = np.broadcast_to(sigma, p.shape)
    if sigma.shape != p.shape:
        raise DomainError(f"noise model shape {sigma.shape} does not match test RSS {p.shape}")

    n, m = p.shape
    draws = np.empty((n, s, m))
    for l in range(n):
        # antenna-major so the first k antennas' draws do not depend on M
        e = _rng.stream(seed, "nagp", l).standard_normal(size=(m, s)).T
        draws[l] = p[l] + e * np.sqrt(sigma[l])
    # one CGP batch per sample keeps the arithmetic identical to cgp_predict,
    # so a zero-variance noise model reproduces CGP to the last bit
    mx, vx, my, vy = (np.empty((n, s)) for _ in range(4))
    for k in range(s):
        mx[:, k], vx[:, k] = _moments(model_x, draws[:, k, :])
        my[:, k], vy[:, k] = _moments(model_y, draws[:, k, :])
    ledger = SampleLedger(mx, vx, my, vy)

    mean_x = mx.mean(axis=1)
    mean_y = my.mean(axis=1)
    var_x = np.mean((mx - mean_x[:, None]) ** 2, axis=1) + vx.mean(axis=1)
    var_y = np.mean((my - mean_y[:, None]) ** 2, axis=1) + vy.mean(axis=1)
    return PredictiveDistribution(mean_x, mean_y, var_x, var_y, "NaGP", samples=ledger,
                                  num_samples=s, seed=seed)


def two_sigma_bars(pred):
    """Half-widths ``2 * sqrt(var)`` of the 2-sigma error bars, per axis."""
    return 2.0 * np.sqrt(pred.vars_x), 2.0 * np.sqrt(pred.vars_y)


PREDICTION_HEADER = ["user_id", "true_x", "true_y", "mean_x", "mean_y", "var_x", "var_y",
                     "bar2_x", "bar2_y", "method", "S", "seed"]


def write_predictions_csv(path, pred, truth=None):
    """Write one row per test user; ``true_x``/``true_y`` are blank when unknown."""
    bx, by = two_sigma_bars(pred)
    truth = None if truth is None else np.asarray(truth, dtype=float)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(PREDICTION_HEADER)
        for l in range(len(pred)):
            tx, ty = ("", "") if truth is None else (repr(float(truth[l, 0])), repr(float(truth[l, 1])))
            writer.writerow([
                l, tx, ty,
                repr(float(pred.means_x[l])), repr(float(pred.means_y[l])),
                repr(float(pred.vars_x[l])), repr(float(pred.vars_y[l])),
                repr(float(bx[l])), repr(float(by[l])),
                pred.method, pred.num_samples if pred.method == "NaGP" else "",
                "" if pred.seed is None else pred.seed,
            ])
