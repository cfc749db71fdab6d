"""Multivariate Gaussian identities: densities, conditioning and the product
of two Gaussian expressions."""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DomainError, NumericalError


@dataclass(frozen=True, eq=False)
class GaussianNd:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if cov.shape != (mean.size, mean.size):
            raise DomainError(f"covariance shape {cov.shape} does not match mean length {mean.size}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    def check(self, sym_tol=1e-12, eig_tol=1e-10):
        """Raise unless ``cov`` is symmetric and positive semidefinite."""
        scale = max(1.0, float(np.max(np.abs(self.cov))))
        if np.max(np.abs(self.cov - self.cov.T)) > sym_tol * scale:
            raise NumericalError("covariance is not symmetric")
        eig = np.linalg.eigvalsh(self.cov)
        if eig.min() < -eig_tol * max(eig.max(), 0.0):
            raise NumericalError("covariance is not positive semidefinite")
        return self

    def pdf(self, a):
        return gaussian_pdf(a, self.mean, self.cov)


def _as_gaussian_args(u, a_cov):
    u = np.atleast_1d(np.asarray(u, dtype=float))
    a_cov = np.atleast_2d(np.asarray(a_cov, dtype=float))
    if a_cov.shape != (u.size, u.size):
        raise DomainError(f"covariance shape {a_cov.shape} does not match mean length {u.size}")
    return u, a_cov


def _chol(a_cov):
    try:
        return scipy.linalg.cho_factor(a_cov, lower=True)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("covariance is not positive definite") from exc


def log_gaussian_pdf(a, u, a_cov):
    """``log N(a; u, A)`` for a positive definite ``A``."""
    u, a_cov = _as_gaussian_args(u, a_cov)
    a = np.atleast_1d(np.asarray(a, dtype=float))
    c = _chol(a_cov)
    r = a - u
    maha = float(r @ scipy.linalg.cho_solve(c, r))
    logdet = 2.0 * float(np.sum(np.log(np.diag(c[0]))))
    return -0.5 * (u.size * np.log(2 * np.pi) + logdet + maha)


def gaussian_pdf(a, u, a_cov):
    return float(np.exp(log_gaussian_pdf(a, u, a_cov)))


def gaussian_product(u, a_cov, u0, a0_cov):
    """Rewrite ``N(a; u, A) N(a; u0, A0)`` as ``N(u; u0, A + A0) N(a; u1, A1)``.

    ``A1 = (A^-1 + A0^-1)^-1`` and ``u1 = A1 (A^-1 u + A0^-1 u0)``, computed
    through the equivalent forms ``A1 = A (A + A0)^-1 A0`` and
    ``u1 = A0 (A + A0)^-1 u + A (A + A0)^-1 u0``, which need only one
    factorization.

    Returns
    -------
    leading : GaussianNd
        ``(u0, A + A0)``, the Gaussian evaluated at ``u`` in the constant factor.
    combined : GaussianNd
        ``(u1, A1)``.
    """
    u, a_cov = _as_gaussian_args(u, a_cov)
    u0, a0_cov = _as_gaussian_args(u0, a0_cov)
    if u.size != u0.size:
        raise DomainError("the two Gaussians have different dimensions")
    _chol(a_cov)
    _chol(a0_cov)
    s = a_cov + a0_cov
    c = _chol(s)
    a1 = a_cov @ scipy.linalg.cho_solve(c, a0_cov)
    a1 = 0.5 * (a1 + a1.T)
    u1 = a0_cov @ scipy.linalg.cho_solve(c, u) + a_cov @ scipy.linalg.cho_solve(c, u0)
    return GaussianNd(u0, s), GaussianNd(u1, a1)


def condition_gaussian(mean, cov, observed, values):
    """Distribution of the unobserved entries of ``N(mean, cov)`` given
    ``a[observed] = values``."""
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    observed = np.asarray(observed, dtype=int)
    hidden = np.setdiff1d(np.arange(mean.size), observed)
    c = _chol(cov[np.ix_(observed, observed)])
    cross = cov[np.ix_(hidden, observed)]
    resid = np.asarray(values, dtype=float) - mean[observed]
    cond_mean = mean[hidden] + cross @ scipy.linalg.cho_solve(c, resid)
    cond_cov = cov[np.ix_(hidden, hidden)] - cross @ scipy.linalg.cho_solve(c, cross.T)
    return GaussianNd(cond_mean, 0.5 * (cond_cov + cond_cov.T))
