"""Gaussian-process regression from RSS vectors to one location coordinate.

The covariance between the coordinates of two users with RSS vectors ``p``
and ``q`` is

    alpha * exp(-0.5 * sum_m (p_m - q_m)**2 / beta_m) + gamma * p @ q
        + sigma_er2 * [same user]

i.e. an ARD squared-exponential term, an inner-product term and a known
label-noise term.  ``alpha``, ``beta`` and ``gamma`` are learned by maximizing
the log marginal likelihood in log space with conjugate gradients.
"""

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg
from scipy.linalg import lapack
from scipy.spatial.distance import cdist

from . import _rng
from .errors import DomainError, NumericalError
from .optimize import minimize_cg

MODEL_FORMAT_VERSION = 1

JITTER_START = 1e-8
JITTER_MAX = 1e-2

# log-space initialization ranges for training restarts
INIT_LOG_ALPHA = (math.log(1.0), math.log(1e4))
INIT_LOG_BETA = (math.log(1.0), math.log(1e4))
INIT_LOG_GAMMA = (math.log(1e-6), math.log(1.0))


@dataclass(frozen=True, eq=False)
class Hyperparameters:
    """Kernel parameters ``theta = [alpha, beta_1..beta_M, gamma]`` plus the
    known label-noise variance ``sigma_er2`` (never optimized)."""

    alpha: float
    beta: np.ndarray
    gamma: float
    sigma_er2: float = 0.0

    def __post_init__(self):
        beta = np.atleast_1d(np.asarray(self.beta, dtype=float)).copy()
        beta.setflags(write=False)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "gamma", float(self.gamma))
        object.__setattr__(self, "sigma_er2", float(self.sigma_er2))
        if beta.ndim != 1 or beta.size == 0:
            raise DomainError("beta must be a non-empty vector")
        if not (self.alpha > 0 and self.gamma > 0 and np.all(beta > 0)):
            raise DomainError("alpha, gamma and every beta_m must be > 0")
        if not self.sigma_er2 >= 0:
            raise DomainError("sigma_er2 must be >= 0")

    @property
    def num_inputs(self):
        return self.beta.size

    def to_vector(self):
        """Linear-space ``[alpha, beta..., gamma]``."""
        return np.concatenate([[self.alpha], self.beta, [self.gamma]])

    def to_log(self):
        return np.log(self.to_vector())

    @classmethod
    def from_vector(cls, theta, sigma_er2=0.0):
        theta = np.asarray(theta, dtype=float)
        return cls(theta[0], theta[1:-1], theta[-1], sigma_er2)

    @classmethod
    def from_log(cls, log_theta, sigma_er2=0.0):
        return cls.from_vector(np.exp(log_theta), sigma_er2)


def covariance(p, q, hyper, same_index=False):
    """Covariance of the coordinates of two users with RSS vectors ``p``, ``q``.

    The label-noise term is index based: it is added only when
    ``same_index`` is true (the diagonal of a same-set kernel matrix), never
    for two distinct users that happen to share an RSS vector.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != (hyper.num_inputs,) or q.shape != (hyper.num_inputs,):
        raise DomainError(
            f"RSS vectors must have length {hyper.num_inputs}, got {p.shape} and {q.shape}"
        )
    diff = p - q
    value = hyper.alpha * math.exp(-0.5 * float(np.sum(diff * diff / hyper.beta)))
    value += hyper.gamma * float(p @ q)
    if same_index:
        value += hyper.sigma_er2
    return value


def _check_inputs(a, hyper, name="inputs"):
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.ndim != 2 or a.shape[1] != hyper.num_inputs:
        raise DomainError(f"{name} must have {hyper.num_inputs} columns, got shape {a.shape}")
    return a


def _se_part(a, b, hyper):
    scale = np.sqrt(hyper.beta)
    sq = cdist(a / scale, b / scale, "sqeuclidean")
    return hyper.alpha * np.exp(-0.5 * sq)


def kernel_matrix(a, b, hyper, same_set=False):
    """Kernel matrix with entries ``covariance(a_i, b_j, same_set and i == j)``."""
    a = _check_inputs(a, hyper, "a")
    b = _check_inputs(b, hyper, "b")
    k = _se_part(a, b, hyper) + hyper.gamma * (a @ b.T)
    if same_set:
        if a.shape != b.shape:
            raise DomainError("same_set kernel needs two matrices of equal shape")
        k = 0.5 * (k + k.T)
        k[np.diag_indices_from(k)] += hyper.sigma_er2
    return k


def kernel_diag(a, hyper):
    """Diagonal of the same-set kernel matrix: ``alpha + gamma |p|^2 + sigma_er2``."""
    a = _check_inputs(a, hyper)
    return hyper.alpha + hyper.gamma * np.einsum("ij,ij->i", a, a) + hyper.sigma_er2


def cholesky_with_jitter(k):
    """Lower Cholesky factor of ``k + jitter * I``.

    The plain factorization is tried first.  On failure jitter starts at
    ``1e-8 * mean(diag k)`` and grows tenfold up to ``1e-2 * mean(diag k)``.

    Returns
    -------
    chol : ndarray
    jitter : float
        0.0 when no jitter was needed.
    """
    if not np.all(np.isfinite(k)):
        raise NumericalError("kernel matrix has non-finite entries")
    scale = float(np.mean(np.diag(k)))
    if not scale > 0:
        raise NumericalError("kernel matrix has a non-positive mean diagonal")
    try:
        return scipy.linalg.cholesky(k, lower=True), 0.0
    except np.linalg.LinAlgError:
        pass
    jitter = JITTER_START * scale
    limit = JITTER_MAX * scale * (1 + 1e-9)
    eye = np.eye(k.shape[0])
    while jitter <= limit:
        try:
            return scipy.linalg.cholesky(k + jitter * eye, lower=True), jitter
        except np.linalg.LinAlgError:
            jitter *= 10.0
    raise NumericalError(
        f"Cholesky factorization failed with jitter up to {jitter / 10.0:.3g}",
        jitter=jitter / 10.0,
    )


def _prepare(hyper, inputs, labels):
    x = _check_inputs(inputs, hyper)
    y = np.asarray(labels, dtype=float).ravel()
    if y.shape[0] != x.shape[0]:
        raise DomainError(f"{x.shape[0]} input rows but {y.shape[0]} labels")
    return x, y


def _lml_from_chol(chol, y):
    psi = scipy.linalg.cho_solve((chol, True), y)
    n = y.shape[0]
    lml = -0.5 * float(y @ psi) - float(np.sum(np.log(np.diag(chol)))) - 0.5 * n * math.log(2 * math.pi)
    return lml, psi


def log_marginal_likelihood(hyper, inputs, labels):
    """Log probability of the labels under the zero-mean GP prior."""
    x, y = _prepare(hyper, inputs, labels)
    chol, _ = cholesky_with_jitter(kernel_matrix(x, x, hyper, same_set=True))
    return _lml_from_chol(chol, y)[0]


def lml_and_gradient(hyper, inputs, labels, log_space=True):
    """Log marginal likelihood and its gradient w.r.t. ``[alpha, beta..., gamma]``.

    Uses ``dL/dtheta_j = 0.5 * tr((psi psi^T - K^-1) dK/dtheta_j)`` with
    ``psi = K^-1 y``.  With ``log_space`` the gradient is taken w.r.t. the
    logarithms of the parameters.
    """
    x, y = _prepare(hyper, inputs, labels)
    se = _se_part(x, x, hyper)
    k = se + hyper.gamma * (x @ x.T)
    k = 0.5 * (k + k.T)
    k[np.diag_indices_from(k)] += hyper.sigma_er2
    chol, jitter = cholesky_with_jitter(k)
    lml, psi = _lml_from_chol(chol, y)

    k_inv, info = lapack.dpotri(chol, lower=1)
    if info != 0:
        raise NumericalError(f"inverse from Cholesky factor failed (info={info})")
    k_inv = np.tril(k_inv) + np.tril(k_inv, -1).T

    w = np.outer(psi, psi) - k_inv
    wse = w * se

    # d/d log alpha: dK = SE part
    g_alpha = 0.5 * float(np.sum(wse))

    # d/d log beta_m: dK_ij = SE_ij * (x_im - x_jm)^2 / (2 beta_m)
    xc = x - x.mean(axis=0)
    rows = wse.sum(axis=1)
    quad = np.einsum("im,im->m", xc, wse @ xc)
    pair_sums = 2.0 * (rows @ (xc * xc) - quad)
    g_beta = 0.5 * pair_sums / (2.0 * hyper.beta)

    # d/d log gamma: dK = gamma x x^T, 0.5 tr(W x x^T) = 0.5 (|x^T psi|^2 - tr(x^T K^-1 x))
    xt_psi = x.T @ psi
    g_gamma = 0.5 * hyper.gamma * (float(xt_psi @ xt_psi) - float(np.sum(x * (k_inv @ x))))

    if jitter > 0:
        # jitter is proportional to mean(diag K), which moves with alpha and gamma
        rel = 0.5 * float(np.trace(w)) * jitter / float(np.mean(np.diag(k)))
        g_alpha += rel * hyper.alpha
        g_gamma += rel * hyper.gamma * float(np.mean(np.sum(x * x, axis=1)))

    grad = np.concatenate([[g_alpha], g_beta, [g_gamma]])
    if not log_space:
        grad = grad / hyper.to_vector()
    return lml, grad


def lml_gradient(hyper, inputs, labels, log_space=True):
    return lml_and_gradient(hyper, inputs, labels, log_space)[1]


@dataclass(frozen=True, eq=False)
class TrainedModel:
    """A GP for one coordinate axis with cached factorization.

    ``chol_factor @ chol_factor.T`` equals the training kernel matrix plus
    ``jitter * I``; ``weights`` solves that system for ``train_labels``.
    """

    hyper: Hyperparameters
    train_inputs: np.ndarray
    train_labels: np.ndarray
    chol_factor: np.ndarray
    weights: np.ndarray
    jitter: float
    axis_tag: str = "x"
    final_lml: float = float("nan")
    n_iter: int = 0
    converged: bool = True
    restart_lmls: tuple = field(default=())

    @classmethod
    def from_hyperparameters(cls, hyper, inputs, labels, axis_tag="x", **info):
        """Condition a GP with fixed hyperparameters on training data."""
        x, y = _prepare(hyper, inputs, labels)
        chol, jitter = cholesky_with_jitter(kernel_matrix(x, x, hyper, same_set=True))
        lml, psi = _lml_from_chol(chol, y)
        for arr in (x, y, chol, psi):
            arr.setflags(write=False)
        info.setdefault("final_lml", lml)
        return cls(hyper, x, y, chol, psi, jitter, axis_tag, **info)

    @property
    def num_inputs(self):
        return self.hyper.num_inputs

    def checksum(self):
        return training_checksum(self.train_inputs, self.train_labels)

    def predict_moments(self, test_inputs):
        """Conventional GP predictive mean and marginal variance per test row.

        The prior self-covariance includes ``sigma_er2`` (same test index).
        Variances are returned unclamped.
        """
        p = _check_inputs(test_inputs, self.hyper, "test inputs")
        cross = kernel_matrix(p, self.train_inputs, self.hyper)
        mean = cross @ self.weights
        v = scipy.linalg.solve_triangular(self.chol_factor, cross.T, lower=True)
        var = kernel_diag(p, self.hyper) - np.einsum("ij,ij->j", v, v)
        return mean, var

    def to_dict(self):
        return {
            "format": "gp_locate.TrainedModel",
            "version": MODEL_FORMAT_VERSION,
            "axis_tag": self.axis_tag,
            "alpha": self.hyper.alpha,
            "beta": self.hyper.beta.tolist(),
            "gamma": self.hyper.gamma,
            "sigma_er2": self.hyper.sigma_er2,
            "jitter": self.jitter,
            "final_lml": self.final_lml,
            "n_iter": self.n_iter,
            "converged": self.converged,
            "training_checksum": self.checksum(),
            "train_inputs": self.train_inputs.tolist(),
            "train_labels": self.train_labels.tolist(),
        }

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict()) + "\n")

    @classmethod
    def from_dict(cls, data):
        if data.get("format") != "gp_locate.TrainedModel":
            raise DomainError("not a serialized TrainedModel")
        if data.get("version") != MODEL_FORMAT_VERSION:
            raise DomainError(f"unsupported model version {data.get('version')!r}")
        hyper = Hyperparameters(data["alpha"], data["beta"], data["gamma"], data["sigma_er2"])
        x = np.asarray(data["train_inputs"], dtype=float)
        y = np.asarray(data["train_labels"], dtype=float)
        if training_checksum(x, y) != data["training_checksum"]:
            raise DomainError("training data checksum mismatch")
        return cls.from_hyperparameters(
            hyper, x, y, axis_tag=data["axis_tag"], final_lml=data["final_lml"],
            n_iter=data.get("n_iter", 0), converged=data.get("converged", True),
        )

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))


def training_checksum(inputs, labels):
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(inputs, dtype="<f8").tobytes())
    h.update(np.ascontiguousarray(labels, dtype="<f8").tobytes())
    return h.hexdigest()


def random_initial_log_theta(num_inputs, rng):
    return np.concatenate([
        [rng.uniform(*INIT_LOG_ALPHA)],
        rng.uniform(*INIT_LOG_BETA, size=num_inputs),
        [rng.uniform(*INIT_LOG_GAMMA)],
    ])


def train(inputs, labels, sigma_er2, restarts=5, seed=0, axis_tag="x", max_iter=500,
          rel_tol=1e-4, initial=None):
    """Fit kernel parameters by maximizing the log marginal likelihood.

    Each restart starts from a random log-space point and runs
    Polak-Ribiere conjugate gradients; the restart with the highest final
    likelihood wins.

    Parameters
    ----------
    inputs : array_like, (L, M)
        Noise-free training RSS.
    labels : array_like, (L,)
        One coordinate of the training locations.
    sigma_er2 : float
        Known label-noise variance.
    restarts : int
    seed : int
    initial : sequence of log-theta vectors, optional
        Extra starting points tried before the random restarts.

    Returns
    -------
    TrainedModel
    """
    x = np.atleast_2d(np.asarray(inputs, dtype=float))
    y = np.asarray(labels, dtype=float).ravel()
    if x.shape[0] < 2:
        raise DomainError("training needs at least two points")
    if y.shape[0] != x.shape[0]:
        raise DomainError(f"{x.shape[0]} input rows but {y.shape[0]} labels")
    if restarts < 1 and not initial:
        raise DomainError("restarts must be >= 1")
    m = x.shape[1]

    def hyper_at(v):
        try:
            return Hyperparameters.from_log(v, sigma_er2)
        except DomainError as exc:
            # exp() under/overflow far from the data scale
            raise NumericalError(str(exc)) from exc

    def neg_lml(v):
        return -log_marginal_likelihood(hyper_at(v), x, y)

    def neg_lml_and_grad(v):
        lml, g = lml_and_gradient(hyper_at(v), x, y)
        return -lml, -g

    starts = [np.asarray(v, dtype=float) for v in (initial or [])]
    rng = _rng.stream(seed, "restarts")
    starts += [random_initial_log_theta(m, rng) for _ in range(restarts)]

    best = None
    lmls = []
    last_error = None
    for v0 in starts:
        try:
            res = minimize_cg(neg_lml, neg_lml_and_grad, v0, max_iter=max_iter, rel_tol=rel_tol)
        except NumericalError as exc:
            last_error = exc
            lmls.append(float("nan"))
            continue
        lmls.append(-res.fun)
        if best is None or -res.fun > -best.fun:
            best = res
    if best is None:
        raise NumericalError(f"all {len(starts)} training restarts failed: {last_error}",
                             jitter=getattr(last_error, "jitter", None))

    hyper = Hyperparameters.from_log(best.x, sigma_er2)
    return TrainedModel.from_hyperparameters(
        hyper, x, y, axis_tag=axis_tag, final_lml=-best.fun, n_iter=best.n_iter,
        converged=best.converged, restart_lmls=tuple(lmls),
    )
