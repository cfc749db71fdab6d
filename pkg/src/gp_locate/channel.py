"""Geometry and large-scale-fading RSS generation.

RSS in dB follows ``p0 - 10 * eta(d) * log10(d) + z`` with ``p0 = tx_power +
ref_loss``, a piecewise path-loss exponent ``eta(d)`` and Gaussian shadowing
``z ~ N(0, sigma_z2)``.  Small-scale fading is assumed averaged out.
"""

import csv
import math

import numpy as np
from scipy.spatial.distance import cdist

from . import _rng
from .errors import ConfigurationError, DomainError


def place_rrh_and_users(config, seed):
    """Place RRHs, training users and test users in the service area.

    Parameters
    ----------
    config : ScenarioConfig
    seed : int

    Returns
    -------
    rrh : ndarray, (num_rrh, 2)
        RRH positions, i.i.d. uniform over the area.  Positions are drawn
        row by row, so for a fixed seed the first ``k`` RRHs do not depend on
        ``num_rrh``; nested antenna sets come for free.
    train : ndarray, (num_train, 2)
        A ``sqrt(L) x sqrt(L)`` grid of cell centres when
        ``train_layout == "grid"``, else i.i.d. uniform.
    test : ndarray, (num_test, 2)
        i.i.d. uniform.
    """
    w, h = config.area_width_m, config.area_height_m
    scale = np.array([w, h])

    rrh = _rng.stream(seed, "rrh").uniform(size=(config.num_rrh, 2)) * scale

    if config.train_layout == "grid":
        train = grid_layout(config.num_train, w, h)
    else:
        train = _rng.stream(seed, "train_users").uniform(size=(config.num_train, 2)) * scale

    test = _rng.stream(seed, "test_users").uniform(size=(config.num_test, 2)) * scale
    return rrh, train, test


def grid_layout(n, width, height):
    """Square grid of ``n`` cell-centred points, ordered row by row."""
    side = math.isqrt(n)
    if side * side != n:
        raise ConfigurationError(f"grid layout needs a perfect-square num_train, got {n}")
    xs = (np.arange(side) + 0.5) * (width / side)
    ys = (np.arange(side) + 0.5) * (height / side)
    gx, gy = np.meshgrid(xs, ys)
    return np.column_stack([gx.ravel(), gy.ravel()])


def pathloss_exponent(d, config):
    """Piecewise path-loss exponent ``eta(d)``.

    The first segment is ``d < b1``; every later segment includes its upper
    breakpoint.
    """
    d = np.asarray(d, dtype=float)
    idx = _segment_index(d, config.pathloss_breakpoints)
    etas = np.array([eta for _, eta in config.pathloss_breakpoints])
    return etas[idx]


def _segment_index(d, breakpoints):
    bounds = np.array([b for b, _ in breakpoints[:-1]], dtype=float)
    if bounds.size == 0:
        return np.zeros(d.shape, dtype=int)
    # first segment half-open, later ones closed above
    idx = np.searchsorted(bounds, d, side="left")
    idx = np.where(d < bounds[0], 0, np.maximum(idx, 1))
    return idx


def path_loss_rss_db(d, config):
    """Noise-free RSS in dBm at distance ``d`` (scalar or array).

    ``literal`` mode evaluates ``p0 - 10 * eta(d) * log10(d)`` exactly as
    written, which jumps at breakpoints where the exponent changes.
    ``continuous`` mode agrees with literal mode on the first segment with a
    non-zero exponent and chains the other segments from the breakpoint
    values, e.g. ``v(45) - 67 * log10(d / 45)`` beyond 45 m.
    """
    d_arr = np.asarray(d, dtype=float)
    if np.any(~(d_arr > 0)):
        raise DomainError("distance must be > 0")
    p0 = config.p0_dbm
    bps = config.pathloss_breakpoints
    idx = _segment_index(d_arr, bps)
    etas = np.array([eta for _, eta in bps])

    if config.pathloss_mode == "literal":
        out = p0 - 10.0 * etas[idx] * np.log10(d_arr)
    else:
        out = _continuous_rss(d_arr, idx, p0, bps)
    return float(out) if np.ndim(d) == 0 else out


def _continuous_rss(d, idx, p0, bps):
    etas = [eta for _, eta in bps]
    bounds = [b for b, _ in bps[:-1]]
    anchor = next((i for i, eta in enumerate(etas) if eta != 0.0), 0)

    # value and reference distance of each segment: v_i(d) = ref_val - 10 eta_i log10(d / ref_d)
    ref_d = [None] * len(etas)
    ref_val = [None] * len(etas)
    ref_d[anchor], ref_val[anchor] = 1.0, p0
    for i in range(anchor + 1, len(etas)):
        b = bounds[i - 1]
        prev = ref_val[i - 1] - 10.0 * etas[i - 1] * math.log10(b / ref_d[i - 1])
        ref_d[i], ref_val[i] = b, prev
    for i in range(anchor - 1, -1, -1):
        b = bounds[i]
        nxt = ref_val[i + 1] - 10.0 * etas[i + 1] * math.log10(b / ref_d[i + 1])
        ref_d[i], ref_val[i] = b, nxt

    rd = np.array(ref_d)[idx]
    rv = np.array(ref_val)[idx]
    return rv - 10.0 * np.array(etas)[idx] * np.log10(d / rd)


def distances(locations, rrh):
    """Pairwise user-to-RRH distances, shape (num_users, num_rrh)."""
    return cdist(np.atleast_2d(locations), np.atleast_2d(rrh))


def generate_rss(locations, rrh, sigma_z2, config, seed=0):
    """Per-user RSS vectors with optional shadowing.

    Parameters
    ----------
    locations : array_like, (L, 2)
    rrh : array_like, (M, 2)
    sigma_z2 : float
        Shadowing variance in dB^2; 0 gives the noise-free training matrix
        and consumes no random numbers.
    config : ScenarioConfig
    seed : int

    Returns
    -------
    ndarray, (L, M)
        RSS in dBm.  Shadowing for antenna ``m`` is drawn as one block for all
        users, so the first ``k`` columns do not depend on ``M``.
    """
    if sigma_z2 < 0:
        raise DomainError("shadowing variance must be >= 0")
    d = distances(locations, rrh)
    if np.any(d == 0):
        raise DomainError("a user is co-located with an RRH (distance 0)")
    rss = path_loss_rss_db(d, config)
    if sigma_z2 > 0:
        z = _rng.stream(seed, "shadowing").standard_normal(size=(d.shape[1], d.shape[0])).T
        rss = rss + math.sqrt(sigma_z2) * z
    return rss


def apply_sensitivity_threshold(rss, config):
    """Replace entries strictly below ``rx_sensitivity`` with ``noise_power``."""
    rss = np.asarray(rss, dtype=float)
    return np.where(rss < config.rx_sensitivity, config.noise_power, rss)


def write_matrix_csv(path, values, row_label="user", column_labels=None):
    """Write a matrix as CSV: header ``row_label, columns...``, one row per user."""
    values = np.atleast_2d(np.asarray(values, dtype=float))
    if column_labels is None:
        column_labels = [str(m) for m in range(values.shape[1])]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([row_label, *column_labels])
        for i, row in enumerate(values):
            writer.writerow([i, *(repr(float(v)) for v in row)])


def read_matrix_csv(path):
    """Inverse of :func:`write_matrix_csv`; returns the value matrix."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise DomainError(f"{path}: no data rows")
    return np.array([[float(v) for v in row[1:]] for row in rows[1:]])


def write_locations_csv(path, locations):
    write_matrix_csv(path, locations, row_label="id", column_labels=["x", "y"])
