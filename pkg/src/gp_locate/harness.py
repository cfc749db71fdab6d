"""Monte-Carlo experiment over shadowing levels and antenna counts.

For every antenna count ``M`` the harness trains the x and y models once on
noise-free RSS and reuses them for every shadowing level and trial.  Each
trial redraws only the shadowing of the test RSS; user and RRH positions stay
fixed.  All random streams are keyed by ``(master_seed, purpose, indices)``,
so the output is a pure function of the configuration.
"""

import csv
import math
import os
import statistics
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _rng, channel, gp, metrics, predict
from .errors import ConfigurationError, ContractError, GPLocateError

DETAIL_HEADER = ["method", "M", "sigma_z2", "trial", "rmse_m", "lpd", "coverage_2sigma",
                 "bcrlb_m", "seed"]
AGGREGATE_METRICS = ["rmse_m", "lpd", "coverage_2sigma", "bcrlb_m"]
AGGREGATE_HEADER = ["method", "M", "sigma_z2", "n_trials"] + [
    f"{name}_{stat}" for name in AGGREGATE_METRICS for stat in ("mean", "se")
]
BARS_HEADER = ["method", "M", "sigma_z2", "trial", "mean_bar2_x", "mean_bar2_y"]

METHOD_TAGS = {"cgp": "CGP", "nagp": "NaGP"}


def thread_count():
    """Worker threads from ``GP_LOCATE_THREADS`` (unset or 0 means auto)."""
    raw = os.environ.get("GP_LOCATE_THREADS", "").strip()
    try:
        n = int(raw) if raw else 0
    except ValueError:
        raise ConfigurationError(f"GP_LOCATE_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise ConfigurationError("GP_LOCATE_THREADS must be >= 0")
    return n or (os.cpu_count() or 1)


@dataclass
class Scenario:
    """Placed geometry and noise-free training RSS for the largest antenna set."""

    rrh: np.ndarray
    train_locations: np.ndarray
    test_locations: np.ndarray
    train_rss: np.ndarray

    def antennas(self, m):
        return self.rrh[:m], self.train_rss[:, :m]


def build_scenario(config):
    seed = _rng.derive_seed(config.master_seed, "geometry")
    rrh, train, test = channel.place_rrh_and_users(config.replace(num_rrh=config.max_rrh), seed)
    train_rss = channel.generate_rss(train, rrh, 0.0, config)
    return Scenario(rrh, train, test, train_rss)


def train_models(config, train_rss, train_locations, num_rrh, threads=1):
    """Train independent x and y models; returns ``(model_x, model_y)``."""
    def fit(axis):
        seed = _rng.derive_seed(config.master_seed, "training", num_rrh, axis)
        return gp.train(train_rss, train_locations[:, axis], config.coord_noise_var,
                        restarts=config.train_restarts, seed=seed, axis_tag="xy"[axis])

    if threads > 1:
        with ThreadPoolExecutor(max_workers=2) as pool:
            return tuple(pool.map(fit, (0, 1)))
    return fit(0), fit(1)


def test_rss(config, scenario, num_rrh, sigma_index, trial):
    """Thresholded shadowed test RSS for one trial (same draws for every ``M``)."""
    sigma_z2 = config.shadowing_variances[sigma_index]
    seed = _rng.derive_seed(config.master_seed, "shadowing", sigma_index, trial)
    rrh = scenario.rrh[:num_rrh]
    rss = channel.generate_rss(scenario.test_locations, rrh, sigma_z2, config, seed)
    return channel.apply_sensitivity_threshold(rss, config)


@dataclass
class SweepResult:
    """Detail rows of a sweep plus the trained models that produced them."""

    rows: list
    config: object = None
    models: dict = field(default_factory=dict, repr=False)

    def aggregate(self):
        return aggregate_rows(self.rows)

    def sorted_rows(self):
        return sorted(self.rows, key=_row_key)


def _row_key(r):
    return (r.method, r.num_rrh, r.sigma_z2, r.trial)


def run_experiment(config, methods=None, threads=None, models=None):
    """Run the full sweep described by ``config``.

    Parameters
    ----------
    config : ScenarioConfig
    methods : sequence of {"cgp", "nagp"}, optional
        Defaults to ``config.methods``.  The RMSE bound always uses NaGP
        variances, so NaGP is evaluated even when only CGP is reported.
    threads : int, optional
        Defaults to :func:`thread_count`.  Results do not depend on it.
    models : dict, optional
        Pre-trained ``{M: (model_x, model_y)}`` to reuse.

    Returns
    -------
    SweepResult
    """
    methods = tuple(m.lower() for m in (methods or config.methods))
    bad = [m for m in methods if m not in METHOD_TAGS]
    if bad or not methods:
        raise ConfigurationError(f"unknown methods {bad}; choose from {sorted(METHOD_TAGS)}")
    if config.mc_trials < 1:
        raise ConfigurationError("mc_trials must be >= 1")
    threads = thread_count() if threads is None else max(1, int(threads))

    scenario = build_scenario(config)
    trained = dict(models or {})
    rows = []
    for m in config.rrh_sweep:
        _, train_rss = scenario.antennas(m)
        if m not in trained:
            try:
                trained[m] = train_models(config, train_rss, scenario.train_locations, m, threads)
            except GPLocateError as exc:
                raise type(exc)(f"training failed for M={m}: {exc}") from exc
        model_x, model_y = trained[m]

        cells = [(i, t) for i in range(len(config.shadowing_variances))
                 for t in range(config.mc_trials)]

        def one(cell, m=m, model_x=model_x, model_y=model_y):
            return _run_trial(config, scenario, m, model_x, model_y, methods, *cell)

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(one, cells))
        else:
            results = [one(c) for c in cells]
        for r in results:
            rows.extend(r)

    rows.sort(key=_row_key)
    return SweepResult(rows, config, trained)


def _run_trial(config, scenario, m, model_x, model_y, methods, sigma_index, trial):
    sigma_z2 = config.shadowing_variances[sigma_index]
    try:
        rss = test_rss(config, scenario, m, sigma_index, trial)
        noise = predict.TestNoiseModel.isotropic(sigma_z2, *rss.shape)
        nagp_seed = _rng.derive_seed(config.master_seed, "nagp", sigma_index, trial)
        preds = {
            "nagp": predict.nagp_predict(model_x, model_y, rss, noise, config.mc_samples,
                                         nagp_seed),
        }
        if "cgp" in methods:
            preds["cgp"] = predict.cgp_predict(model_x, model_y, rss)
        return [
            metrics.evaluate(scenario.test_locations, preds[name], preds["nagp"], num_rrh=m,
                             sigma_z2=sigma_z2, trial=trial, seed=config.master_seed)
            for name in methods
        ]
    except GPLocateError as exc:
        raise type(exc)(f"M={m}, sigma_z2={sigma_z2}, trial={trial}: {exc}") from exc


def aggregate_rows(rows):
    """Mean and standard error per ``(method, M, sigma_z2)`` cell.

    Returns a list of dicts with the keys of :data:`AGGREGATE_HEADER`, sorted
    by cell.  The standard error is ``stdev / sqrt(n)`` (NaN for one trial).
    """
    cells = {}
    for r in rows:
        cells.setdefault((r.method, r.num_rrh, r.sigma_z2), []).append(r)
    out = []
    for key in sorted(cells):
        group = sorted(cells[key], key=lambda r: r.trial)
        n = len(group)
        agg = {"method": key[0], "M": key[1], "sigma_z2": key[2], "n_trials": n}
        for name, attr in zip(AGGREGATE_METRICS, ("rmse", "lpd", "coverage_2sigma", "bcrlb_rmse")):
            values = [getattr(r, attr) for r in group]
            agg[f"{name}_mean"] = math.fsum(values) / n
            agg[f"{name}_se"] = statistics.stdev(values) / math.sqrt(n) if n > 1 else float("nan")
        out.append(agg)
    return out


def _fmt(v):
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_detail_csv(path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(DETAIL_HEADER)
        for r in sorted(rows, key=_row_key):
            writer.writerow([_fmt(v) for v in (r.method, r.num_rrh, r.sigma_z2, r.trial, r.rmse,
                                               r.lpd, r.coverage_2sigma, r.bcrlb_rmse, r.seed)])


def write_aggregate_csv(path, aggregates):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(AGGREGATE_HEADER)
        for agg in aggregates:
            writer.writerow([_fmt(agg[k]) for k in AGGREGATE_HEADER])


def write_bars_csv(path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(BARS_HEADER)
        for r in sorted(rows, key=_row_key):
            writer.writerow([_fmt(v) for v in (r.method, r.num_rrh, r.sigma_z2, r.trial,
                                               r.mean_bar2_x, r.mean_bar2_y)])


def read_detail_csv(path, bars_path=None):
    """Read ``detail.csv`` (and optionally ``bars.csv``) back into report rows."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != DETAIL_HEADER:
            raise ContractError(f"{path}: header must be {','.join(DETAIL_HEADER)}")
        records = list(reader)
    bars = {}
    if bars_path is not None and Path(bars_path).exists():
        with open(bars_path, newline="") as fh:
            for rec in csv.DictReader(fh):
                key = (rec["method"], int(rec["M"]), float(rec["sigma_z2"]), int(rec["trial"]))
                bars[key] = (float(rec["mean_bar2_x"]), float(rec["mean_bar2_y"]))
    rows = []
    for rec in records:
        try:
            key = (rec["method"], int(rec["M"]), float(rec["sigma_z2"]), int(rec["trial"]))
            bx, by = bars.get(key, (float("nan"), float("nan")))
            rows.append(metrics.MetricsReport(
                method=key[0], num_rrh=key[1], sigma_z2=key[2], trial=key[3],
                rmse=float(rec["rmse_m"]), lpd=float(rec["lpd"]),
                coverage_2sigma=float(rec["coverage_2sigma"]), bcrlb_rmse=float(rec["bcrlb_m"]),
                seed=int(rec["seed"]), mean_bar2_x=bx, mean_bar2_y=by,
            ))
        except (TypeError, ValueError) as exc:
            raise ContractError(f"{path}: malformed row {rec}: {exc}") from exc
    return rows


def emit_report(result, out_dir, plots=True):
    """Write ``detail.csv``, ``aggregate.csv``, ``bars.csv`` and figure files.

    Plotting is best effort: any failure becomes a warning and the CSVs are
    still written.

    Returns
    -------
    list of Path
    """
    rows = result.rows if isinstance(result, SweepResult) else list(result)
    if not rows:
        raise ContractError("cannot report an empty sweep")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / "detail.csv", out / "aggregate.csv", out / "bars.csv"]
    aggregates = aggregate_rows(rows)
    write_detail_csv(paths[0], rows)
    write_aggregate_csv(paths[1], aggregates)
    write_bars_csv(paths[2], rows)
    if plots:
        try:
            from .plots import plot_all

            paths.extend(plot_all(rows, aggregates, out))
        except Exception as exc:  # plots never fail the numeric pipeline
            warnings.warn(f"plot emission failed: {exc}", RuntimeWarning, stacklevel=2)
    return paths
