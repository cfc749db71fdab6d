"""Acceptance gate at desk scale.

Runs the bundled ``table1`` scenario (M in {10, 30}, shadowing variances
1..5 dB^2, 50 trials, S = 10) plus an antenna sweep M in {10, 20, 30, 50, 100}
at 3 dB^2, and checks each criterion at its stated tolerance.  Every criterion
writes one PASS/FAIL line to the terminal summary; a failing criterion also
fails its test.
"""

import math
import statistics

import numpy as np
import pytest
from scipy.stats import spearmanr

from gp_locate import channel, cli, gp, harness, metrics, predict
from gp_locate.config import bundled_config
from gp_locate.gaussian import gaussian_product, log_gaussian_pdf
from gp_locate.gp import Hyperparameters, TrainedModel

SIGMAS = (1.0, 2.0, 3.0, 4.0, 5.0)
M_SWEEP = (10, 20, 30, 50, 100)


def record(log, key, passed, detail):
    log[key] = (bool(passed), detail)
    print(f"criterion {key}: {'PASS' if passed else 'FAIL'}  {detail}")
    assert passed, detail


@pytest.fixture(scope="module")
def config():
    return bundled_config("table1")


@pytest.fixture(scope="module")
def sweep(config):
    return harness.run_experiment(config)


@pytest.fixture(scope="module")
def cells(sweep):
    return {(a["method"], a["M"], a["sigma_z2"]): a for a in sweep.aggregate()}


@pytest.fixture(scope="module")
def m_sweep(config, sweep):
    cfg = config.replace(rrh_sweep=M_SWEEP, shadowing_variances=(3.0,))
    result = harness.run_experiment(cfg, models=sweep.models)
    return {(a["method"], a["M"]): a for a in result.aggregate()}


def fmt(values):
    return "[" + " ".join(f"{v:.3f}" for v in values) + "]"


def test_criterion_1_coverage_separation(cells, acceptance_log):
    nagp = {m: [cells[("NaGP", m, s)]["coverage_2sigma_mean"] for s in SIGMAS] for m in (10, 30)}
    cgp = {m: statistics.fmean(cells[("CGP", m, s)]["coverage_2sigma_mean"] for s in SIGMAS)
           for m in (10, 30)}
    ok = (all(c >= 0.85 for m in (10, 30) for c in nagp[m]) and cgp[10] <= 0.40 and cgp[30] <= 0.20)
    record(acceptance_log, 1, ok,
           f"NaGP coverage M=10 {fmt(nagp[10])} M=30 {fmt(nagp[30])} (need >= 0.85); "
           f"CGP mean coverage M=10 {cgp[10]:.3f} (<= 0.40), M=30 {cgp[30]:.3f} (<= 0.20)")


def test_criterion_2_lpd_ordering(cells, acceptance_log):
    gaps = {(m, s): cells[("NaGP", m, s)]["lpd_mean"] - cells[("CGP", m, s)]["lpd_mean"]
            for m in (10, 30) for s in SIGMAS}
    ok = all(g > 0 for g in gaps.values()) and all(gaps[(m, 5.0)] >= 1.0 for m in (10, 30))
    record(acceptance_log, 2, ok,
           f"min NaGP-CGP LPD gap {min(gaps.values()):.2f} nats; gap at 5 dB^2: "
           f"M=10 {gaps[(10, 5.0)]:.2f}, M=30 {gaps[(30, 5.0)]:.2f} (need >= 1)")


def test_criterion_3_rmse_trends(cells, m_sweep, acceptance_log):
    problems = []
    rho = {}
    for method in ("CGP", "NaGP"):
        for m in (10, 30):
            r = [cells[(method, m, s)]["rmse_m_mean"] for s in SIGMAS]
            rho[(method, m)] = spearmanr(SIGMAS, r).statistic
            if not math.isclose(rho[(method, m)], 1.0, rel_tol=1e-12):
                problems.append(f"{method} M={m} Spearman {rho[(method, m)]:.2f}")
        worse = [s for s in SIGMAS
                 if not cells[(method, 30, s)]["rmse_m_mean"] < cells[(method, 10, s)]["rmse_m_mean"]]
        if worse:
            problems.append(f"{method} RMSE(M=30) >= RMSE(M=10) at sigma_z2 {worse}")
        r50, r100 = m_sweep[(method, 50)]["rmse_m_mean"], m_sweep[(method, 100)]["rmse_m_mean"]
        if abs(r100 - r50) > 0.15 * r50:
            problems.append(f"{method} RMSE M=100 {r100:.2f} vs M=50 {r50:.2f} beyond 15%")
    curve = {method: fmt([m_sweep[(method, m)]["rmse_m_mean"] for m in M_SWEEP])
             for method in ("CGP", "NaGP")}
    detail = (f"RMSE vs M {M_SWEEP} at 3 dB^2: CGP {curve['CGP']} NaGP {curve['NaGP']}; "
              + ("; ".join(problems) if problems else "all trends hold"))
    record(acceptance_log, 3, not problems, detail)


def test_criterion_4_bcrlb_validity(cells, acceptance_log):
    problems = []
    for method in ("CGP", "NaGP"):
        for m in (10, 30):
            for s in SIGMAS:
                a = cells[(method, m, s)]
                if a["rmse_m_mean"] < a["bcrlb_m_mean"] - 2 * a["rmse_m_se"]:
                    problems.append(f"{method} M={m} s={s:g}: RMSE {a['rmse_m_mean']:.2f} < "
                                    f"BCRLB {a['bcrlb_m_mean']:.2f} - 2 SE")

        def rel_gap(m, s, method=method):
            a = cells[(method, m, s)]
            return (a["rmse_m_mean"] - a["bcrlb_m_mean"]) / a["bcrlb_m_mean"]

        tighter = sum(rel_gap(30, s) < rel_gap(10, s) for s in SIGMAS)
        if tighter < 4:
            problems.append(f"{method} gap tighter at M=30 for only {tighter}/5 variances "
                            f"(M=10 {fmt([rel_gap(10, s) for s in SIGMAS])}, "
                            f"M=30 {fmt([rel_gap(30, s) for s in SIGMAS])})")
    record(acceptance_log, 4, not problems, "; ".join(problems) or "RMSE >= BCRLB - 2 SE everywhere, "
                                                                     "gap tighter at M=30")


def _fd_gradient(h, x, y, step=1e-5):
    v = h.to_log()
    out = np.empty_like(v)
    for j in range(v.size):
        e = np.zeros_like(v)
        e[j] = step
        out[j] = (gp.log_marginal_likelihood(Hyperparameters.from_log(v + e, h.sigma_er2), x, y)
                  - gp.log_marginal_likelihood(Hyperparameters.from_log(v - e, h.sigma_er2), x, y)) / (2 * step)
    return out


def test_criterion_5_gradient(acceptance_log):
    rng = np.random.default_rng(2024)
    worst = 0.0
    n = 60
    for _ in range(n):
        m, size = int(rng.integers(1, 9)), int(rng.integers(2, 26))
        x = rng.uniform(-10, 10, size=(size, m))
        y = rng.normal(0, 10, size=size)
        h = Hyperparameters(math.exp(rng.uniform(math.log(0.1), math.log(100))),
                            np.exp(rng.uniform(0, math.log(100), size=m)),
                            math.exp(rng.uniform(math.log(1e-3), 0)), rng.uniform(0.1, 2.0))
        g, fd = gp.lml_gradient(h, x, y), _fd_gradient(h, x, y)
        worst = max(worst, float(np.max(np.abs(g - fd) / np.maximum(np.abs(fd), 1.0))))
    record(acceptance_log, 5, worst <= 1e-5,
           f"{n} random problems (M<=8, L<=25): worst scaled error {worst:.2e} (need <= 1e-5)")


def test_criterion_6_degeneracies(sweep, config, acceptance_log):
    model_x, model_y = sweep.models[10]
    scenario = harness.build_scenario(config)
    rss = harness.test_rss(config, scenario, 10, 4, 0)
    n = len(rss)
    cgp = predict.cgp_predict(model_x, model_y, rss)
    zero = predict.nagp_predict(model_x, model_y, rss, predict.TestNoiseModel.isotropic(0.0, n, 10), 10, 1)
    err_zero = max(float(np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-300)))
                   for a, b in [(zero.means_x, cgp.means_x), (zero.means_y, cgp.means_y),
                                (zero.vars_x, cgp.vars_x), (zero.vars_y, cgp.vars_y)])

    nagp = predict.nagp_predict(model_x, model_y, rss, predict.TestNoiseModel.isotropic(5.0, n, 10), 10, 1)
    led = nagp.samples
    err_ledger = 0.0
    for means, variances, var in [(led.means_x, led.vars_x, nagp.vars_x), (led.means_y, led.vars_y, nagp.vars_y)]:
        total = variances.mean(axis=1) + ((means - means.mean(axis=1)[:, None]) ** 2).mean(axis=1)
        err_ledger = max(err_ledger, float(np.max(np.abs(var - total) / total)))

    rng = np.random.default_rng(6)
    x = rng.uniform(-100, -40, size=(12, 3))
    labels = rng.uniform(0, 200, size=12)
    exact = TrainedModel.from_hyperparameters(Hyperparameters(2000.0, [50.0, 80.0, 60.0], 1e-5, 0.0), x, labels)
    mean, var = exact.predict_moments(x)
    err_interp = float(np.max(np.abs(mean - labels) / np.abs(labels)))
    max_var = float(np.max(np.abs(var)))

    err_product = 0.0
    for _ in range(200):
        d = int(rng.integers(1, 4))
        a = rng.normal(size=(d, d))
        a0 = rng.normal(size=(d, d))
        a, a0 = a @ a.T + 0.3 * np.eye(d), a0 @ a0.T + 0.3 * np.eye(d)
        u, u0, pt = rng.normal(size=d), rng.normal(size=d), rng.normal(size=d)
        leading, combined = gaussian_product(u, a, u0, a0)
        lhs = log_gaussian_pdf(pt, u, a) + log_gaussian_pdf(pt, u0, a0)
        rhs = log_gaussian_pdf(u, leading.mean, leading.cov) + log_gaussian_pdf(pt, combined.mean, combined.cov)
        err_product = max(err_product, abs(math.expm1(rhs - lhs)))

    ok = err_zero <= 1e-12 and err_ledger <= 1e-12 and err_interp <= 1e-6 and max_var <= 1e-6 \
        and err_product <= 1e-10
    record(acceptance_log, 6, ok,
           f"NaGP(0)-CGP {err_zero:.1e}; ledger {err_ledger:.1e}; interpolation {err_interp:.1e} "
           f"(max var {max_var:.1e}); product identity {err_product:.1e}")


def test_criterion_7_determinism(sweep, config, tmp_path, acceptance_log):
    harness.emit_report(sweep, tmp_path / "api", plots=False)
    code = cli.main(["sweep", "--config", "table1", "--out", str(tmp_path / "cli"), "--no-plots"])
    same = code == 0 and ((tmp_path / "api/detail.csv").read_bytes()
                          == (tmp_path / "cli/detail.csv").read_bytes())
    record(acceptance_log, 7, same,
           f"two table1 sweeps (seed {config.master_seed}): detail.csv byte-identical = {same}")


def _scalar_product_ok():
    leading, combined = gaussian_product(0.0, 1.0, 0.0, 1.0)
    return (leading.mean[0] == 0.0 and leading.cov[0, 0] == 2.0 and combined.mean[0] == 0.0
            and math.isclose(combined.cov[0, 0], 0.5, rel_tol=1e-15))


def _dist(vx, vy, method="NaGP"):
    vx, vy = np.asarray(vx, dtype=float), np.asarray(vy, dtype=float)
    return predict.PredictiveDistribution(np.zeros(vx.size), np.zeros(vx.size), vx, vy, method)


def test_criterion_8_derived_examples(acceptance_log):
    cfg = bundled_config("table1_literal")
    grid = channel.grid_layout(400, 200, 200)
    checks = {
        "grid enumeration": {tuple(p) for p in grid.tolist()}
        == {(5.0 + 10 * i, 5.0 + 10 * j) for i in range(20) for j in range(20)},
        "path loss 5 m": channel.path_loss_rss_db(5.0, cfg) == 21.0 - 47.5,
        "path loss 10 m": math.isclose(channel.path_loss_rss_db(10.0, cfg), -26.5 - 20 * math.log10(10)),
        "path loss 45 m": math.isclose(channel.path_loss_rss_db(45.0, cfg), -26.5 - 20 * math.log10(45)),
        "covariance example": math.isclose(
            gp.covariance([1.0, 2.0], [3.0, 1.0], Hyperparameters(2.0, [4.0, 1.0], 0.5, 0.0)),
            2 * math.exp(-0.5 * ((1 - 3) ** 2 / 4 + (2 - 1) ** 2 / 1)) + 0.5 * (1 * 3 + 2 * 1),
            rel_tol=1e-14),
        "single-point LML": math.isclose(
            gp.log_marginal_likelihood(Hyperparameters(2.0, [3.0], 0.25, 0.5), [[-4.0]], [1.5]),
            -0.5 * math.log(2 * math.pi) - 0.5 * math.log(6.5) - 1.5 ** 2 / 13.0, rel_tol=1e-14),
        "scalar product": _scalar_product_ok(),
        "bar 6.25": predict.two_sigma_bars(predict.PredictiveDistribution(
            np.zeros(1), np.zeros(1), np.array([6.25]), np.array([6.25]), "CGP"))[0][0] == 2 * math.sqrt(6.25),
        "rmse (3,4)": metrics.rmse([[3.0, 4.0]], predict.PredictiveDistribution(
            np.zeros(1), np.zeros(1), np.ones(1), np.ones(1), "CGP")) == math.hypot(3, 4),
        "bcrlb (1,3),(2,2)": metrics.bcrlb_rmse(predict.PredictiveDistribution(
            np.zeros(2), np.zeros(2), np.array([1.0, 3.0]), np.array([2.0, 2.0]), "NaGP")) == math.sqrt(8 / 2),
        "rmse (1,0),(0,1)": metrics.rmse([[1.0, 0.0], [0.0, 1.0]], _dist([1, 1], [1, 1])) == 1.0,
        "lpd zero error": math.isclose(metrics.lpd([[0.0, 0.0]], _dist([1], [1])), -math.log(2 * math.pi)),
        "lpd unit error": math.isclose(metrics.lpd([[1.0, 1.0]], _dist([1], [1])), -math.log(2 * math.pi) - 1),
        "coverage 3 of 4": metrics.coverage_2sigma([[0, 0], [1, 1], [-1, 1], [3, 0]],
                                                   _dist([1] * 4, [1] * 4)) == 0.75,
        "bcrlb isotropic v=2.5": math.isclose(metrics.bcrlb_rmse(_dist([2.5] * 3, [2.5] * 3)), math.sqrt(5.0)),
    }
    failed = [k for k, v in checks.items() if not v]
    record(acceptance_log, 8, not failed,
           f"{len(checks) - len(failed)}/{len(checks)} derived examples re-derived by their oracles here; "
           "the rest are asserted against oracles in the unit suites"
           + (f"; failed: {failed}" if failed else ""))
