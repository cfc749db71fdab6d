"""Locate one batch of test users with CGP and NaGP and compare the metrics.

Builds the bundled table1 scenario, trains the x and y models for M = 10
antennas (about 20 s), then predicts one shadowing realization at 3 dB^2.

    python demos/single_trial.py
"""

import numpy as np

from gp_locate import harness, metrics, predict
from gp_locate.config import bundled_config

config = bundled_config("table1")
m, sigma_index = 10, 2
sigma_z2 = config.shadowing_variances[sigma_index]

scenario = harness.build_scenario(config)
_, train_rss = scenario.antennas(m)
model_x, model_y = harness.train_models(config, train_rss, scenario.train_locations, m, threads=2)
print(f"trained M={m}: LML x {model_x.final_lml:.1f}, y {model_y.final_lml:.1f}")

rss = harness.test_rss(config, scenario, m, sigma_index, trial=0)
noise = predict.TestNoiseModel.isotropic(sigma_z2, len(rss), m)
cgp = predict.cgp_predict(model_x, model_y, rss)
nagp = predict.nagp_predict(model_x, model_y, rss, noise, config.mc_samples, seed=0)

truth = scenario.test_locations
for pred in (cgp, nagp):
    print(f"{pred.method:5s} rmse {metrics.rmse(truth, pred):6.2f} m  "
          f"lpd {metrics.lpd(truth, pred):8.2f}  "
          f"coverage {metrics.coverage_2sigma(truth, pred):.2f}  "
          f"median 2-sigma bar {np.median(predict.two_sigma_bars(pred)[0]):5.2f} m")
print(f"bound  {metrics.bcrlb_rmse(nagp):6.2f} m")
