"""Run a reduced sweep and write the CSV report (and figures if matplotlib is present).

Same as ``gp-locate sweep --config table1 --out sweep_out`` with fewer trials.

    python demos/small_sweep.py [out_dir]
"""

import sys

from gp_locate import harness
from gp_locate.config import bundled_config

out = sys.argv[1] if len(sys.argv) > 1 else "sweep_out"
config = bundled_config("table1").replace(mc_trials=10)
result = harness.run_experiment(config)
for path in harness.emit_report(result, out):
    print("wrote", path)

for a in result.aggregate():
    print(f"{a['method']:5s} M={a['M']:3d} sigma_z2={a['sigma_z2']:g}  "
          f"rmse {a['rmse_m_mean']:6.2f} +- {a['rmse_m_se']:.2f}  "
          f"coverage {a['coverage_2sigma_mean']:.2f}")
