"""One stochastic trajectory: recorded norms, stopping, energy balance.

Runs the semi-implicit Euler-Maruyama scheme on a small-data configuration,
prints the sampled norm series, demonstrates the H^1 stopping threshold, and
closes the deterministic L2 energy identity to O(dt).
"""

import numpy as np

from sllbar import (
    Grid,
    ModelParams,
    NoiseModel,
    SolverConfig,
    build_noise_modes,
    constant_field,
    run_trajectory,
)
from sllbar.diagnostics import (
    energy_balance_l2,
    states_from_trajectory,
    stopping_time,
)

grid = Grid(1, (np.pi,), (16,))
params = ModelParams(beta1=0.5, beta2=1.0, beta3=1.0, beta4=1.0, beta5=1.0)
noise = build_noise_modes(
    {"family": "eigenmode", "modes": [
        {"sigma": 0.1, "index": (1,), "direction": (1, 0, 0)},
        {"sigma": 0.1, "index": (2,), "direction": (0, 0, 1)},
    ]},
    grid,
)
u0 = constant_field(grid, (0.05, 0.0, 0.0))

# The zero state is unstable under the cubic penalty: |u| relaxes toward 1,
# i.e. the L2 norm toward sqrt(V) = sqrt(pi) = 1.7725.
cfg = SolverConfig(dt=0.01, t_end=20.0, record_every=200, seed=11)
rec = run_trajectory(u0, params, noise, cfg)
print("   t      |u|_L2    |u|_H1    |grad u|")
for i in range(len(rec.times)):
    print(f"{rec.times[i]:6.2f}   {rec.norms['l2'][i]:.4f}    "
          f"{rec.norms['h1'][i]:.4f}    {rec.norms['grad_l2'][i]:.4f}")
print("stop:", rec.stop_reason, "at t =", rec.stop_time)

# The discrete stopping time: first recorded exceedance of a threshold K.
print("tau^K for K=1.0:", stopping_time(rec, 1.0))
print("tau^K for K=5.0:", stopping_time(rec, 5.0))

# A low threshold turns the same run into an early stop; for the simulate
# subcommand this is recorded data, not an error.
tight = SolverConfig(dt=0.01, t_end=20.0, record_every=200, seed=11, blowup_K=1.0)
rec_stop = run_trajectory(u0, params, noise, tight)
print("with blowup_K=1:", rec_stop.stop_reason, "at t =", rec_stop.stop_time)

# Noise off, the L2 energy identity closes to O(dt): halving dt halves the
# largest defect.
for dt in (1e-2, 5e-3):
    cfg = SolverConfig(dt=dt, t_end=1.0, snapshot_every=1)
    det = run_trajectory(u0, params, NoiseModel.empty(grid), cfg)
    series = energy_balance_l2(states_from_trajectory(det), params, dt)
    print(f"dt={dt}: max |energy balance residual| = "
          f"{np.abs(series.values).max():.3e}")
