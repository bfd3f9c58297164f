"""Equal-weight schedules for an inhomogeneous ensemble.

Draws 200 contrasts and dephasing rates, then picks a free-evolution time per
sample so every signal weight equals the common target.
"""
import numpy as np

from nvvecsense.compensation import draw_parameters, solve_schedule

rng = np.random.default_rng(1)
draws = draw_parameters(rng, 200, 0.01, 0.001, 1e6, 1e5)
for mode in ("dc", "ac"):
    s = solve_schedule(draws, mode)
    print(f"{mode.upper()}: target weight {s.target:.4e}, t_max {s.t_max * 1e9:.1f} ns")
    print(f"    t_j range {s.times.min() * 1e9:.1f} .. {s.times.max() * 1e9:.1f} ns, "
          f"max relative weight error {s.max_relative_error():.1e}")
    if s.omega_ac is not None:
        print(f"    omega_ac = {s.omega_ac:.4e} rad/s")
