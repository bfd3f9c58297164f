"""Sequential single-axis readout versus driving all four axes at once.

With small readout contrast the idle axes only add background photons, so the
parallel protocol wins by a factor that tends to four.
"""
import numpy as np

from nvvecsense import EnsembleParams
from nvvecsense.protocols import Kind, improvement_ratio, make_plan, sensitivity

for alpha1 in (0.01, 0.015, 0.019, 0.0199, 0.01999):
    params = EnsembleParams.homogeneous(0.02, alpha1, 1e6, 5e5)
    conv = sensitivity(make_plan(Kind.CONV_DC, "x", params), params, 1.0)
    mf = sensitivity(make_plan(Kind.MF_DC, "x", params), params, 1.0)
    print(f"alpha1/alpha0 = {alpha1 / 0.02:.4f}: "
          f"dB_conv = {conv.delta_B * 1e9:9.3f} nT, dB_mf = {mf.delta_B * 1e9:9.3f} nT, "
          f"DC ratio {improvement_ratio(params):.4f}, "
          f"AC ratio {improvement_ratio(params, ac=True):.4f}")

# where the DC optimum sits
params = EnsembleParams.homogeneous(0.02, 0.01, 1e6)
plan = make_plan(Kind.MF_DC, "x", params)
ts = np.linspace(0.1, 1.0, 10) / 1e6
print("\nt (us)  normalised dB (nT sqrt(s))")
for t in ts:
    rep = sensitivity(make_plan(Kind.MF_DC, "x", params, t=float(t)), params, 1.0)
    mark = "  <- 1/(4 gamma)" if np.isclose(t, 2.5e-7) else ""
    print(f"{t * 1e6:6.2f}  {rep.normalized * 1e9:.4f}{mark}")
