"""How much sensitivity the compensation costs as the ensemble spreads out.

r(sigma) is the mean compensated uncertainty relative to the homogeneous case;
DC and AC sensing give the same curve.
"""
import numpy as np

from nvvecsense.compensation import sensitivity_ratio_curve

sigmas = np.round(np.arange(0, 0.101, 0.02), 2)
dc = sensitivity_ratio_curve(sigmas, samples=20_000, seed=0, mode="dc", workers=2)
ac = sensitivity_ratio_curve(sigmas, samples=20_000, seed=0, mode="ac", workers=2)
print("sigma'   r_DC              r_AC")
for s, a, ea, b, eb in zip(sigmas, dc.r_mean, dc.r_stderr, ac.r_mean, ac.r_stderr):
    print(f"{s:5.2f}   {a:.4f} +- {ea:.4f}   {b:.4f} +- {eb:.4f}")
