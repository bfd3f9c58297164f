"""Independent reference values frozen into the test-suite.

Run ``python tests/oracles/generate.py`` to regenerate.  Nothing here imports
``nvvecsense``: every number is computed by a route that shares no code with
the package (mpmath root finding, order-statistic quadrature, closed forms).
"""
import json

import mpmath as mp
import numpy as np
from scipy import integrate, stats

mp.mp.dps = 40


def filter_factor(theta):
    return 1 + mp.cos(theta) - 2 * mp.cos(theta / 2)


def theta_opt():
    # stationary point of f(theta)/theta on the positive lobe (pi, 3pi)
    g = lambda th: mp.diff(lambda x: filter_factor(x) / x, th)
    return mp.findroot(g, 1.85 * mp.pi)


def expected_inverse_min(sigma, n=4):
    """E[1 / min_i (1 + sigma Z_i)] for n iid standard normals."""
    if sigma == 0:
        return 1.0

    def pdf(z):
        return n * stats.norm.pdf(z) * stats.norm.sf(z) ** (n - 1)

    val, _ = integrate.quad(lambda z: pdf(z) / (1 + sigma * z), -9, 9,
                            epsabs=1e-14, epsrel=1e-13, limit=400)
    return val


def expected_sqrt_max(sigma, n=4):
    """E[sqrt(max_i (1 + sigma Z_i))] for n iid standard normals."""
    if sigma == 0:
        return 1.0

    def pdf(z):
        return n * stats.norm.pdf(z) * stats.norm.cdf(z) ** (n - 1)

    val, _ = integrate.quad(lambda z: pdf(z) * np.sqrt(1 + sigma * z), -9, 9,
                            epsabs=1e-14, epsrel=1e-13, limit=400)
    return val


def main():
    th = theta_opt()
    out = {
        "theta_opt": float(th),
        "theta_opt_over_pi": float(th / mp.pi),
        "filter_at_opt": float(filter_factor(th)),
        "objective_at_opt": float(filter_factor(th) / th),
        "omega_over_gamma": float(4 * th),
        "dc_weight_example": float(mp.mpf("0.005") * mp.e ** mp.mpf(-0.5) * mp.mpf("2.5e-7")),
        # r(sigma') = E[mean/min(delta_alpha)] * E[sqrt(max(gamma)/mean)]
        "r_sigma": {
            f"{s:.2f}": expected_inverse_min(s) * expected_sqrt_max(s)
            for s in np.round(np.arange(0, 0.101, 0.01), 2)
        },
    }
    print(json.dumps(out, indent=2))


if __name__ == "__main__":
    main()
