"""Ramsey and echo fringes of a single NV axis, checked against the master equation.

Sweeps the field along the x direction and prints the |0> population from the
closed form next to the numerically integrated Lindblad dynamics.
"""
import numpy as np

from nvvecsense import EnsembleParams, PhysicalConstants
from nvvecsense.dynamics import echo_sequence, ramsey_sequence, run_sequence
from nvvecsense.protocols import optimize_theta

const = PhysicalConstants()
params = EnsembleParams.homogeneous(0.02, 0.01, 1e6, 5e5)
axis = 4

t = 1 / (4 * params.gamma[0])
print("Ramsey, t = 1/(4 gamma)")
print(f"{'B_x (uT)':>10} {'closed form':>12} {'oracle':>12}")
for bx in np.linspace(-10e-6, 10e-6, 9):
    seq = ramsey_sequence(t)
    cf = run_sequence(seq, [bx, 0, 0], axis, params, const)
    ode = run_sequence(seq, [bx, 0, 0], axis, params, const, mode="ode_oracle")
    print(f"{bx * 1e6:10.2f} {cf[0]:12.8f} {ode[0]:12.8f}")

# echo at the optimal phase omega t = theta_opt, with gamma' setting the time
t = 1 / (4 * params.gamma_prime[0])
omega = optimize_theta() / t
print(f"\nEcho, t = 1/(4 gamma'), omega_ac = {omega / params.gamma_prime[0]:.2f} gamma'")
print(f"{'B_ac (uT)':>10} {'closed form':>12} {'oracle':>12}")
for bx in np.linspace(-10e-6, 10e-6, 9):
    seq = echo_sequence(t)
    cf = run_sequence(seq, [bx, 0, 0], axis, params, const, omega_ac=omega)
    ode = run_sequence(seq, [bx, 0, 0], axis, params, const, mode="ode_oracle", omega_ac=omega)
    print(f"{bx * 1e6:10.2f} {cf[0]:12.8f} {ode[0]:12.8f}")
