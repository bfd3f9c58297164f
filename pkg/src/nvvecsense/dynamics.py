"""Single-NV Ramsey and spin-echo evolution.

Two routes are provided.  The closed forms give the populations after the
standard sequences directly.  The ODE route integrates the dephasing master
equation

    d rho/dt = -i [H, rho] - gamma (rho - sz rho sz),   H = (D/2) sz + (L/2) sx

in the rotating frame and composes it with ideal instantaneous rotations
exp(-i angle sigma_n / 2).  It is used as an independent check of the closed
forms.

Conventions: |0> is the +1 eigenstate of sz.  With the initial pi/2 pulse
about y and the final pi/2 pulse about x the Ramsey fringe is
p0 = (1 + e^{-2 gamma t} sin phi) / 2.  The refocusing pulse of the echo
sequence is a pi rotation about y, which keeps the same fringe sign for the
echo phase.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
from scipy.integrate import solve_ivp

from .model import NVSenseError, PhysicalConstants, EnsembleParams, axis_direction, as_field, axis_index

PI = np.pi


class IntegrationError(NVSenseError):
    """The adaptive integrator could not meet its tolerance."""


class SequenceError(NVSenseError, ValueError):
    """A pulse sequence is not one of the recognised templates."""


def filter_factor(theta):
    """Echo filter factor f(theta) = 1 + cos(theta) - 2 cos(theta/2).

    For a field B sin(omega s) the echo accumulates gamma_gyro B.d f(omega t)/omega.
    f vanishes at theta = 0, pi, 3pi and 4pi; f(2pi) = 4 is the maximum.
    """
    theta = np.asarray(theta, dtype=float)
    return 1.0 + np.cos(theta) - 2.0 * np.cos(theta / 2.0)


def ramsey_phase(field, axis: int, t: float,
                 constants: PhysicalConstants = PhysicalConstants()) -> float:
    """phi = gamma_gyro (B . d_axis) t."""
    if t < 0:
        raise ValueError("t must be >= 0")
    return float(constants.gyromagnetic_ratio * (as_field(field) @ axis_direction(axis)) * t)


def echo_phase(field, axis: int, t: float, omega_ac: float,
               constants: PhysicalConstants = PhysicalConstants()) -> float:
    """theta = gamma_gyro (B . d_axis) f(omega_ac t) / omega_ac for an AC amplitude B."""
    if t < 0:
        raise ValueError("t must be >= 0")
    if not omega_ac > 0:
        raise ValueError("omega_ac must be > 0")
    proj = as_field(field) @ axis_direction(axis)
    return float(constants.gyromagnetic_ratio * proj * filter_factor(omega_ac * t) / omega_ac)


def ramsey_populations(phi, gamma, t, final_pulse_sign: int = 1):
    """Populations (p0, p1) after pi/2_y - free evolution - pi/2_x (sign +1) or 3pi/2_x (sign -1).

    Vectorised over array inputs.
    """
    if final_pulse_sign not in (1, -1):
        raise ValueError("final_pulse_sign must be +1 or -1")
    if np.any(np.asarray(gamma) < 0) or np.any(np.asarray(t) < 0):
        raise ValueError("gamma and t must be >= 0")
    p0 = 0.5 * (1.0 + final_pulse_sign * np.exp(-2.0 * np.asarray(gamma) * t) * np.sin(phi))
    return p0, 1.0 - p0


def echo_populations(theta, gamma_prime, t, final_pulse_sign: int = 1):
    """Echo analogue of :func:`ramsey_populations` with the echo phase and rate."""
    return ramsey_populations(theta, gamma_prime, t, final_pulse_sign)


# -- density-matrix oracle -------------------------------------------------

@dataclass(frozen=True)
class QubitState:
    """rho = [[p0, c], [c*, p1]] with c = coh_re + i coh_im."""

    p0: float
    p1: float
    coh_re: float = 0.0
    coh_im: float = 0.0

    @classmethod
    def ground(cls) -> "QubitState":
        return cls(1.0, 0.0)

    @classmethod
    def plus(cls) -> "QubitState":
        return cls(0.5, 0.5, 0.5, 0.0)

    @classmethod
    def from_matrix(cls, rho: np.ndarray) -> "QubitState":
        return cls(float(rho[0, 0].real), float(rho[1, 1].real),
                   float(rho[0, 1].real), float(rho[0, 1].imag))

    def matrix(self) -> np.ndarray:
        c = complex(self.coh_re, self.coh_im)
        return np.array([[self.p0, c], [c.conjugate(), self.p1]], dtype=complex)

    def vector(self) -> np.ndarray:
        return np.array([self.p0, self.p1, self.coh_re, self.coh_im])

    @property
    def bloch(self) -> np.ndarray:
        return np.array([2 * self.coh_re, -2 * self.coh_im, self.p0 - self.p1])

    def is_physical(self, tol: float = 1e-10) -> bool:
        trace_ok = abs(self.p0 + self.p1 - 1.0) <= tol
        return trace_ok and self.p0 * self.p1 >= self.coh_re ** 2 + self.coh_im ** 2 - tol


_SIGMA = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def rotation(axis: str, angle: float) -> np.ndarray:
    """Unitary exp(-i angle sigma_axis / 2)."""
    return np.cos(angle / 2) * np.eye(2) - 1j * np.sin(angle / 2) * _SIGMA[axis]


def rotate(state: QubitState, axis: str, angle: float) -> QubitState:
    u = rotation(axis, angle)
    return QubitState.from_matrix(u @ state.matrix() @ u.conj().T)


Detuning = Union[float, Callable[[float], float]]


def _rhs(detuning: Callable[[float], float], rabi: float, gamma: float):
    def f(s, y):
        p0, p1, cr, ci = y
        d = detuning(s)
        # dc/dt = -i D c - i (L/2)(p1 - p0) - 2 gamma c
        return (
            -rabi * ci,
            rabi * ci,
            d * ci - 2.0 * gamma * cr,
            -d * cr - 0.5 * rabi * (p1 - p0) - 2.0 * gamma * ci,
        )
    return f


def integrate_master_equation(initial: QubitState, detuning: Detuning, rabi: float,
                              gamma: float, t: float, *, t0: float = 0.0,
                              rtol: float = 1e-9, atol: float = 1e-12,
                              dense: bool = False):
    """Evolve ``initial`` for a duration ``t`` under the rotating-frame master equation.

    ``detuning`` is either a constant angular frequency or a callable of the
    absolute time ``s`` (the segment runs over ``[t0, t0 + t]``).  With
    ``dense=True`` the scipy solution object is returned alongside the state.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    if t == 0:
        return (initial, None) if dense else initial
    det = detuning if callable(detuning) else (lambda s, _d=float(detuning): _d)
    sol = solve_ivp(_rhs(det, rabi, gamma), (t0, t0 + t), initial.vector(),
                    method="DOP853", rtol=rtol, atol=atol, dense_output=dense)
    if sol.status != 0:
        raise IntegrationError(sol.message)
    final = QubitState(*sol.y[:, -1])
    return (final, sol) if dense else final


# -- pulse sequences ---------------------------------------------------------

@dataclass(frozen=True)
class Rotation:
    axis: str  # "x" or "y"
    angle: float

    def __post_init__(self):
        if self.axis not in ("x", "y"):
            raise ValueError("rotation axis must be 'x' or 'y'")


@dataclass(frozen=True)
class Evolve:
    duration: float

    def __post_init__(self):
        if self.duration < 0:
            raise ValueError("durations must be >= 0")


PulseSequence = tuple


def _final_rotation(sign: int) -> Rotation:
    if sign not in (1, -1):
        raise ValueError("final_pulse_sign must be +1 or -1")
    return Rotation("x", PI / 2 if sign == 1 else 3 * PI / 2)


def ramsey_sequence(t: float, final_pulse_sign: int = 1) -> PulseSequence:
    return (Rotation("y", PI / 2), Evolve(t), _final_rotation(final_pulse_sign))


def echo_sequence(t: float, final_pulse_sign: int = 1) -> PulseSequence:
    return (Rotation("y", PI / 2), Evolve(t / 2), Rotation("y", PI), Evolve(t / 2),
            _final_rotation(final_pulse_sign))


def _is_rot(event, axis, angle):
    return isinstance(event, Rotation) and event.axis == axis and np.isclose(event.angle, angle)


def _match_template(seq):
    """Return (kind, t, sign) for a recognised template, else None."""
    seq = tuple(seq)
    if not seq or not _is_rot(seq[0], "y", PI / 2):
        return None
    last = seq[-1]
    if _is_rot(last, "x", PI / 2):
        sign = 1
    elif _is_rot(last, "x", 3 * PI / 2):
        sign = -1
    else:
        return None
    middle = seq[1:-1]
    if len(middle) == 1 and isinstance(middle[0], Evolve):
        return "ramsey", middle[0].duration, sign
    if (len(middle) == 3 and isinstance(middle[0], Evolve) and _is_rot(middle[1], "y", PI)
            and isinstance(middle[2], Evolve)
            and np.isclose(middle[0].duration, middle[2].duration, rtol=1e-12, atol=0)):
        return "echo", middle[0].duration + middle[2].duration, sign
    return None


def _has_refocusing(seq) -> bool:
    return any(isinstance(e, Rotation) and np.isclose(e.angle, PI) for e in seq)


def run_sequence(seq, field, axis: int, params: EnsembleParams,
                 constants: PhysicalConstants = PhysicalConstants(),
                 mode: str = "closed_form", omega_ac: float | None = None):
    """Populations (p0, p1) of an axis-``axis`` center after ``seq``.

    ``field`` is a DC field, or the amplitude of B sin(omega_ac s) when
    ``omega_ac`` is given (phase zero at the start of the sequence).  Segments
    of sequences containing a refocusing pi pulse dephase at the echo rate
    gamma'; plain free induction uses gamma.
    """
    field = as_field(field)
    k = axis_index(axis)
    proj = float(field @ axis_direction(axis))
    gg = constants.gyromagnetic_ratio

    if mode == "closed_form":
        match = _match_template(seq)
        if match is None:
            raise SequenceError("closed_form mode only accepts the Ramsey and echo templates")
        kind, t, sign = match
        if kind == "ramsey":
            if omega_ac is None:
                phi = gg * proj * t
            else:
                phi = gg * proj * (1.0 - np.cos(omega_ac * t)) / omega_ac
            p0, p1 = ramsey_populations(phi, params.gamma[k], t, sign)
        else:
            if omega_ac is None:
                theta = 0.0  # a static field is refocused exactly
            else:
                theta = gg * proj * filter_factor(omega_ac * t) / omega_ac
            p0, p1 = echo_populations(theta, params.gamma_prime[k], t, sign)
        return float(p0), float(p1)

    if mode != "ode_oracle":
        raise ValueError(f"unknown mode {mode!r}")

    gamma = params.gamma_prime[k] if _has_refocusing(seq) else params.gamma[k]
    if omega_ac is None:
        detuning: Detuning = gg * proj
    else:
        amp = gg * proj
        detuning = lambda s: amp * np.sin(omega_ac * s)
    state = QubitState.ground()
    clock = 0.0
    for event in seq:
        if isinstance(event, Rotation):
            state = rotate(state, event.axis, event.angle)
        elif isinstance(event, Evolve):
            state = integrate_master_equation(state, detuning, 0.0, gamma,
                                              event.duration, t0=clock)
            clock += event.duration
        else:
            raise SequenceError(f"unknown event {event!r}")
    return state.p0, state.p1
