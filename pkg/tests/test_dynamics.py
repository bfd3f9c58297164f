import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nvvecsense.dynamics import (
    Evolve,
    QubitState,
    Rotation,
    SequenceError,
    echo_phase,
    echo_populations,
    echo_sequence,
    filter_factor,
    integrate_master_equation,
    ramsey_phase,
    ramsey_populations,
    ramsey_sequence,
    rotate,
    run_sequence,
)
from nvvecsense.model import EnsembleParams, PhysicalConstants

REF = json.loads((Path(__file__).parent / "oracles" / "reference.json").read_text())
CONST = PhysicalConstants()
GG = CONST.gyromagnetic_ratio
PARAMS = EnsembleParams.homogeneous(0.02, 0.01, 1e6, 1e6)


def test_ramsey_phase():
    assert ramsey_phase([0, 0, 0], 2, 1e-6) == 0.0
    bx, t = 3e-8, 4e-7
    assert ramsey_phase([bx, 0, 0], 4, t) == pytest.approx(GG * bx * t / np.sqrt(3), rel=1e-14)
    b = np.array([1e-6, 1e-6, 1e-6])
    d1 = np.array([1, -1, -1]) / np.sqrt(3)
    expected = GG * float(np.dot(b, d1)) * t
    assert ramsey_phase(b, 1, t) == pytest.approx(expected, rel=1e-14)
    assert ramsey_phase(b, 1, t) == pytest.approx(-GG * t * 1e-6 / np.sqrt(3), rel=1e-12)


def test_filter_factor_values():
    assert filter_factor(0.0) == 0.0
    # a full period of the AC field is the maximum, not a node
    assert filter_factor(2 * np.pi) == pytest.approx(4.0)
    for node in (np.pi, 3 * np.pi, 4 * np.pi):
        assert abs(filter_factor(node)) < 1e-12
    th = REF["theta_opt"]
    assert filter_factor(th) == pytest.approx(REF["filter_at_opt"], rel=1e-12)
    assert filter_factor(1.856 * np.pi) == pytest.approx(3.849, abs=1e-3)
    assert filter_factor(th) / th == pytest.approx(0.660, abs=5e-4)


def test_echo_phase():
    omega = 2e7
    assert echo_phase([1e-6, 0, 0], 1, 4 * np.pi / omega, omega) == pytest.approx(0, abs=1e-15)
    assert echo_phase([0, 0, 0], 3, 1e-7, omega) == 0.0
    b = [2e-7, 0, 0]
    t = 2 * np.pi / omega
    assert echo_phase(b, 4, t, omega) == pytest.approx(GG * 2e-7 / np.sqrt(3) * 4 / omega)


def test_ramsey_populations_examples():
    assert ramsey_populations(0.0, 3e6, 1e-7, -1) == (0.5, 0.5)
    p0, p1 = ramsey_populations(np.pi / 2, 0.0, 1e-6, 1)
    assert p0 == pytest.approx(1.0) and p1 == pytest.approx(0.0)
    p0, p1 = echo_populations(-np.pi / 2, 0.0, 1e-6, -1)
    assert p0 == pytest.approx(1.0) and p1 == pytest.approx(0.0)


@given(st.floats(-10, 10), st.floats(0, 1e7), st.floats(0, 1e-6))
def test_sign_symmetry(phi, gamma, t):
    assert ramsey_populations(phi, gamma, t, -1) == pytest.approx(ramsey_populations(-phi, gamma, t, 1))


@given(st.floats(0, 1e7), st.floats(0, 1e-6))
def test_closed_form_visibility(gamma, t):
    phis = np.linspace(-np.pi, np.pi, 2001)
    p0, _ = ramsey_populations(phis, gamma, t)
    assert abs(np.max(np.abs(2 * p0 - 1)) - np.exp(-2 * gamma * t)) < 1e-9


def _ramsey_oracle(phi_rate, gamma, t, sign=1):
    state = rotate(QubitState.ground(), "y", np.pi / 2)
    state = integrate_master_equation(state, phi_rate, 0.0, gamma, t)
    state = rotate(state, "x", np.pi / 2 if sign == 1 else 3 * np.pi / 2)
    return state.p0, state.p1


def test_ramsey_matches_oracle_at_quarter_decay():
    gamma, t, phi = 1e6, 2.5e-7, 0.1
    expected = (1 + np.exp(-0.5) * np.sin(0.1)) / 2
    assert ramsey_populations(phi, gamma, t)[0] == pytest.approx(expected, rel=1e-15)
    assert abs(_ramsey_oracle(phi / t, gamma, t)[0] - expected) < 1e-6


def test_echo_matches_oracle_at_ac_operating_point():
    gp = 1e6
    t = 1 / (4 * gp)
    omega = 4 * REF["theta_opt"] * gp
    b = np.array([5e-6, -2e-6, 1e-6])
    theta = echo_phase(b, 2, t, omega)
    expected = (1 + np.exp(-0.5) * np.sin(theta)) / 2
    params = EnsembleParams.homogeneous(0.02, 0.01, 2e6, gp)
    cf = run_sequence(echo_sequence(t), b, 2, params, omega_ac=omega)
    ode = run_sequence(echo_sequence(t), b, 2, params, mode="ode_oracle", omega_ac=omega)
    assert cf[0] == pytest.approx(expected, rel=1e-14)
    assert abs(ode[0] - expected) < 1e-6


def test_pure_dephasing_closed_form():
    gamma, t = 2e6, 3e-7
    s = integrate_master_equation(QubitState.plus(), 0.0, 0.0, gamma, t)
    assert s.p0 == 0.5 and s.p1 == 0.5
    assert np.hypot(s.coh_re, s.coh_im) == pytest.approx(np.exp(-2 * gamma * t) / 2, rel=1e-8)


def test_rabi_pi_pulse_swaps_populations():
    lam = 2 * np.pi * 5e6
    s = integrate_master_equation(QubitState.ground(), 0.0, lam, 0.0, np.pi / lam)
    assert s.p0 == pytest.approx(0.0, abs=1e-8) and s.p1 == pytest.approx(1.0, abs=1e-8)


def test_zero_duration_returns_initial():
    s = QubitState.plus()
    assert integrate_master_equation(s, 1e6, 1e6, 1e6, 0.0) is s


def test_dephasing_leaves_populations_unchanged():
    s0 = QubitState(0.7, 0.3, 0.2, -0.1)
    s1 = integrate_master_equation(s0, 3e6, 0.0, 1e6, 1e-6)
    assert s1.p0 == s0.p0 and s1.p1 == s0.p1


def test_positivity_along_trajectory():
    s0 = rotate(QubitState.ground(), "y", 0.9)
    _, sol = integrate_master_equation(s0, 4e6, 2 * np.pi * 3e6, 5e5, 2e-6, dense=True)
    ys = sol.sol(np.linspace(0, 2e-6, 500))
    bloch = np.stack([2 * ys[2], -2 * ys[3], ys[0] - ys[1]])
    assert np.max(np.linalg.norm(bloch, axis=0)) <= 1 + 1e-9
    assert np.max(np.abs(ys[0] + ys[1] - 1)) < 1e-10


def test_run_sequence_zero_field_both_modes():
    for mode in ("closed_form", "ode_oracle"):
        p0, p1 = run_sequence(ramsey_sequence(3e-7), [0, 0, 0], 1, PARAMS, mode=mode)
        assert p0 == pytest.approx(0.5, abs=1e-12) and p1 == pytest.approx(0.5, abs=1e-12)


def test_echo_suppresses_static_field():
    b = [2e-6, 1e-6, -3e-6]
    for mode in ("closed_form", "ode_oracle"):
        p0, _ = run_sequence(echo_sequence(4e-7), b, 3, PARAMS, mode=mode)
        assert p0 == pytest.approx(0.5, abs=1e-8)
    # the AC filter vanishes as omega -> 0
    for omega in (1e2, 1e0, 1e-2):
        assert abs(echo_phase(b, 3, 4e-7, omega)) < 1e-3 * omega


def test_closed_form_vs_oracle_sweep():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(100):
        axis = int(rng.integers(1, 5))
        t = rng.uniform(0.05, 1.0) * 1e-6
        b = rng.normal(size=3) * 5e-6
        sign = int(rng.choice([1, -1]))
        seq = ramsey_sequence(t, sign)
        cf = run_sequence(seq, b, axis, PARAMS)
        ode = run_sequence(seq, b, axis, PARAMS, mode="ode_oracle")
        worst = max(worst, abs(cf[0] - ode[0]))
        assert abs(ode[0] + ode[1] - 1) < 1e-10
    assert worst < 1e-6


def test_closed_form_rejects_unknown_sequence():
    seq = (Rotation("x", np.pi / 2), Evolve(1e-7), Rotation("x", np.pi / 2))
    with pytest.raises(SequenceError):
        run_sequence(seq, [0, 0, 0], 1, PARAMS)
    # the oracle accepts anything
    p0, p1 = run_sequence(seq, [1e-6, 0, 0], 1, PARAMS, mode="ode_oracle")
    assert p0 + p1 == pytest.approx(1.0, abs=1e-10)


def test_state_invariants():
    assert QubitState.plus().is_physical()
    assert not QubitState(0.5, 0.5, 0.6, 0.0).is_physical()
