import numpy as np
import pytest
from hypothesis import given, strategies as st

from nvvecsense import readout
from nvvecsense.dynamics import ramsey_populations
from nvvecsense.model import EnsembleParams
from nvvecsense.readout import (
    ShotRecord,
    conventional_p0,
    effective_emission,
    emission_probabilities,
    expected_photons_parallel,
    expected_photons_single,
    sample_count_totals,
    sample_shots,
    shot_variance,
)

A0, A1 = 0.01, 0.008
HOM = EnsembleParams.homogeneous(A0, A1, 1e6)

alpha = st.floats(1e-4, 0.2)


@st.composite
def ensembles(draw):
    a0 = [draw(alpha) for _ in range(4)]
    a1 = [draw(st.floats(1e-5, 1.0)) * a for a in a0]
    return EnsembleParams(a0, a1, [1e6] * 4, [1e6] * 4)


def test_effective_emission_homogeneous():
    eff = effective_emission(HOM, 2)
    assert eff.alpha_tilde0 == pytest.approx(0.04)
    assert eff.alpha_tilde1 == pytest.approx(0.038)


def test_zero_contrast_gives_equal_effective_emission():
    p = EnsembleParams([0.01, 0.02, 0.03, 0.04], [0.01, 0.02, 0.03, 0.04], [1e6] * 4, [1e6] * 4)
    eff = effective_emission(p, 3)
    assert eff.alpha_tilde0 == eff.alpha_tilde1


@given(ensembles(), st.sampled_from([1, 2, 3, 4]))
def test_background_cancels_in_contrast(params, k):
    eff = effective_emission(params, k)
    assert eff.alpha_tilde0 - eff.alpha_tilde1 == pytest.approx(params.contrast[k - 1], rel=1e-12,
                                                                abs=1e-15)


@given(ensembles(), st.sampled_from([1, 2, 3, 4]))
def test_slope_ignores_idle_axes(params, k):
    # d<N_k>/dp0 = alpha_tilde0 - alpha_tilde1: change every idle axis, slope stays put
    slope = expected_photons_single(params, k, 1.0, 0.0) - expected_photons_single(params, k, 0.0, 1.0)
    a0 = list(params.alpha0)
    for j in range(4):
        if j != k - 1:
            a0[j] = a0[j] * 1.5
    other = EnsembleParams(a0, params.alpha1, params.gamma, params.gamma_prime)
    slope2 = expected_photons_single(other, k, 1.0, 0.0) - expected_photons_single(other, k, 0.0, 1.0)
    assert slope == pytest.approx(slope2, rel=1e-9)


def test_expected_single_examples():
    eff = effective_emission(HOM, 1)
    assert expected_photons_single(HOM, 1, 1.0, 0.0) == pytest.approx(eff.alpha_tilde0)
    assert expected_photons_single(HOM, 1, 0.5, 0.5) == pytest.approx(
        (eff.alpha_tilde0 + eff.alpha_tilde1) / 2)


@pytest.mark.parametrize("phi", [1e-3, 1e-2, 0.1, 0.3])
def test_single_matches_linearised_form(phi):
    gamma, t = 1e6, 2.5e-7
    e = np.exp(-2 * gamma * t)
    p0, p1 = ramsey_populations(phi, gamma, t)
    eff = effective_emission(HOM, 4)
    exact = expected_photons_single(HOM, 4, p0, p1)
    linear = (1 + phi * e) * eff.alpha_tilde0 / 2 + (1 - phi * e) * eff.alpha_tilde1 / 2
    bound = (eff.alpha_tilde0 - eff.alpha_tilde1) / 2 * e * phi ** 3 / 6
    # small floor for rounding in the 0.039-sized sums
    assert abs(exact - linear) <= bound * (1 + 1e-9) + 1e-16


@given(st.floats(0, 1))
def test_single_is_decreasing_in_p1(p1):
    lo = expected_photons_single(HOM, 2, 1 - p1, p1)
    hi = expected_photons_single(HOM, 2, 1 - min(p1 + 0.01, 1), min(p1 + 0.01, 1))
    assert hi <= lo


def test_parallel_examples():
    assert expected_photons_parallel(HOM, [(1, 0)] * 4) == pytest.approx(4 * A0)
    assert expected_photons_parallel(HOM, [(0.5, 0.5)] * 4) == pytest.approx(2 * (A0 + A1))


def test_parallel_matches_linearised_form():
    from nvvecsense.model import PhysicalConstants, projections
    from nvvecsense.protocols import sign_pattern

    p = EnsembleParams.homogeneous(0.02, 0.01, 1e6)
    gg = PhysicalConstants().gyromagnetic_ratio
    gamma, t, bx = 1e6, 2.5e-7, 1e-8
    phis = gg * projections([bx, 0, 0]) * t
    pops = [ramsey_populations(phi, gamma, t, s) for phi, s in zip(phis, sign_pattern("x"))]
    exact = expected_photons_parallel(p, pops)
    e = np.exp(-2 * gamma * t)
    linear = 2 * (0.03) - 2 / np.sqrt(3) * 0.01 * gg * bx * t * e
    bound = 4 * 0.005 * e * np.max(np.abs(phis)) ** 3 / 6
    assert abs(exact - linear) <= bound + 1e-15


def test_shot_variance():
    eff = effective_emission(HOM, 1)
    pair_mean = expected_photons_single(HOM, 1, 0.5, 0.5) + expected_photons_single(HOM, 4, 0.5, 0.5)
    assert shot_variance(pair_mean) == pytest.approx(eff.alpha_tilde0 + eff.alpha_tilde1)
    assert shot_variance(pair_mean) == pytest.approx(7 * A0 + A1)
    assert shot_variance(expected_photons_parallel(HOM, [(0.5, 0.5)] * 4)) == pytest.approx(2 * (A0 + A1))
    assert shot_variance(0.0) == 0.0
    probs = emission_probabilities(HOM, [0.5] * 4)
    exact = shot_variance(None, probs, exact=True)
    assert exact == pytest.approx(2 * (A0 + A1) - np.sum(probs ** 2))


def test_zero_probability_gives_zero_counts():
    p = EnsembleParams.homogeneous(1e-300, 1e-300, 1e6)
    rec = sample_shots(0, p, [0.5] * 4, 1000)
    assert rec.counts.sum() == 0


def test_sampling_law_of_large_numbers():
    n = 10 ** 6
    rec = sample_shots(11, HOM, [0.5] * 4, n)
    mean = expected_photons_parallel(HOM, [(0.5, 0.5)] * 4)
    se = np.sqrt(mean / n)
    assert abs(rec.mean() - mean) < 4 * se
    assert rec.counts.var() == pytest.approx(shot_variance(mean), rel=0.05)
    assert rec.counts.max() <= 4


def test_sampling_is_chunk_independent(monkeypatch):
    p0 = np.array([conventional_p0(1, 0.3), conventional_p0(4, 0.8)])
    full = sample_shots(5, HOM, p0, 3000)
    monkeypatch.setattr(readout, "CHUNK", 257)
    chunked = sample_shots(5, HOM, p0, 3000)
    np.testing.assert_array_equal(full.shot_counts, chunked.shot_counts)
    assert not np.array_equal(sample_shots(6, HOM, p0, 3000).shot_counts, full.shot_counts)


def test_aggregated_totals_match_shot_statistics():
    n, trials = 2000, 4000
    totals = sample_count_totals(3, HOM, [0.5] * 4, n, trials)
    mean = n * 2 * (A0 + A1)
    assert abs(totals.mean() - mean) < 4 * np.sqrt(mean / trials)
    assert totals.var() == pytest.approx(mean, rel=0.1)


def test_record_csv_round_trip():
    rec = sample_shots(9, HOM, [0.5] * 4, 50, protocol="MF_DC:x")
    text = rec.to_csv()
    assert text.splitlines()[1] == "repetition,count"
    back = ShotRecord.from_csv(text)
    np.testing.assert_array_equal(back.counts, rec.counts)
    assert back.protocol == "MF_DC:x" and back.seed == 9
    assert back.params_hash == rec.params_hash
