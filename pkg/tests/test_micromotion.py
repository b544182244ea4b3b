"""Tests for displacement-scan physics and optical-pumping models.

High-precision reference values were frozen from a 60-digit arbitrary
precision evaluation of the sideband sum, the Bessel zeros and the
exponential depump curve.
"""

import json
import math

import numpy as np
import pytest
from scipy import special
from scipy.linalg import expm

from mcmr import micromotion
from mcmr.errors import ConfigError, DataFormatError, FitError

# 60-digit evaluations, rounded to double precision
FIRST_NULL = 2.4048255576957727686
SECOND_NULL = 5.5200781102863106496
SUPPRESSION_NEAR_NULL_RATIO2 = 0.038023435629434091845  # n=2.40483, Omega/Gamma=2
SUPPRESSION_N1_RATIO3 = 0.5961792551231434005           # n=1, Omega/Gamma=3
SUPPRESSION_AT_NULL_RATIO2 = 0.038023528967279302445
DEPUMP_AT_6P4_MS = 0.63347528775475737135               # gamma=156.25/s, t=6.4 ms


def make_config(displacement=1.0e-6):
    return micromotion.TrapBeamConfig(
        rf_frequency_hz=21.0e6,
        secular_frequency_hz=3.0e6,
        linewidth_hz=10.5e6,
        wavelength_m=369.5e-9,
        beam_angle_deg=0.0,
        displacement_m=displacement,
    )


def test_suppression_matches_frozen_values():
    got = micromotion.suppression_factor(2.40483, 2.0, harmonic_cutoff=20)
    np.testing.assert_allclose(got, SUPPRESSION_NEAR_NULL_RATIO2, rtol=1e-14)
    got50 = micromotion.suppression_factor(2.40483, 2.0, harmonic_cutoff=50)
    np.testing.assert_allclose(got50, SUPPRESSION_NEAR_NULL_RATIO2, rtol=1e-14)
    got1 = micromotion.suppression_factor(1.0, 3.0)
    np.testing.assert_allclose(got1, SUPPRESSION_N1_RATIO3, rtol=1e-14)


def test_suppression_is_one_at_zero_index():
    for ratio in (0.5, 2.0, 20.0):
        assert micromotion.suppression_factor(0.0, ratio) == pytest.approx(1.0, abs=1e-15)


def test_suppression_cutoff_converged_for_moderate_index():
    lo = micromotion.suppression_factor(3.7, 1.5, harmonic_cutoff=25)
    hi = micromotion.suppression_factor(3.7, 1.5, harmonic_cutoff=200)
    np.testing.assert_allclose(lo, hi, rtol=1e-13)


def test_suppression_vectorizes():
    idx = np.linspace(0.0, 5.0, 17)
    vec = micromotion.suppression_factor(idx, 2.0)
    assert vec.shape == idx.shape
    for k, n in enumerate(idx):
        assert vec[k] == pytest.approx(micromotion.suppression_factor(float(n), 2.0),
                                       abs=1e-15)


def test_suppression_rejects_bad_arguments():
    with pytest.raises(ValueError):
        micromotion.suppression_factor(1.0, 0.0)
    with pytest.raises(ValueError):
        micromotion.suppression_factor(1.0, 2.0, harmonic_cutoff=0)


def test_null_finders_match_frozen_zeros():
    first = micromotion.first_null_modulation_index()
    assert abs(first - FIRST_NULL) < 1e-13
    second = micromotion.carrier_null_index((5.0, 6.0))
    assert abs(second - SECOND_NULL) < 1e-13


def test_null_finder_agrees_with_library_zeros():
    zeros = special.jn_zeros(0, 2)
    assert micromotion.first_null_modulation_index() == pytest.approx(zeros[0], abs=1e-12)
    assert micromotion.carrier_null_index((5.0, 6.0)) == pytest.approx(zeros[1], abs=1e-12)


def test_null_finder_rejects_bracket_without_sign_change():
    with pytest.raises(ValueError):
        micromotion.carrier_null_index((3.0, 5.0))


def test_suppression_at_exact_null_frozen_value():
    got = micromotion.suppression_factor(FIRST_NULL, 2.0)
    np.testing.assert_allclose(got, SUPPRESSION_AT_NULL_RATIO2, rtol=1e-13)


def test_modulation_index_formula_and_inverse():
    config = make_config(displacement=2.5e-7)
    k = 2.0 * math.pi / config.wavelength_m
    expected = k * math.sqrt(2.0) * (3.0e6 / 21.0e6) * 2.5e-7
    assert micromotion.modulation_index(config) == pytest.approx(expected, rel=1e-14)
    disp = micromotion.displacement_for_index(config, FIRST_NULL)
    assert micromotion.modulation_index(config, displacement=disp) == pytest.approx(
        FIRST_NULL, rel=1e-14)


def test_modulation_index_beam_angle_projection():
    straight = make_config()
    angled = micromotion.TrapBeamConfig(**{**straight.to_dict(),
                                           "beam_angle_deg": 60.0})
    ratio = micromotion.modulation_index(angled) / micromotion.modulation_index(straight)
    assert ratio == pytest.approx(0.5, rel=1e-12)


def test_displacement_for_index_rejects_perpendicular_beam():
    perp = micromotion.TrapBeamConfig(**{**make_config().to_dict(),
                                         "beam_angle_deg": 90.0})
    with pytest.raises(ConfigError):
        micromotion.displacement_for_index(perp, 1.0)


def test_suppression_scan_consistent_with_pointwise_eval():
    config = make_config()
    disp = np.linspace(0.0, 2.0e-6, 40)
    idx, sup = micromotion.suppression_scan(config, disp)
    np.testing.assert_allclose(idx, micromotion.modulation_index(config, disp),
                               rtol=1e-14)
    np.testing.assert_allclose(
        sup, micromotion.suppression_factor(idx, config.rf_over_linewidth),
        rtol=1e-14)


def test_config_round_trip_and_validation(tmp_path):
    config = make_config()
    assert micromotion.TrapBeamConfig.from_dict(config.to_dict()) == config

    path = tmp_path / "trap.json"
    path.write_text(json.dumps(config.to_dict()))
    assert micromotion.TrapBeamConfig.from_json(path) == config

    with pytest.raises(ConfigError):
        micromotion.TrapBeamConfig.from_dict({})
    bad = config.to_dict()
    bad["typo_key"] = 1.0
    with pytest.raises(ConfigError):
        micromotion.TrapBeamConfig.from_dict(bad)
    worse = config.to_dict()
    worse["linewidth_hz"] = "wide"
    with pytest.raises(ConfigError):
        micromotion.TrapBeamConfig.from_dict(worse)
    with pytest.raises(ConfigError):
        micromotion.TrapBeamConfig.from_json(tmp_path / "absent.json")
    with pytest.raises(ConfigError):
        micromotion.TrapBeamConfig(**{**config.to_dict(), "linewidth_hz": 0.0})


# ---------------------------------------------------------------------------
# optical pumping


def test_depump_probability_frozen_value():
    np.testing.assert_allclose(micromotion.depump_probability(156.25, 6.4e-3),
                               DEPUMP_AT_6P4_MS, rtol=1e-15)
    assert micromotion.depump_probability(156.25, 0.0) == 0.0


def test_equal_rates_evolution_matches_closed_form():
    """Equal-rate pumping from the prepared state follows 1/3 + (2/3) e^{-3 g t}."""
    gamma = 80.0
    model = micromotion.RateModel.equal_rates(gamma)
    times = np.linspace(0.0, 0.02, 9)
    pops = model.evolve(np.array([1.0, 0.0, 0.0]), times)
    stay = (1.0 + 2.0 * np.exp(-3.0 * gamma * times)) / 3.0
    move = (1.0 - np.exp(-3.0 * gamma * times)) / 3.0
    np.testing.assert_allclose(pops[:, 0], stay, atol=1e-12)
    np.testing.assert_allclose(pops[:, 1], move, atol=1e-12)
    np.testing.assert_allclose(pops[:, 2], move, atol=1e-12)
    np.testing.assert_allclose(pops.sum(axis=1), 1.0, atol=1e-12)


def test_depump_probability_equals_rate_model_complement():
    gamma = 156.25
    model = micromotion.RateModel.equal_rates(gamma)
    times = np.array([1e-4, 1e-3, 6.4e-3, 0.05])
    pops = model.evolve(np.array([1.0, 0.0, 0.0]), times)
    np.testing.assert_allclose(pops[:, 1] + pops[:, 2],
                               micromotion.depump_probability(gamma, times),
                               atol=1e-12)


def test_evolve_agrees_with_matrix_exponential():
    rng = np.random.default_rng(31)
    for _ in range(15):
        model = micromotion.RateModel(rng.uniform(0.0, 200.0, size=(3, 3)))
        p0 = rng.dirichlet(np.ones(3))
        t = float(rng.uniform(0.0, 0.05))
        expected = expm(model.generator() * t) @ p0
        np.testing.assert_allclose(model.evolve(p0, t), expected, atol=1e-10)


def test_elastic_rates_do_not_move_population():
    quiet = micromotion.RateModel(np.diag([50.0, 120.0, 300.0]))
    p0 = np.array([0.2, 0.5, 0.3])
    np.testing.assert_allclose(quiet.evolve(p0, 0.1), p0, atol=1e-12)
    np.testing.assert_allclose(quiet.total_rates(), [50.0, 120.0, 300.0])


def test_from_physics_rates_and_steady_state():
    """Lorentzian rates; stationary populations weight as 1/R per level."""
    rabi = np.array([1.0e6, 2.0e6, 1.5e6])
    det = np.array([0.0, 5.0e6, -8.0e6])
    gamma = 10.0e6
    model = micromotion.RateModel.from_physics(rabi, det, gamma)
    per_source = rabi ** 2 * gamma / (gamma ** 2 / 4.0 + det ** 2)
    np.testing.assert_allclose(model.total_rates(), 3.0 * per_source, rtol=1e-12)
    steady = model.steady_state()
    expected = (1.0 / per_source) / (1.0 / per_source).sum()
    np.testing.assert_allclose(steady, expected, rtol=1e-9)
    np.testing.assert_allclose(model.evolve(steady, 1.0e-3), steady, atol=1e-9)


def test_equal_rates_steady_state_is_uniform():
    steady = micromotion.RateModel.equal_rates(42.0).steady_state()
    np.testing.assert_allclose(steady, np.full(3, 1.0 / 3.0), atol=1e-12)


def test_rate_model_validation():
    with pytest.raises(ValueError):
        micromotion.RateModel(np.zeros((2, 2)))
    with pytest.raises(ValueError):
        micromotion.RateModel(-np.ones((3, 3)))
    with pytest.raises(ValueError):
        micromotion.RateModel.equal_rates(1.0).evolve(np.array([1.0, 0.0]), 0.1)


def test_fit_depump_recovers_rate_noiseless():
    gamma = 156.25
    times = np.linspace(0.5e-3, 20e-3, 12)
    fractions = micromotion.depump_probability(gamma, times)
    fit = micromotion.fit_depump(times, fractions)
    assert fit.gamma == pytest.approx(gamma, rel=1e-8)
    assert fit.amplitude == micromotion.BRIGHT_ASYMPTOTE
    assert fit.time_constant == pytest.approx(1.0 / gamma, rel=1e-8)


def test_fit_depump_free_amplitude():
    times = np.linspace(0.5e-3, 30e-3, 20)
    fractions = 0.58 * (1.0 - np.exp(-3.0 * 100.0 * times))
    fit = micromotion.fit_depump(times, fractions, free_amplitude=True)
    assert fit.free_amplitude
    assert fit.gamma == pytest.approx(100.0, rel=1e-6)
    assert fit.amplitude == pytest.approx(0.58, rel=1e-6)


def test_fit_depump_noisy_round_trip():
    rng = np.random.default_rng(67)
    gamma = 156.25
    times = np.linspace(0.5e-3, 25e-3, 14)
    shots = 500
    hits = 0
    for _ in range(10):
        fractions = rng.binomial(shots, micromotion.depump_probability(gamma, times)) / shots
        fit = micromotion.fit_depump(times, fractions, shots=shots)
        if abs(fit.gamma - gamma) < 3.0 * max(fit.gamma_sigma, 1e-9):
            hits += 1
    assert hits >= 8


def test_fit_depump_input_validation():
    with pytest.raises(DataFormatError):
        micromotion.fit_depump([1e-3], [0.5, 0.6])
    with pytest.raises(DataFormatError):
        micromotion.fit_depump([1e-3, 2e-3], [0.5, 1.5])
    with pytest.raises(DataFormatError):
        micromotion.fit_depump([-1e-3, 2e-3], [0.5, 0.6])
    with pytest.raises(DataFormatError):
        micromotion.fit_depump([1e-3], [0.5])


def test_fit_depump_all_dark_never_resolves_a_rate():
    """All-zero fractions fit to a rate indistinguishable from zero."""
    times = np.linspace(1e-3, 5e-3, 6)
    fit = micromotion.fit_depump(times, np.zeros_like(times))
    assert fit.gamma * times.max() < 1e-3
    assert fit.gamma < 3.0 * fit.gamma_sigma


def test_fit_depump_wraps_optimizer_failure(monkeypatch):
    def explode(*args, **kwargs):
        raise RuntimeError("no convergence")

    monkeypatch.setattr(micromotion, "curve_fit", explode)
    times = np.linspace(1e-3, 5e-3, 6)
    with pytest.raises(FitError):
        micromotion.fit_depump(times, micromotion.depump_probability(100.0, times))
