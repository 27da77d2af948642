import math
import warnings

import numpy as np
import pytest

from eqone import rng
from eqone.angmom import build_spin_system
from eqone.errors import ConfigError
from eqone.limits import SensorParams, delta_b, snr_single
from eqone.protocol import (
    BLOCK_SHOTS,
    ProtocolConfig,
    SaturatedEstimatorWarning,
    analytic_delta_omega,
    born_probabilities,
    estimate,
    run_campaign,
    sample_shots,
    sensitivity_mc,
    single_shot,
    system_for,
)

from oracles import bernoulli_delta_omega, dense_born_probabilities, spin_half_plus_probability

# dense-matrix oracle, J = 1, phi = 0.1 (m = 1, 0, -1)
SPIN_ONE_PHI_01 = [0.30240838609325865, 0.4950166444603107, 0.2025749694464307]


def cfg(**kw):
    base = dict(j=0.5, omega=0.0, gamma=1.0, n_spins=100, n_reps=100, seed=1)
    base.update(kw)
    return ProtocolConfig(**base)


def test_config_defaults_and_validation():
    c = cfg(gamma=4.0)
    assert c.t1 == 0.25
    assert c.total_time == 25.0
    with pytest.raises(ConfigError):
        cfg(omega=2.0)  # phi = 2 > pi/2
    with pytest.raises(ConfigError):
        cfg(n_spins=0)
    with pytest.raises(ConfigError):
        cfg(gamma=-1.0)
    with pytest.raises(ConfigError):
        cfg(j=0)


def test_equal_probabilities_without_field():
    _, p = born_probabilities(build_spin_system(0.5), 0.0)
    np.testing.assert_allclose(p, [0.5, 0.5], atol=1e-15)


def test_spin_half_exact_probability():
    m, p = born_probabilities(build_spin_system(0.5), 0.1)
    np.testing.assert_array_equal(m, [0.5, -0.5])
    assert p[0] == pytest.approx(spin_half_plus_probability(0.1), abs=1e-14)
    assert p[0] == pytest.approx(0.549917, abs=1e-6)
    # first-order value (1 + phi)/2 differs at O(phi^3)
    assert abs(p[0] - 0.55) == pytest.approx((0.1 - math.sin(0.1)) / 2, abs=1e-14)


def test_spin_one_probabilities_match_dense_oracle():
    m, p = born_probabilities(build_spin_system(1), 0.1)
    np.testing.assert_array_equal(m, [1.0, 0.0, -1.0])
    np.testing.assert_allclose(p, SPIN_ONE_PHI_01, atol=1e-13)


@pytest.mark.parametrize("two_j", [1, 2, 3, 5, 8])
@pytest.mark.parametrize("phi", [0.0, 0.37, -1.1])
def test_born_probabilities_general(two_j, phi):
    _, p = born_probabilities(build_spin_system(two_j / 2), phi)
    _, ref = dense_born_probabilities(two_j / 2, phi)
    np.testing.assert_allclose(p, ref, atol=1e-12)


def test_spin_one_sampler_frequencies():
    c = cfg(j=1, omega=0.1)
    shots = 10**6
    m = sample_shots(system_for(c), c, rng.stream(99), shots)
    freq = np.array([(m == v).sum() for v in (1.0, 0.0, -1.0)]) / shots
    p = np.array(SPIN_ONE_PHI_01)
    assert np.all(np.abs(freq - p) <= 3 * np.sqrt(p * (1 - p) / shots))


def test_single_shot_outcome():
    c = cfg(j=1.5, omega=0.3)
    s = system_for(c)
    gen = rng.stream(4)
    vals = {single_shot(s, c, gen) for _ in range(200)}
    assert vals <= {1.5, 0.5, -0.5, -1.5}
    assert len(vals) > 1


def test_campaign_is_deterministic():
    c = cfg(j=1, omega=0.05, n_spins=1000)
    s = system_for(c)
    assert run_campaign(s, c) == run_campaign(s, c)
    assert run_campaign(s, c) != run_campaign(s, cfg(j=1, omega=0.05, n_spins=1000, seed=2))


@pytest.mark.parametrize("sampler", ["multinomial", "shots"])
def test_campaign_independent_of_workers(sampler):
    c = cfg(omega=0.02, n_spins=3 * BLOCK_SHOTS // 100 + 7, n_reps=100)
    s = system_for(c)
    one = run_campaign(s, c, workers=1, sampler=sampler)
    four = run_campaign(s, c, workers=4, sampler=sampler)
    assert one == four
    assert one.shots == c.shots


def test_samplers_agree_statistically():
    c = cfg(j=1, omega=0.2, n_spins=10**4)
    s = system_for(c)
    a = run_campaign(s, c, sampler="multinomial")
    b = run_campaign(s, c, sampler="shots")
    assert abs(a.omega_hat - b.omega_hat) < 5 * math.hypot(a.sigma_omega, b.sigma_omega)


def test_zero_field_unbiased_over_seeds():
    passed = 0
    for seed in range(100):
        c = cfg(seed=seed)
        r = run_campaign(system_for(c), c)
        passed += abs(r.omega_hat) <= 3 * r.sigma_omega
    assert passed >= 95


def test_spin_half_phase_uncertainty():
    c = cfg(omega=0.05, n_spins=10**4, n_reps=100)
    r = run_campaign(system_for(c), c)
    assert r.shots == 10**6
    assert r.sigma_omega * c.t1 == pytest.approx(1e-3, rel=0.05)
    assert r.sigma_omega == pytest.approx(bernoulli_delta_omega(0.05, r.shots, c.t1), rel=0.05)


def test_spin_two_per_shot_snr():
    c = cfg(j=2, omega=0.05, n_spins=10**4, n_reps=100)
    r = run_campaign(system_for(c), c)
    # per-shot noise sqrt(J/2) = 1 (times cos phi), signal J sin phi
    assert math.sqrt(r.variance) == pytest.approx(math.cos(0.05), rel=0.01)
    per_shot = r.mean_jy / math.sqrt(r.variance)
    expected = snr_single(SensorParams(j=2, gamma=c.gamma, n=1.0, t=1.0), c.omega)
    assert expected == pytest.approx(0.1, rel=1e-12)
    assert per_shot == pytest.approx(expected, abs=4e-3)


def test_saturated_estimator_flagged():
    s = build_spin_system(0.5)
    c = cfg()
    with pytest.warns(SaturatedEstimatorWarning):
        r = estimate(s, c, [5, 0])
    assert r.saturated
    assert r.omega_hat == pytest.approx(math.pi / 2)
    assert r.to_dict()["sigma_omega"] is None


def test_campaign_json_fields():
    c = cfg()
    d = run_campaign(system_for(c), c).to_dict()
    assert list(d) == ["mean_jy", "variance", "omega_hat", "sigma_omega", "shots", "saturated"]


def test_run_campaign_rejects_wrong_system():
    with pytest.raises(ConfigError):
        run_campaign(build_spin_system(1), cfg())


def test_sensitivity_mc_needs_enough_campaigns():
    c = cfg()
    with pytest.raises(ConfigError):
        sensitivity_mc(system_for(c), c, 29)


def test_sensitivity_level_spin_half():
    c = cfg(omega=0.01)
    est = sensitivity_mc(system_for(c), c, 1000)
    assert est.delta_omega == pytest.approx(0.01, rel=0.10)
    assert analytic_delta_omega(c) == pytest.approx(0.01, rel=1e-12)
    assert est.delta_omega_err == pytest.approx(est.delta_omega / math.sqrt(2 * 999), rel=0.3)
    formula = delta_b(SensorParams(j=0.5, gamma=c.gamma, n=c.n_spins, t=c.total_time))
    assert 0.5 <= est.delta_omega / formula <= 2


@pytest.mark.parametrize("field_name", ["n_spins", "n_reps"])
def test_doubling_budget_halves_variance(field_name):
    c = cfg(omega=0.01)
    doubled = cfg(omega=0.01, **{field_name: 2 * getattr(c, field_name)})
    a = sensitivity_mc(system_for(c), c, 8000)
    b = sensitivity_mc(system_for(doubled), doubled, 8000, key=(1,))
    assert (a.delta_omega / b.delta_omega) ** 2 == pytest.approx(2.0, abs=0.2)


def test_estimator_bias_small():
    c = cfg(omega=0.1, n_spins=10**4)
    est = sensitivity_mc(system_for(c), c, 400)
    assert abs(est.mean_omega_hat - c.omega) < est.mean_sigma_omega / 3


def test_sensitivity_mc_independent_of_workers():
    c = cfg(j=1.5, omega=0.03)
    s = system_for(c)
    a = sensitivity_mc(s, c, 60, workers=1)
    b = sensitivity_mc(s, c, 60, workers=3)
    assert np.array_equal(a.omega_hats, b.omega_hats)
    assert a.delta_omega_err == b.delta_omega_err


def test_no_warnings_from_normal_campaign():
    c = cfg(omega=0.05)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        run_campaign(system_for(c), c)
