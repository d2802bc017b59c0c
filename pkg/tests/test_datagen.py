import numpy as np
import pytest

from ciflimits.censoring import km_censoring
from ciflimits.datagen import (CensoringSpec, calibrate_censoring_rate,
                               draw_cif_path, draw_intensity_path,
                               generate_dataset)
from ciflimits.datagen import _invert_cif_times
from ciflimits.errors import CalibrationError, ConfigError
from ciflimits.process import CifGenerativeModel, IntensityModel

NO_CENS = CensoringSpec(rate=0.0, tau=1.0)


@pytest.fixture(scope="module")
def exp_truth():
    return IntensityModel.calibrated(0.6, 0.6)


def test_event_fractions_match_design(exp_truth):
    n = 10**5
    data = generate_dataset(exp_truth, n, CensoringSpec(rate=0.0, tau=10.0),
                            seed=5, p_treat=0.0)
    by_one = data.time <= 1.0
    assert by_one.mean() == pytest.approx(0.6, abs=0.005)
    assert ((data.status == 1) & by_one).mean() / by_one.mean() == \
        pytest.approx(0.6, abs=0.005)


def test_degenerate_competing_cause_draws():
    m = IntensityModel(rate1=0.8, rate2=0.0)
    rng = np.random.default_rng(0)
    causes = {draw_intensity_path(m, 0, rng)[1] for _ in range(50)}
    assert causes == {1}


def test_draw_determinism(exp_truth):
    t1, c1 = draw_intensity_path(exp_truth, 1, np.random.default_rng(123))
    t2, c2 = draw_intensity_path(exp_truth, 1, np.random.default_rng(123))
    assert (t1, c1) == (t2, c2)


def test_cif_inversion_closed_form_control_arm():
    m = CifGenerativeModel(q=0.5, beta=np.log(0.8), beta2=0.0)
    u = 1.0 - np.exp(-1.0)
    t = _invert_cif_times(m, np.array([0]), np.array([u]))
    assert t[0] == pytest.approx(1.0, abs=1e-12)


def test_cif_inversion_treated_arm_solves_total_cdf():
    m = CifGenerativeModel(q=0.5, beta=np.log(0.8), beta2=np.log(1.3))
    u = np.array([0.1, 0.41, 0.77, 0.995])
    t = _invert_cif_times(m, np.ones(4, dtype=int), u)
    assert np.allclose(m.total_cdf(t, 1), u, atol=1e-10)


def test_cif_cause_probability_is_q_in_control_arm():
    q = 0.57
    m = CifGenerativeModel(q=q, beta=np.log(0.8), beta2=np.log(1.2))
    t = np.linspace(0.05, 4.0, 9)
    assert np.allclose(m.subdensity_ratio(t, 0), q, atol=1e-12)


def test_cif_draw_no_effect_arms_match():
    m = CifGenerativeModel(q=0.5, beta=0.0, beta2=0.0)
    n = 10**5
    d0 = generate_dataset(m, n, NO_CENS, seed=21, p_treat=0.0)
    d1 = generate_dataset(m, n, NO_CENS, seed=22, p_treat=1.0)
    f0 = ((d0.status == 1) & (d0.time <= 1.0)).mean()
    f1 = ((d1.status == 1) & (d1.time <= 1.0)).mean()
    se = np.sqrt(2 * f0 * (1 - f0) / n)
    assert abs(f0 - f1) < 3 * se


def test_generate_dataset_deterministic_csv(tmp_path, exp_truth):
    cens = CensoringSpec(rate=0.5, tau=1.0)
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    generate_dataset(exp_truth, 1000, cens, seed=7).to_csv(a)
    generate_dataset(exp_truth, 1000, cens, seed=7).to_csv(b)
    assert a.read_bytes() == b.read_bytes()
    generate_dataset(exp_truth, 1000, cens, seed=8).to_csv(b)
    assert a.read_bytes() != b.read_bytes()


def test_generate_dataset_replicates_differ(exp_truth):
    cens = CensoringSpec(rate=0.5, tau=1.0)
    d0 = generate_dataset(exp_truth, 100, cens, seed=7, replicate=0)
    d1 = generate_dataset(exp_truth, 100, cens, seed=7, replicate=1)
    assert not np.array_equal(d0.time, d1.time)


def test_no_censoring_with_long_horizon(exp_truth):
    data = generate_dataset(exp_truth, 5000,
                            CensoringSpec(rate=0.0, tau=200.0), seed=3)
    assert np.all(data.status != 0)


def test_empirical_cdf_matches_truth_ks(exp_truth):
    n = 10**5
    data = generate_dataset(exp_truth, n, CensoringSpec(rate=0.0, tau=50.0),
                            seed=11, p_treat=0.0)
    ts = np.sort(data.time)
    ecdf = np.arange(1, n + 1) / n
    model_cdf = 1.0 - exp_truth.survival(ts, 0)
    ks = np.max(np.abs(ecdf - model_cdf))
    assert ks < 1.63 / np.sqrt(n)


def test_censoring_independent_of_event_times(exp_truth):
    # reconstruct the generator's lanes: T reads lanes 1-2, C_r lane 3
    from ciflimits.datagen import _draw_events, _UNIT_LO, _UNIT_HI
    n = 10**5
    key = np.array([13, 0], dtype=np.uint64)
    u = np.random.Generator(np.random.Philox(key=key)).random((n, 4))
    x = (u[:, 0] < 0.5).astype(np.int8)
    t, _ = _draw_events(exp_truth, x, np.clip(1 - u[:, 1], _UNIT_LO, _UNIT_HI),
                        u[:, 2])
    c_r = -np.log(np.clip(1 - u[:, 3], _UNIT_LO, _UNIT_HI)) / 0.5
    for arm in (0, 1):
        sel = x == arm
        corr = np.corrcoef(t[sel], c_r[sel])[0, 1]
        assert abs(corr) < 3.0 / np.sqrt(sel.sum())


def test_calibrate_censoring_rate_zero_target(exp_truth):
    assert calibrate_censoring_rate(exp_truth, 0.0) == 0.0


def test_calibrate_censoring_rate_monotone(exp_truth):
    r2 = calibrate_censoring_rate(exp_truth, 0.2)
    r3 = calibrate_censoring_rate(exp_truth, 0.3)
    assert r3 > r2 > 0


def test_calibrate_censoring_rate_monte_carlo_oracle(exp_truth):
    rho = calibrate_censoring_rate(exp_truth, 0.2)
    n = 10**6
    # share of type-1 events by tau that an independent C_r draw censors
    data = generate_dataset(exp_truth, n, CensoringSpec(rate=0.0, tau=50.0),
                            seed=1717)
    c_r = np.random.default_rng(555).exponential(1.0 / rho, n)
    type1_by_tau = (data.status == 1) & (data.time <= 1.0)
    pi_hat = (c_r[type1_by_tau] < data.time[type1_by_tau]).mean()
    assert pi_hat == pytest.approx(0.2, abs=0.002)


def test_calibrate_censoring_rate_invalid():
    truth = IntensityModel.calibrated(0.6, 0.6)
    with pytest.raises(CalibrationError):
        calibrate_censoring_rate(truth, 1.0)


def test_cif_truth_generation_type1_fraction():
    m = CifGenerativeModel.calibrated(0.36, exp_b=1.0, exp_b2=1.0)
    data = generate_dataset(m, 10**5, CensoringSpec(rate=0.0, tau=30.0),
                            seed=4)
    f1 = ((data.status == 1) & (data.time <= 1.0)).mean()
    assert f1 == pytest.approx(0.36, abs=0.005)


def test_generate_requires_positive_n(exp_truth):
    with pytest.raises(ConfigError):
        generate_dataset(exp_truth, 0, NO_CENS, seed=0)


def test_draw_cif_path_runs():
    m = CifGenerativeModel(q=0.5, beta=0.1, beta2=0.0)
    t, cause = draw_cif_path(m, 1, np.random.default_rng(5))
    assert t > 0 and cause in (1, 2)


def test_random_censoring_present_at_positive_rate(exp_truth):
    data = generate_dataset(exp_truth, 20000, CensoringSpec(rate=0.55, tau=1.0),
                            seed=9)
    assert data.randomly_censored.sum() > 0
    assert np.all(data.time <= 1.0)
    curve = km_censoring(data)
    # exponential censoring: KM should track exp(-rho t)
    mid = curve.evaluate(0.5)
    assert mid == pytest.approx(np.exp(-0.55 * 0.5), abs=0.02)
