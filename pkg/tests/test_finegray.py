import numpy as np
import pytest

from ciflimits.censoring import km_censoring
from ciflimits.datagen import CensoringSpec, calibrate_censoring_rate, generate_dataset
from ciflimits.dataset import Dataset
from ciflimits.errors import FitError
from ciflimits.finegray import (_FgWorkspace, fg_fit, fg_fit_extended,
                                fg_predict_cif, fg_robust_variance,
                                fg_score_test_null)
from ciflimits.inference import fit_cox_csh
from ciflimits.process import CifGenerativeModel, IntensityModel

from _reference import fg_ee_residuals, fg_score_direct

EXP_TRUTH = IntensityModel.calibrated(0.6, 0.6, exp_hr1=0.75, exp_hr2=1.2)
CENS = CensoringSpec(rate=0.55, tau=1.0)


def _simulated(n=400, seed=1, cens=CENS, truth=EXP_TRUTH):
    data = generate_dataset(truth, n, cens, seed=seed)
    return data, km_censoring(data)


@pytest.mark.parametrize("scheme", ["stabilized", "raw"])
@pytest.mark.parametrize("seed", [1, 2])
def test_score_matches_direct_evaluation(scheme, seed):
    data, curve = _simulated(n=60, seed=seed)
    ws = _FgWorkspace(data, curve, scheme)
    phi = ws.phi(None)
    for beta in (-0.5, 0.0, 0.7):
        score, *_ = ws.score_info(np.array([beta]), phi)
        assert score[0] == pytest.approx(
            fg_score_direct(data, curve, beta, scheme), abs=1e-10)


@pytest.mark.parametrize("scheme", ["stabilized", "raw"])
def test_score_zero_at_solution(scheme):
    data, curve = _simulated(n=500, seed=3)
    fit = fg_fit(data, curve, scheme)
    assert fit.score_norm < 1e-8
    assert abs(fg_score_direct(data, curve, fit.beta_hat, scheme)) < 1e-8


@pytest.mark.parametrize("scheme", ["stabilized", "raw"])
def test_breslow_identity(scheme):
    # substituting the profile baseline back into the baseline equation
    # must produce exact zeros at every jump time
    data, curve = _simulated(n=150, seed=4)
    fit = fg_fit(data, curve, scheme)
    resid = fg_ee_residuals(data, curve, fit.beta_hat, fit.breslow_times,
                            fit.breslow_dgamma, scheme)
    assert np.max(np.abs(resid)) < 1e-10


def test_reduces_to_cox_without_competing_events_or_censoring():
    truth = IntensityModel(rate1=0.9, rate2=0.0, log_hr1=np.log(0.7))
    data = generate_dataset(truth, 600, CensoringSpec(rate=0.0, tau=1.0), seed=5)
    assert np.all(data.status != 2)
    curve = km_censoring(data)
    fg = fg_fit(data, curve)
    cox = fit_cox_csh(data, 1)
    assert fg.beta_hat == pytest.approx(cox.gamma_hat, abs=1e-8)


def test_time_rescaling_invariance():
    data, curve = _simulated(n=300, seed=6)
    fit = fg_fit(data, curve)
    scaled = Dataset(data.time * 37.0, data.status, data.x, tau=data.tau * 37.0)
    fit_scaled = fg_fit(scaled, km_censoring(scaled))
    assert fit_scaled.beta_hat == pytest.approx(fit.beta_hat, abs=1e-10)
    assert fit_scaled.se_robust == pytest.approx(fit.se_robust, rel=1e-9)


def test_non_identifiable_single_arm():
    data, _ = _simulated(n=100, seed=7)
    one_arm = Dataset(data.time, data.status, np.zeros(len(data), dtype=int),
                      tau=data.tau)
    with pytest.raises(FitError):
        fg_fit(one_arm, km_censoring(one_arm))


def test_breslow_baseline_nondecreasing():
    data, curve = _simulated(n=400, seed=8)
    fit = fg_fit(data, curve)
    assert np.all(fit.breslow_dgamma > 0)
    assert np.all(np.diff(fit.breslow_times) >= 0)
    assert np.all(fit.breslow_times <= data.tau)


def test_predict_cif_baseline_and_zero():
    data, curve = _simulated(n=400, seed=9)
    fit = fg_fit(data, curve)
    t0 = fit.breslow_times[0] / 2
    assert fg_predict_cif(fit, t0, 0) == 0.0
    t = 0.8
    expected = -np.expm1(-fit.cumulative_baseline(t))
    assert fg_predict_cif(fit, t, 0) == pytest.approx(expected, abs=1e-14)


def test_predict_cif_tracks_truth_under_correct_model():
    truth = CifGenerativeModel.calibrated(0.36, exp_b=0.8, exp_b2=1.0)
    rho = calibrate_censoring_rate(truth, 0.2)
    data = generate_dataset(truth, 20000, CensoringSpec(rate=rho, tau=1.0),
                            seed=10)
    curve = km_censoring(data)
    fit = fg_fit(data, curve)
    grid = np.linspace(0.05, 1.0, 25)
    for x in (0, 1):
        fitted = np.array([fg_predict_cif(fit, t, x) for t in grid])
        assert np.max(np.abs(fitted - truth.cif1(grid, x))) < 0.02


def test_no_censoring_influence_has_no_correction():
    # with G == 1 the stabilized and raw influence coincide and the robust
    # SE equals the plain sandwich
    truth = EXP_TRUTH
    data = generate_dataset(truth, 500, CensoringSpec(rate=0.0, tau=1.0), seed=11)
    curve = km_censoring(data)
    se = {}
    for scheme in ("stabilized", "raw"):
        fit = fg_fit(data, curve, scheme)
        se[scheme] = (fit.beta_hat, fit.se_robust)
    assert se["stabilized"][0] == pytest.approx(se["raw"][0], abs=1e-12)
    assert se["stabilized"][1] == pytest.approx(se["raw"][1], abs=1e-12)


@pytest.mark.parametrize("scheme", ["stabilized", "raw"])
def test_robust_se_close_to_bootstrap(scheme):
    truth = IntensityModel.calibrated(0.6, 0.6)  # table null config
    rho = calibrate_censoring_rate(truth, 0.2)
    data = generate_dataset(truth, 1000, CensoringSpec(rate=rho, tau=1.0),
                            seed=12)
    curve = km_censoring(data)
    fit = fg_fit(data, curve, scheme)
    se_boot = fg_robust_variance(fit, data, curve, method="bootstrap",
                                 n_boot=500, seed=99)
    assert abs(fit.se_robust - se_boot) / se_boot < 0.15


def test_robust_variance_influence_matches_fit():
    data, curve = _simulated(n=400, seed=13)
    fit = fg_fit(data, curve)
    assert fg_robust_variance(fit, data, curve) == pytest.approx(
        fit.se_robust, rel=1e-12)


def test_se_scales_like_root_n():
    truth = IntensityModel.calibrated(0.6, 0.6)
    rho = calibrate_censoring_rate(truth, 0.2)
    cens = CensoringSpec(rate=rho, tau=1.0)
    ratios = []
    for rep in range(200):
        small = generate_dataset(truth, 500, cens, seed=14, replicate=rep)
        big = generate_dataset(truth, 2000, cens, seed=15, replicate=rep)
        se_small = fg_fit(small, km_censoring(small)).se_robust
        se_big = fg_fit(big, km_censoring(big)).se_robust
        ratios.append(se_big / se_small)
    assert 0.45 < np.mean(ratios) < 0.55


def test_consistency_under_correct_null():
    # data from the CIF truth with no type-1 effect but a competing-event
    # effect: the estimator must center on zero
    truth = CifGenerativeModel.calibrated(0.36, exp_b=1.0, exp_b2=0.8)
    rho = calibrate_censoring_rate(truth, 0.2)
    cens = CensoringSpec(rate=rho, tau=1.0)
    betas = []
    for rep in range(500):
        data = generate_dataset(truth, 2000, cens, seed=16, replicate=rep)
        betas.append(fg_fit(data, km_censoring(data),
                            compute_robust=False).beta_hat)
    mean = np.mean(betas)
    mc_se = np.std(betas, ddof=1) / np.sqrt(len(betas))
    assert abs(mean) < 3 * mc_se


def test_large_sample_estimate_matches_published_limit():
    # correctly specified effect log(0.8): estimate lands on -0.2231
    truth = CifGenerativeModel.calibrated(0.36, exp_b=0.8, exp_b2=0.8)
    rho = calibrate_censoring_rate(truth, 0.2)
    data = generate_dataset(truth, 20000, CensoringSpec(rate=rho, tau=1.0),
                            seed=17)
    fit = fg_fit(data, km_censoring(data), compute_robust=False)
    assert fit.beta_hat == pytest.approx(-0.2231, abs=0.03)


def test_extended_fit_nested_at_zero():
    # the first component of the extended score vanishes at (beta_fg, 0)
    data, curve = _simulated(n=400, seed=18)
    fit = fg_fit(data, curve)
    ws = _FgWorkspace(data, curve, "stabilized")
    phi = ws.phi(ws.te.copy())
    score, *_ = ws.score_info(np.array([fit.beta_hat, 0.0]), phi)
    assert abs(score[0]) < 1e-8


def test_extended_fit_b_specs_differ():
    data, curve = _simulated(n=500, seed=19)
    fit_t = fg_fit_extended(data, curve, b_spec="t")
    fit_log = fg_fit_extended(data, curve, b_spec="log")
    assert fit_t.score_norm < 1e-8 and fit_log.score_norm < 1e-8
    assert fit_t.nu_hat != pytest.approx(fit_log.nu_hat, abs=1e-6)


def test_score_test_arm_exchange_symmetric():
    data, curve = _simulated(n=400, seed=20)
    stat1, _ = fg_score_test_null(data, curve)
    flipped = Dataset(data.time, data.status, 1 - data.x, tau=data.tau)
    stat2, _ = fg_score_test_null(flipped, km_censoring(flipped))
    assert stat1 == pytest.approx(stat2, rel=1e-9)
