"""Hypothesis-test battery for two-arm competing-risks trials.

Covers the intensity-based tests (cause-specific log-rank and Cox Wald
tests, the joint two-degree-of-freedom Wald test), the CIF-based Wald
tests built on the FG/DB fits, goodness-of-fit tests of a time-constant
effect, and the closed-form sample-size formula for FG regression.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataset import Dataset
from .directbinomial import DbFit, DbUnconstrainedFit, db_fit_extended
from .errors import DomainError, FitError, TestError, VarianceError
from .finegray import FgFit, fg_fit_extended, fg_score_test_null
from .stats import chi2_tail, normal_quantile

__all__ = [
    "TestResult",
    "CoxFit",
    "logrank_cause",
    "fit_cox_csh",
    "cox_wald",
    "joint_cox_wald",
    "gray_test",
    "wald_cif",
    "gof_fg_wald",
    "gof_db_wald",
    "gof_db_contrast",
    "latouche_sample_size",
]


@dataclass(frozen=True)
class TestResult:
    """Chi-square test outcome: statistic, degrees of freedom, p-value."""

    name: str
    statistic: float
    df: int
    p_value: float

    def to_dict(self) -> dict:
        return {"name": self.name, "statistic": self.statistic,
                "df": self.df, "p_value": self.p_value}


def _chi2_result(name: str, statistic: float, df: int) -> TestResult:
    return TestResult(name=name, statistic=float(statistic), df=df,
                      p_value=chi2_tail(float(statistic), df))


@dataclass(frozen=True)
class CoxFit:
    """Cause-specific Cox fit with a single binary covariate."""

    gamma_hat: float
    se: float
    cause: int
    iterations: int
    score_norm: float


def _cause_reduced(data: Dataset, cause: int):
    """Observation times with the other cause treated as censoring."""
    event = data.status == cause
    return data.time, event, data.x


def logrank_cause(data: Dataset, cause: int = 1) -> TestResult:
    """Two-sample log-rank test for the cause-specific hazard."""
    time, event, x = _cause_reduced(data, cause)
    if not np.any(event):
        raise TestError(f"no type-{cause} events")
    if len(np.unique(x)) < 2:
        raise TestError("two arms required")
    ev_times = np.unique(time[event])
    ts0 = np.sort(time[x == 0])
    ts1 = np.sort(time[x == 1])
    n0 = len(ts0) - np.searchsorted(ts0, ev_times, side="left")
    n1 = len(ts1) - np.searchsorted(ts1, ev_times, side="left")
    n_tot = n0 + n1

    d1 = np.zeros(len(ev_times))
    d_tot = np.zeros(len(ev_times))
    idx = np.searchsorted(ev_times, time[event])
    np.add.at(d_tot, idx, 1.0)
    np.add.at(d1, idx[x[event] == 1], 1.0)

    expected = d_tot * n1 / n_tot
    with np.errstate(divide="ignore", invalid="ignore"):
        var = d_tot * (n1 / n_tot) * (n0 / n_tot) * (n_tot - d_tot) / (n_tot - 1.0)
    var = np.where(n_tot > 1, var, 0.0)
    v = var.sum()
    if v <= 0:
        raise TestError("zero variance in the log-rank statistic")
    observed_minus_expected = (d1 - expected).sum()
    stat = observed_minus_expected**2 / v
    return _chi2_result(f"T_LR_l{cause}", stat, 1)


def fit_cox_csh(data: Dataset, cause: int) -> CoxFit:
    """Cause-specific Cox partial likelihood (binary arm, Breslow ties)."""
    time, event, x = _cause_reduced(data, cause)
    if not np.any(event & (x == 0)) or not np.any(event & (x == 1)):
        raise FitError("monotone likelihood: all events in one arm")
    te = np.sort(time[event])
    xe = x[event][np.argsort(time[event], kind="stable")]
    ts0 = np.sort(time[x == 0])
    ts1 = np.sort(time[x == 1])
    n0 = (len(ts0) - np.searchsorted(ts0, te, side="left")).astype(float)
    n1 = (len(ts1) - np.searchsorted(ts1, te, side="left")).astype(float)

    gamma = 0.0
    norm = np.inf
    for it in range(1, 101):
        eg = math.exp(gamma)
        frac = n1 * eg / (n0 + n1 * eg)
        score = float((xe - frac).sum())
        info = float((frac - frac**2).sum())
        if info <= 0:
            raise FitError("degenerate information in Cox fit")
        norm = abs(score)
        if norm < 1e-10:
            break
        gamma += score / info
    if norm > 1e-8:
        raise FitError(f"Cox fit did not converge (score {norm:.2e})")
    eg = math.exp(gamma)
    frac = n1 * eg / (n0 + n1 * eg)
    info = float((frac - frac**2).sum())
    return CoxFit(gamma_hat=float(gamma), se=float(1.0 / math.sqrt(info)),
                  cause=cause, iterations=it, score_norm=float(norm))


def cox_wald(data: Dataset, cause: int = 1) -> TestResult:
    """One-degree-of-freedom Wald test of no effect on one intensity."""
    fit = fit_cox_csh(data, cause)
    stat = (fit.gamma_hat / fit.se) ** 2
    return _chi2_result(f"T_Cox_l{cause}", stat, 1)


def joint_cox_wald(data: Dataset) -> TestResult:
    """Two-degree-of-freedom Wald test of no effect on either intensity."""
    try:
        f1 = fit_cox_csh(data, 1)
        f2 = fit_cox_csh(data, 2)
    except FitError as exc:
        raise TestError(f"joint Cox test unavailable: {exc}") from exc
    stat = (f1.gamma_hat / f1.se) ** 2 + (f2.gamma_hat / f2.se) ** 2
    return _chi2_result("T_Cox_l1l2", stat, 2)


def gray_test(data: Dataset, censoring, weight_scheme: str = "stabilized") -> TestResult:
    """Two-sample CIF test realized as the FG pseudo-score test at zero."""
    stat, _ = fg_score_test_null(data, censoring, weight_scheme)
    return _chi2_result("T_Gray_F1", stat, 1)


def wald_cif(fit) -> TestResult:
    """Robust Wald test of no effect on the type-1 CIF from a fitted model."""
    if isinstance(fit, FgFit):
        se = fit.se_robust
        name = "T_FG_F1"
    elif isinstance(fit, DbFit):
        se = fit.se_robust
        name = f"T_DB{len(fit.grid)}_F1"
    else:
        raise TestError(f"unsupported fit type {type(fit).__name__}")
    if not np.isfinite(se) or se <= 0:
        raise VarianceError("missing or invalid robust standard error")
    stat = (fit.beta_hat / se) ** 2
    return _chi2_result(name, stat, 1)


def gof_fg_wald(data: Dataset, censoring, b_spec: str = "t",
                weight_scheme: str = "stabilized") -> TestResult:
    """Wald test of a time-constant effect in the FG model."""
    fit = fg_fit_extended(data, censoring, b_spec, weight_scheme)
    var = fit.cov_robust[1, 1]
    if var <= 0:
        raise VarianceError("non-positive variance for the time-varying term")
    return _chi2_result("GOF_FG_Wald", fit.nu_hat**2 / var, 1)


def gof_db_wald(data: Dataset, censoring, grid, b_spec: str = "t") -> TestResult:
    """Wald test of a time-constant effect in the DB model."""
    fit = db_fit_extended(data, censoring, grid, b_spec)
    var = fit.cov[-1, -1]
    if var <= 0:
        raise VarianceError("non-positive variance for the time-varying term")
    return _chi2_result("GOF_DB_Wald", fit.nu_hat**2 / var, 1)


def gof_db_contrast(ufit: DbUnconstrainedFit) -> TestResult:
    """Wald test that the per-time effects share a common value.

    Uses successive differences of the unconstrained effects and their
    bootstrap covariance; the statistic is chi-square with R-1 degrees of
    freedom.
    """
    if ufit.cov_beta is None:
        raise TestError("unconstrained fit carries no bootstrap covariance "
                        "(was n_boot=0?)")
    R = len(ufit.grid)
    if R < 2:
        raise TestError("need at least two grid points for a contrast test")
    contrast = np.zeros((R - 1, R))
    contrast[np.arange(R - 1), np.arange(R - 1)] = 1.0
    contrast[np.arange(R - 1), np.arange(1, R)] = -1.0
    diff = contrast @ ufit.beta_hat
    if np.allclose(diff, 0.0, atol=1e-12):
        return _chi2_result("GOF_DB_Contrast", 0.0, R - 1)
    cmat = contrast @ ufit.cov_beta @ contrast.T
    try:
        sol = np.linalg.solve(cmat, diff)
    except np.linalg.LinAlgError as exc:
        raise TestError(f"singular contrast covariance: {exc}") from exc
    stat = float(diff @ sol)
    return _chi2_result("GOF_DB_Contrast", max(stat, 0.0), R - 1)


def latouche_sample_size(omega: float, omega_prime: float, beta1: float,
                         p_treat: float = 0.5, p_obs_type1: float = 0.5) -> int:
    """Sample size for a two-sided Wald test of the CIF effect.

    ``omega`` is the two-sided size, ``omega_prime`` one minus the target
    power, ``beta1`` the alternative log effect, and ``p_obs_type1`` the
    proportion of observed type-1 events by the end of follow-up.
    """
    for name, p in (("omega", omega), ("omega_prime", omega_prime),
                    ("p_treat", p_treat), ("p_obs_type1", p_obs_type1)):
        if not 0.0 < p < 1.0:
            raise DomainError(f"{name} must lie in (0, 1), got {p}")
    if beta1 == 0.0:
        raise DomainError("beta1 must be nonzero (no alternative to power)")
    z_a = normal_quantile(1.0 - omega / 2.0)
    z_b = normal_quantile(1.0 - omega_prime)
    n = (z_a + z_b) ** 2 / (beta1**2 * p_treat * (1.0 - p_treat)) / p_obs_type1
    return int(math.ceil(n))
