"""Direct binomial regression of the cloglog CIF model on a time grid.

At grid times s_1 < ... < s_R the model ``cloglog(F1(s_r|X)) = alpha_r +
beta X`` is fit by GEE-style estimating equations under working
independence, with IPCW-weighted event indicators as responses.  The same
equations, with population expectations in place of sample sums, define
the deterministic estimand solved in :mod:`ciflimits.limits`; the solver
core here is shared between the two.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .censoring import km_censoring, weighted_response_matrix
from .dataset import Dataset
from .errors import ConvergenceError, DomainError, FitError, VarianceError
from .links import cloglog, ee_weight, ee_weight_deriv, inv_cloglog, inv_cloglog_deriv

__all__ = [
    "DbFit",
    "DbExtendedFit",
    "DbUnconstrainedFit",
    "default_grid",
    "db_fit",
    "db_fit_extended",
    "db_robust_variance",
    "db_fit_unconstrained",
    "db_predict_cif",
]


def default_grid(tau: float, n_points: int = 6) -> np.ndarray:
    """Equally spaced interior grid ``s_r = r * tau / (R + 1)``."""
    r = np.arange(1, n_points + 1)
    return r * tau / (n_points + 1)


def _system(theta, w, targets, b_vals):
    """Estimating equations and exact Jacobian of the cloglog system.

    ``w = (w0, w1)`` are the arm masses and ``targets`` is the (2, R)
    array of per-arm response masses (sample sums of weighted responses,
    or ``w_x * F1(s_r | x)`` for the population version).  ``b_vals`` is
    None for the proportional model or the R vector b(s_r) for the
    time-varying extension.
    """
    R = targets.shape[1]
    extended = b_vals is not None
    p = R + (2 if extended else 1)
    alpha = theta[:R]
    beta = theta[R]
    u0 = alpha
    u1 = alpha + beta + (theta[R + 1] * b_vals if extended else 0.0)

    resid = np.empty((2, R))
    tfac = np.empty((2, R))
    for xval, u in ((0, u0), (1, u1)):
        c = ee_weight(u)
        h = inv_cloglog(u)
        resid[xval] = c * (targets[xval] - w[xval] * h)
        tfac[xval] = (ee_weight_deriv(u) * (targets[xval] - w[xval] * h)
                      - c * w[xval] * inv_cloglog_deriv(u))

    score = np.zeros(p)
    score[:R] = resid[0] + resid[1]
    score[R] = resid[1].sum()
    jac = np.zeros((p, p))
    jac[np.arange(R), np.arange(R)] = tfac[0] + tfac[1]
    jac[:R, R] = tfac[1]
    jac[R, :R] = tfac[1]
    jac[R, R] = tfac[1].sum()
    if extended:
        score[R + 1] = (b_vals * resid[1]).sum()
        jac[:R, R + 1] = b_vals * tfac[1]
        jac[R + 1, :R] = b_vals * tfac[1]
        jac[R, R + 1] = jac[R + 1, R] = (b_vals * tfac[1]).sum()
        jac[R + 1, R + 1] = (b_vals**2 * tfac[1]).sum()
    return score, jac


def solve_cloglog_system(w, targets, b_vals=None, max_iter: int = 200):
    """Newton solve of the estimating equations; returns (theta, jac, diag)."""
    targets = np.asarray(targets, dtype=float)
    R = targets.shape[1]
    extended = b_vals is not None
    p = R + (2 if extended else 1)
    pooled = np.clip(targets.sum(axis=0) / (w[0] + w[1]), 1e-6, 1.0 - 1e-6)
    theta = np.zeros(p)
    theta[:R] = cloglog(pooled)

    score, jac = _system(theta, w, targets, b_vals)
    norm = np.abs(score).max()
    it = 0
    while norm > 1e-10 and it < max_iter:
        try:
            step = np.linalg.solve(jac, score)
        except np.linalg.LinAlgError as exc:
            raise FitError(f"singular estimating-equation Jacobian: {exc}") from exc
        scale = 1.0
        improved = False
        for _ in range(50):
            cand = theta - scale * step
            s_new, j_new = _system(cand, w, targets, b_vals)
            n_new = np.abs(s_new).max()
            if n_new < norm or n_new <= 1e-10:
                theta, score, jac, norm = cand, s_new, j_new, n_new
                improved = True
                break
            scale *= 0.5
        if not improved:
            break
        it += 1
    if norm > 1e-8:
        raise ConvergenceError(
            f"estimating equations not solved (norm {norm:.3e} after {it} steps)")
    return theta, jac, {"iterations": it, "score_norm": float(norm)}


@dataclass(frozen=True)
class DbFit:
    """Direct binomial fit: grid baselines plus a common log effect."""

    grid: np.ndarray
    alpha_hat: np.ndarray
    beta_hat: float
    cov: np.ndarray | None
    iterations: int
    score_norm: float
    n: int
    monotonicity_violations: int

    @property
    def se_robust(self) -> float:
        if self.cov is None:
            raise VarianceError("no covariance on this fit")
        return float(np.sqrt(self.cov[-1, -1]))


@dataclass(frozen=True)
class DbExtendedFit:
    """Fit with time-varying effect beta + nu*b(s_r) for goodness of fit."""

    grid: np.ndarray
    alpha_hat: np.ndarray
    beta_hat: float
    nu_hat: float
    b_spec: str
    cov: np.ndarray
    iterations: int
    score_norm: float
    n: int


@dataclass(frozen=True)
class DbUnconstrainedFit:
    """Saturated per-time-point fits (alpha_r, beta_r) with bootstrap cov."""

    grid: np.ndarray
    alpha_hat: np.ndarray
    beta_hat: np.ndarray
    cov_beta: np.ndarray | None
    n_boot: int


def _prepare(data: Dataset, censoring, grid):
    grid = np.sort(np.asarray(grid, dtype=float))  # canonical ascending order
    if np.any(grid <= 0) or np.any(grid >= data.tau):
        raise DomainError("grid points must lie strictly inside (0, tau)")
    if np.any(np.diff(grid) <= 0):
        raise DomainError("grid points must be distinct")
    if len(np.unique(data.x)) < 2:
        raise FitError("non-identifiable: a single treatment arm")
    smax = grid.max()
    for arm in (0, 1):
        if not np.any((data.status == 1) & (data.x == arm) & (data.time <= smax)):
            raise FitError(f"non-identifiable: no type-1 events in arm {arm} "
                           "before the last grid point")
    nmat = weighted_response_matrix(censoring, data, grid)
    arm1 = data.x == 1
    targets = np.vstack([nmat[~arm1].sum(axis=0), nmat[arm1].sum(axis=0)])
    pooled_events = targets.sum(axis=0)
    keep = pooled_events > 0
    if not np.all(keep):
        warnings.warn(f"dropping {int((~keep).sum())} grid point(s) with no "
                      "type-1 events", stacklevel=3)
        grid, targets, nmat = grid[keep], targets[:, keep], nmat[:, keep]
    if grid.size == 0:
        raise FitError("no identifiable grid points remain")
    w = (float((~arm1).sum()), float(arm1.sum()))
    return grid, w, targets, nmat, arm1


def _sandwich(theta, jac, grid, nmat, arm1, b_vals=None):
    R = len(grid)
    alpha = theta[:R]
    beta = theta[R]
    u = alpha[None, :] + (beta + (theta[R + 1] * b_vals if b_vals is not None else 0.0)
                          ) * arm1[:, None]
    c = ee_weight(u)
    resid = c * (nmat - inv_cloglog(u))
    p = len(theta)
    contrib = np.zeros((nmat.shape[0], p))
    contrib[:, :R] = resid
    contrib[:, R] = resid.sum(axis=1) * arm1
    if b_vals is not None:
        contrib[:, R + 1] = (resid * b_vals[None, :]).sum(axis=1) * arm1
    meat = contrib.T @ contrib
    bread = np.linalg.inv(jac)
    return bread @ meat @ bread.T


def db_fit(data: Dataset, censoring, grid, compute_robust: bool = True) -> DbFit:
    """Fit the proportional cloglog model on a grid by Newton iteration.

    The working covariance is the model-based binomial variance at the
    current iterate; the returned covariance is the misspecification-robust
    sandwich built from per-subject estimating-function contributions.
    """
    grid, w, targets, nmat, arm1 = _prepare(data, censoring, grid)
    theta, jac, diag = solve_cloglog_system(w, targets)
    cov = _sandwich(theta, jac, grid, nmat, arm1) if compute_robust else None
    R = len(grid)
    violations = int(np.sum(np.diff(theta[:R]) < 0))
    if violations:
        warnings.warn(f"{violations} monotonicity violation(s) in the fitted "
                      "baseline", stacklevel=2)
    return DbFit(grid=grid, alpha_hat=theta[:R], beta_hat=float(theta[R]),
                 cov=cov, iterations=diag["iterations"],
                 score_norm=diag["score_norm"], n=len(data),
                 monotonicity_violations=violations)


def db_fit_extended(data: Dataset, censoring, grid, b_spec: str = "t") -> DbExtendedFit:
    """Fit the extension with effect beta + nu*b(s_r) on the grid."""
    grid, w, targets, nmat, arm1 = _prepare(data, censoring, grid)
    if b_spec == "t":
        b_vals = grid.copy()
    elif b_spec in ("log", "log t", "logt"):
        b_vals = np.log(grid)
    else:
        raise DomainError(f"unknown b_spec {b_spec!r}; use 't' or 'log'")
    if np.ptp(b_vals) < 1e-12:
        raise FitError("b(s_r) constant on the grid; collinear model")
    theta, jac, diag = solve_cloglog_system(w, targets, b_vals)
    cov = _sandwich(theta, jac, grid, nmat, arm1, b_vals)
    R = len(grid)
    return DbExtendedFit(grid=grid, alpha_hat=theta[:R], beta_hat=float(theta[R]),
                         nu_hat=float(theta[R + 1]), b_spec=b_spec, cov=cov,
                         iterations=diag["iterations"],
                         score_norm=diag["score_norm"], n=len(data))


def db_robust_variance(fit: DbFit, data: Dataset, censoring,
                       method: str = "sandwich", n_boot: int = 500,
                       seed: int = 0):
    """Covariance of the fitted parameters.

    ``"sandwich"`` recomputes the analytic robust covariance; the
    ``"bootstrap"`` mode resamples subjects and refits the censoring curve
    and the model, capturing IPCW estimation noise as well.
    """
    if method == "sandwich":
        grid, w, targets, nmat, arm1 = _prepare(data, censoring, fit.grid)
        theta = np.concatenate([fit.alpha_hat, [fit.beta_hat]])
        _, jac = _system(theta, w, targets, None)
        return _sandwich(theta, jac, grid, nmat, arm1)
    if method == "bootstrap":
        rng = np.random.default_rng(seed)
        n = len(data)
        betas = []
        attempts = 0
        while len(betas) < n_boot and attempts < 10 * n_boot:
            attempts += 1
            idx = rng.integers(0, n, n)
            sample = Dataset(data.time[idx], data.status[idx], data.x[idx],
                             data.tau, ids=np.arange(n))
            try:
                curve = km_censoring(sample, stratify_by_x=isinstance(censoring, dict))
                refit = db_fit(sample, curve, fit.grid, compute_robust=False)
            except (FitError, VarianceError, DomainError):
                continue
            betas.append(refit.beta_hat)
        if len(betas) < n_boot:
            raise VarianceError("too many non-identifiable bootstrap resamples")
        return float(np.var(betas, ddof=1))
    raise DomainError(f"unknown method {method!r}")


def _saturated(nmat, arm1, w):
    p0 = nmat[~arm1].sum(axis=0) / w[0]
    p1 = nmat[arm1].sum(axis=0) / w[1]
    if np.any(p0 <= 0) or np.any(p0 >= 1) or np.any(p1 <= 0) or np.any(p1 >= 1):
        raise FitError("saturated per-time fit non-identifiable "
                       "(weighted event fraction outside (0, 1))")
    alpha = cloglog(p0)
    beta = cloglog(p1) - alpha
    return np.atleast_1d(alpha), np.atleast_1d(beta)


def db_fit_unconstrained(data: Dataset, censoring, grid, n_boot: int = 500,
                         seed: int = 0) -> DbUnconstrainedFit:
    """Per-time-point fits (alpha_r, beta_r); each two-equation system has
    the closed-form saturated solution.  The covariance of the beta vector
    comes from a nonparametric subject bootstrap with the censoring curve
    refit in every resample."""
    grid, w, targets, nmat, arm1 = _prepare(data, censoring, grid)
    alpha, beta = _saturated(nmat, arm1, w)
    cov = None
    if n_boot > 0:
        rng = np.random.default_rng(seed)
        n = len(data)
        rows = []
        for _ in range(n_boot):
            for attempt in range(10):
                idx = rng.integers(0, n, n)
                sample = Dataset(data.time[idx], data.status[idx], data.x[idx],
                                 data.tau, ids=np.arange(n))
                try:
                    curve = km_censoring(sample,
                                         stratify_by_x=isinstance(censoring, dict))
                    bmat = weighted_response_matrix(curve, sample, grid)
                    a1 = sample.x == 1
                    wb = (float((~a1).sum()), float(a1.sum()))
                    if wb[0] == 0 or wb[1] == 0:
                        raise FitError("single-arm resample")
                    _, beta_b = _saturated(bmat, a1, wb)
                except (FitError, VarianceError):
                    continue
                rows.append(beta_b)
                break
            else:
                raise FitError("bootstrap resampling failed 10 times in a row")
        rows = np.asarray(rows)
        cov = np.cov(rows.T, ddof=1)
        cov = np.atleast_2d(cov)
    return DbUnconstrainedFit(grid=grid, alpha_hat=alpha, beta_hat=beta,
                              cov_beta=cov, n_boot=n_boot)


def db_predict_cif(fit: DbFit, s_r: float, x):
    """Fitted CIF ``h(alpha_r + beta x)`` at a grid time."""
    matches = np.nonzero(np.isclose(fit.grid, s_r, rtol=0, atol=1e-12))[0]
    if len(matches) == 0:
        raise DomainError(f"{s_r} is not a grid point of this fit")
    r = matches[0]
    out = inv_cloglog(fit.alpha_hat[r] + fit.beta_hat * np.asarray(x))
    return out if np.ndim(out) else float(out)
