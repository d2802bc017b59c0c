"""True competing-risks processes and their closed-form marginal features.

Two truth families are supported:

* :class:`IntensityModel` -- cause-specific intensities of multiplicative
  form ``lam_0k(t|X) = kappa_k * rate_k * (rate_k * t)**(kappa_k-1) *
  exp(gamma_k * X)`` (exponential when both shapes are 1).
* :class:`CifGenerativeModel` -- a process defined directly through
  cloglog-linked cumulative incidence functions, with either a shared
  treatment effect on both CIFs ("coupled") or a separate effect on the
  competing-event CIF ("extended").

All evaluation functions are pure; model objects are immutable and safe to
share across threads/processes.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .errors import CalibrationError, ConfigError, DomainError
from .links import cloglog

__all__ = [
    "IntensityModel",
    "CifGenerativeModel",
    "calibrate_baseline",
    "eval_intensity",
    "eval_marginals",
    "eval_cif_model",
    "adequacy_curve",
]

_QUAD_OPTS = dict(epsabs=1e-12, epsrel=1e-10, limit=200)


@dataclass(frozen=True)
class IntensityModel:
    """Competing-risks process with Weibull-type cause-specific intensities.

    Parameters
    ----------
    rate1, rate2 : float
        Baseline rate parameters (events per unit time), both positive.
    log_hr1, log_hr2 : float
        Log hazard ratios of the binary treatment on each cause.
    shape1, shape2 : float
        Weibull shapes; 1 gives time-homogeneous (exponential) intensities.
    tau : float
        Administrative follow-up horizon.
    """

    rate1: float
    rate2: float
    log_hr1: float = 0.0
    log_hr2: float = 0.0
    shape1: float = 1.0
    shape2: float = 1.0
    tau: float = 1.0

    def __post_init__(self):
        for name in ("shape1", "shape2", "tau"):
            if not np.isfinite(getattr(self, name)) or getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be finite and > 0")
        # one rate may be 0 (a degenerate single-cause process), not both
        for name in ("rate1", "rate2"):
            if not np.isfinite(getattr(self, name)) or getattr(self, name) < 0:
                raise ConfigError(f"{name} must be finite and >= 0")
        if self.rate1 + self.rate2 <= 0:
            raise ConfigError("at least one baseline rate must be positive")

    @property
    def is_exponential(self) -> bool:
        return self.shape1 == 1.0 and self.shape2 == 1.0

    def _params(self, cause: int):
        if cause == 1:
            return self.shape1, self.rate1, self.log_hr1
        if cause == 2:
            return self.shape2, self.rate2, self.log_hr2
        raise DomainError(f"cause must be 1 or 2, got {cause}")

    def hazard(self, t, x, cause: int):
        """Cause-specific intensity at time t > 0 for treatment arm x."""
        kappa, rate, loghr = self._params(cause)
        t = np.asarray(t, dtype=float)
        if np.any(~np.isfinite(t)):
            raise DomainError("t must be finite")
        if kappa != 1.0 and np.any(t <= 0):
            raise DomainError("t must be > 0 for non-exponential shapes")
        if rate == 0.0:
            out = np.zeros_like(t)
        else:
            out = (kappa * rate * (rate * t) ** (kappa - 1.0)
                   * np.exp(loghr * np.asarray(x)))
        return out if out.ndim else float(out)

    def cum_hazard(self, t, x, cause: int):
        kappa, rate, loghr = self._params(cause)
        t = np.asarray(t, dtype=float)
        out = (rate * t) ** kappa * np.exp(loghr * np.asarray(x))
        return out if out.ndim else float(out)

    def survival(self, t, x):
        """Event-free probability S(t|x)."""
        t = np.asarray(t, dtype=float)
        out = np.exp(-self.cum_hazard(t, x, 1) - self.cum_hazard(t, x, 2))
        return out if out.ndim else float(out)

    def subdensity(self, t, x, cause: int):
        """Subdensity f_k(t|x) = lam_0k(t|x) S(t|x)."""
        return self.hazard(t, x, cause) * self.survival(t, x)

    def cif(self, t, x, cause: int = 1):
        """Cumulative incidence F_k(t|x).

        Closed form when the two shapes coincide; otherwise adaptive
        quadrature on the substituted integral (smooth at the origin for
        any positive shape).
        """
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        if np.any(t_arr < 0):
            raise DomainError("t must be >= 0")
        ka, ra, la = self._params(cause)
        kb, rb, lb = self._params(2 if cause == 1 else 1)
        ca = ra**ka * np.exp(la * x)
        cb = rb**kb * np.exp(lb * x)
        if ka == kb:
            tot = ca + cb
            out = ca / tot * -np.expm1(-tot * t_arr**ka)
        else:
            # substitute w = u**ka: integrand ca*exp(-ca*w - cb*w**(kb/ka))
            p = kb / ka
            out = np.empty_like(t_arr)
            for i, ti in enumerate(t_arr):
                if ti == 0.0:
                    out[i] = 0.0
                    continue
                val, err = quad(lambda w: ca * np.exp(-ca * w - cb * w**p),
                                0.0, ti**ka, **_QUAD_OPTS)
                if err > 1e-8:
                    raise CalibrationError(
                        f"CIF quadrature achieved abs error {err:.2e} only")
                out[i] = val
        return out if np.ndim(t) else float(out[0])

    def subdensity_ratio(self, t, x):
        """P(cause 1 | event at t, x) = lam_01 / (lam_01 + lam_02)."""
        h1 = self.hazard(t, x, 1)
        h2 = self.hazard(t, x, 2)
        return h1 / (h1 + h2)

    def with_effects(self, exp_hr1: float, exp_hr2: float) -> "IntensityModel":
        return replace(self, log_hr1=float(np.log(exp_hr1)), log_hr2=float(np.log(exp_hr2)))

    @classmethod
    def calibrated(cls, p_event: float, p_type1: float, shape1: float = 1.0,
                   shape2: float = 1.0, tau: float = 1.0,
                   exp_hr1: float = 1.0, exp_hr2: float = 1.0) -> "IntensityModel":
        """Build a model whose control arm hits the two design constraints.

        ``p_event = P(T <= tau | X=0)`` and
        ``p_type1 = P(T1 < T2 | T <= tau, X=0)``.
        """
        rate1, rate2 = calibrate_baseline(p_event, p_type1, shape1, shape2, tau)
        return cls(rate1=rate1, rate2=rate2,
                   log_hr1=float(np.log(exp_hr1)), log_hr2=float(np.log(exp_hr2)),
                   shape1=shape1, shape2=shape2, tau=tau)


def calibrate_baseline(p_event: float, p_type1: float, shape1: float = 1.0,
                       shape2: float = 1.0, tau: float = 1.0) -> tuple[float, float]:
    """Solve for baseline rates matching the control-arm design constraints.

    Constraint 1, ``P(T <= tau | X=0) = p_event``, is linear in the
    cumulative hazards ``c_k = (rate_k * tau)**kappa_k``; constraint 2,
    ``P(T1 < T2 | T <= tau, X=0) = p_type1``, is solved by Brent iteration
    on the share of cause 1 in the total cumulative hazard.
    """
    if not (0.0 < p_event < 1.0 and 0.0 < p_type1 < 1.0):
        raise CalibrationError("p_event and p_type1 must lie in (0, 1)")
    if shape1 <= 0 or shape2 <= 0 or tau <= 0:
        raise CalibrationError("shapes and tau must be > 0")
    total = -np.log1p(-p_event)
    if shape1 == shape2:
        c1 = p_type1 * total
        c2 = total - c1
    else:
        p = shape2 / shape1

        def cif1_at_tau(c1):
            c2 = total - c1
            val, _ = quad(lambda w: c1 * np.exp(-c1 * w - c2 * w**p), 0.0, 1.0,
                          **_QUAD_OPTS)
            return val

        target = p_type1 * p_event
        lo, hi = 1e-12 * total, (1.0 - 1e-12) * total
        flo = cif1_at_tau(lo) - target
        fhi = cif1_at_tau(hi) - target
        if flo * fhi > 0:
            raise CalibrationError("constraints infeasible for the given shapes")
        c1 = brentq(lambda c: cif1_at_tau(c) - target, lo, hi, xtol=1e-14)
        c2 = total - c1
    rate1 = c1 ** (1.0 / shape1) / tau
    rate2 = c2 ** (1.0 / shape2) / tau
    return float(rate1), float(rate2)


@dataclass(frozen=True)
class CifGenerativeModel:
    """Process defined by cloglog-linked CIFs.

    ``cif1(t|x) = 1 - (1 - q*(1 - e^{-t}))**exp(beta*x)`` with
    ``q = F1(inf | X=0)``.  The competing-event CIF is
    ``(1-q)**exp(beta*x) * (1 - e^{-t*exp(b2*x)})`` where ``b2 = beta`` for
    the coupled variant and a free ``beta2`` for the extended variant.
    """

    q: float
    beta: float = 0.0
    beta2: float | None = None
    variant: str = "extended"
    tau: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.q < 1.0:
            raise ConfigError(f"q must lie in (0, 1), got {self.q}")
        if self.variant not in ("coupled", "extended"):
            raise ConfigError(f"unknown variant {self.variant!r}")
        if self.variant == "coupled" and self.beta2 is not None:
            raise ConfigError("the coupled variant ties the competing-event "
                              "effect to beta; beta2 is not a free parameter")
        if self.variant == "extended" and self.beta2 is None:
            object.__setattr__(self, "beta2", 0.0)
        if self.tau <= 0:
            raise ConfigError("tau must be > 0")

    @property
    def _b2(self) -> float:
        return self.beta if self.variant == "coupled" else self.beta2

    def cif1_inf(self, x) -> float:
        return 1.0 - (1.0 - self.q) ** np.exp(self.beta * np.asarray(x))

    def cif1(self, t, x):
        t = np.asarray(t, dtype=float)
        ebx = np.exp(self.beta * np.asarray(x))
        base = self.q * -np.expm1(-t)
        out = 1.0 - (1.0 - base) ** ebx
        return out if out.ndim else float(out)

    def cif2(self, t, x):
        t = np.asarray(t, dtype=float)
        ebx = np.exp(self.beta * np.asarray(x))
        scale = (1.0 - self.q) ** ebx
        out = scale * -np.expm1(-t * np.exp(self._b2 * np.asarray(x)))
        return out if out.ndim else float(out)

    def cif(self, t, x, cause: int = 1):
        if cause == 1:
            return self.cif1(t, x)
        if cause == 2:
            return self.cif2(t, x)
        raise DomainError(f"cause must be 1 or 2, got {cause}")

    def subdensity(self, t, x, cause: int):
        t = np.asarray(t, dtype=float)
        ebx = np.exp(self.beta * np.asarray(x))
        if cause == 1:
            base = self.q * -np.expm1(-t)
            out = ebx * (1.0 - base) ** (ebx - 1.0) * self.q * np.exp(-t)
        elif cause == 2:
            e2 = np.exp(self._b2 * np.asarray(x))
            out = (1.0 - self.q) ** ebx * e2 * np.exp(-t * e2)
        else:
            raise DomainError(f"cause must be 1 or 2, got {cause}")
        return out if out.ndim else float(out)

    def total_cdf(self, t, x):
        out = self.cif1(t, x) + self.cif2(t, x)
        return out

    def survival(self, t, x):
        return 1.0 - self.total_cdf(t, x)

    def hazard(self, t, x, cause: int):
        """Implied cause-specific intensity f_k / (1 - F1 - F2)."""
        return self.subdensity(t, x, cause) / self.survival(t, x)

    def subdensity_ratio(self, t, x):
        f1 = self.subdensity(t, x, 1)
        f2 = self.subdensity(t, x, 2)
        return f1 / (f1 + f2)

    def with_effects(self, exp_b: float, exp_b2: float | None = None) -> "CifGenerativeModel":
        beta2 = None if exp_b2 is None else float(np.log(exp_b2))
        if self.variant == "coupled":
            if exp_b2 is not None:
                raise ConfigError("coupled variant admits no separate competing-event effect")
            return replace(self, beta=float(np.log(exp_b)))
        return replace(self, beta=float(np.log(exp_b)),
                       beta2=0.0 if beta2 is None else beta2)

    @classmethod
    def calibrated(cls, f1_at_tau: float, exp_b: float = 1.0,
                   exp_b2: float | None = None, variant: str = "extended",
                   tau: float = 1.0) -> "CifGenerativeModel":
        """Choose q so that the control arm has ``F1(tau | X=0) = f1_at_tau``."""
        denom = -np.expm1(-tau)
        q = f1_at_tau / denom
        if not 0.0 < q < 1.0:
            raise CalibrationError(
                f"f1_at_tau={f1_at_tau} infeasible at tau={tau} (implies q={q:.4f})")
        beta2 = None if exp_b2 is None else float(np.log(exp_b2))
        if variant == "coupled":
            return cls(q=float(q), beta=float(np.log(exp_b)), variant=variant, tau=tau)
        return cls(q=float(q), beta=float(np.log(exp_b)),
                   beta2=0.0 if beta2 is None else beta2, variant=variant, tau=tau)


def eval_intensity(model: IntensityModel, t, x, cause: int):
    """Cause-specific intensity; see :meth:`IntensityModel.hazard`."""
    return model.hazard(t, x, cause)


def eval_marginals(model: IntensityModel, t, x):
    """Return ``(S, F1, F2)`` at time t for arm x, conserving S+F1+F2 = 1."""
    s = model.survival(t, x)
    f1 = model.cif(t, x, 1)
    f2 = 1.0 - s - f1
    return s, f1, f2


def eval_cif_model(model: CifGenerativeModel, t, x):
    """Return ``(F1, F2, f1, f2)`` for the CIF-defined process."""
    return (model.cif1(t, x), model.cif2(t, x),
            model.subdensity(t, x, 1), model.subdensity(t, x, 2))


def adequacy_curve(model, grid):
    """Cloglog-scale arm difference of the true type-1 CIF on a time grid.

    Returns ``cloglog(F1(t|1)) - cloglog(F1(t|0))`` per grid point; a flat
    curve means the proportional cloglog model holds exactly.  Grid points
    where either CIF is 0 are skipped (returned as NaN) with a warning.
    """
    grid = np.asarray(grid, dtype=float)
    if np.any(grid <= 0):
        raise DomainError("grid points must be > 0")
    f1_0 = np.atleast_1d(model.cif(grid, 0, 1) if isinstance(model, IntensityModel)
                         else model.cif1(grid, 0))
    f1_1 = np.atleast_1d(model.cif(grid, 1, 1) if isinstance(model, IntensityModel)
                         else model.cif1(grid, 1))
    out = np.full(grid.shape, np.nan)
    ok = (f1_0 > 0) & (f1_1 > 0) & (f1_0 < 1) & (f1_1 < 1)
    if not np.all(ok):
        warnings.warn("adequacy curve undefined at some grid points; skipped",
                      stacklevel=2)
    out[ok] = cloglog(f1_1[ok]) - cloglog(f1_0[ok])
    return out
