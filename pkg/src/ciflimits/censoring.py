"""Kaplan-Meier estimation of the random-censoring distribution and IPCW.

The product-limit estimate treats random loss to follow-up (status 0 before
the horizon) as the event of interest; disease events and administrative
censoring enter as censored observations for this reversed problem.  The
curve is evaluated with the left-limit convention: the value at t uses
jumps strictly before t.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .dataset import Dataset, SubjectRecord
from .errors import FitError, VarianceError

__all__ = ["KmCurve", "km_censoring", "ipcw_weight", "weighted_response",
           "MIN_SURVIVAL"]

MIN_SURVIVAL = 1e-10  # floor before an IPCW weight counts as overflow


@dataclass(frozen=True)
class KmCurve:
    """Left-continuous product-limit step function.

    ``times`` holds the ascending jump locations (observed random-censoring
    times) and ``values`` the post-jump survival levels.
    """

    times: np.ndarray
    values: np.ndarray
    stratum: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "times", np.asarray(self.times, dtype=float))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))

    def evaluate(self, t):
        """Survival just before t, i.e. the product over jumps u < t."""
        idx = np.searchsorted(self.times, np.asarray(t, dtype=float), side="left")
        padded = np.concatenate(([1.0], self.values))
        out = padded[idx]
        return out if out.ndim else float(out)

    def __call__(self, t):
        return self.evaluate(t)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["time", "value"])
            for t, v in zip(self.times, self.values):
                writer.writerow([format(t, ".17g"), format(v, ".17g")])


def _km_fit(observed: np.ndarray, is_cens_event: np.ndarray,
            stratum: int | None = None) -> KmCurve:
    if len(observed) == 0:
        raise FitError("cannot fit a censoring curve to an empty stratum")
    jump_times, first_idx = np.unique(observed[is_cens_event], return_inverse=True)
    d = np.bincount(first_idx, minlength=len(jump_times)).astype(float)
    obs_sorted = np.sort(observed)
    at_risk = len(observed) - np.searchsorted(obs_sorted, jump_times, side="left")
    with np.errstate(divide="ignore", invalid="ignore"):
        factors = 1.0 - d / at_risk
    values = np.cumprod(factors)
    return KmCurve(times=jump_times, values=values, stratum=stratum)


def km_censoring(data: Dataset, stratify_by_x: bool = False):
    """Product-limit estimate of P(C_r > t), optionally per treatment arm.

    Returns a single :class:`KmCurve`, or a ``{0: curve, 1: curve}`` dict
    when stratified.
    """
    cens_event = data.randomly_censored
    if not stratify_by_x:
        return _km_fit(data.time, cens_event)
    out = {}
    for arm in (0, 1):
        mask = data.x == arm
        if not np.any(mask):
            raise FitError(f"stratified censoring fit: arm {arm} is empty")
        out[arm] = _km_fit(data.time[mask], cens_event[mask], stratum=arm)
    return out


def _curve_for(curves, x: int) -> KmCurve:
    if isinstance(curves, dict):
        return curves[x]
    return curves


def _checked_survival(curve: KmCurve, t: float) -> float:
    g = curve.evaluate(t)
    if g <= MIN_SURVIVAL:
        raise VarianceError(
            f"IPCW weight overflow: censoring survival {g:.3e} at t={t}")
    return g


def ipcw_weight(curves, subject: SubjectRecord, t: float, tau: float) -> float:
    """Inverse-probability-of-censoring weight of one subject at time t.

    Implements ``1(t <= tau) * 1(C_r > min(T, t)) / G(min(T, t))``; a
    subject already randomly censored before the evaluation point gets
    weight 0.
    """
    if t > tau:
        return 0.0
    curve = _curve_for(curves, subject.x)
    if subject.status == 0:
        if subject.time < tau and t >= subject.time:
            return 0.0  # randomly censored before min(T, t)
        return 1.0 / _checked_survival(curve, t)
    eval_at = min(subject.time, t)
    return 1.0 / _checked_survival(curve, eval_at)


def weighted_response(curves, subject: SubjectRecord, s_r: float,
                      tau: float | None = None) -> float:
    """IPCW-weighted type-1 indicator ``1(C >= min(T, s_r)) N1(s_r) / G``.

    Zero for subjects without a type-1 event by ``s_r``; for observed
    type-1 events the weak inequality holds automatically and the weight
    is ``1 / G(T)``.
    """
    if subject.status != 1 or subject.time > s_r:
        return 0.0
    curve = _curve_for(curves, subject.x)
    return 1.0 / _checked_survival(curve, subject.time)


def weighted_response_matrix(curves, data: Dataset, grid) -> np.ndarray:
    """All subjects' weighted responses on a time grid, shape (n, R)."""
    grid = np.asarray(grid, dtype=float)
    n = len(data)
    if isinstance(curves, dict):
        g_at_time = np.empty(n)
        for arm in (0, 1):
            mask = data.x == arm
            g_at_time[mask] = curves[arm].evaluate(data.time[mask])
    else:
        g_at_time = np.asarray(curves.evaluate(data.time))
    is_event1 = data.status == 1
    if np.any(g_at_time[is_event1] <= MIN_SURVIVAL):
        raise VarianceError("IPCW weight overflow in weighted responses")
    inv_g = np.where(is_event1, 1.0 / np.maximum(g_at_time, MIN_SURVIVAL), 0.0)
    return inv_g[:, None] * (data.time[:, None] <= grid[None, :])
