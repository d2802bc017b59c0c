"""Complementary log-log link and its inverse.

The cumulative incidence regression model used throughout this package is

    cloglog(F1(t | X)) = alpha(t) + beta * X,

so the link ``cloglog(u) = log(-log(1 - u))`` and its inverse
``inv_cloglog(v) = 1 - exp(-exp(v))`` appear in every estimating equation.
All functions accept scalars or numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError

__all__ = [
    "cloglog",
    "inv_cloglog",
    "inv_cloglog_deriv",
    "ee_weight",
    "ee_weight_deriv",
    "LinkFunction",
]


def cloglog(u):
    """Link g(u) = log(-log(1 - u)) for u in (0, 1)."""
    u = np.asarray(u, dtype=float)
    if np.any(u <= 0.0) or np.any(u >= 1.0):
        raise DomainError("cloglog requires arguments strictly inside (0, 1)")
    out = np.log(-np.log1p(-u))
    return out if out.ndim else float(out)


def inv_cloglog(v):
    """Inverse link h(v) = 1 - exp(-exp(v)), strictly increasing into (0, 1)."""
    v = np.asarray(v, dtype=float)
    out = -np.expm1(-np.exp(v))
    return out if out.ndim else float(out)


def inv_cloglog_deriv(v):
    """Derivative h'(v) = exp(v - exp(v)) of the inverse link."""
    v = np.asarray(v, dtype=float)
    out = np.exp(v - np.exp(v))
    return out if out.ndim else float(out)


def ee_weight(v):
    """Binomial estimating-equation factor h'(v) / [h(v)(1 - h(v))].

    Simplifies to e^v / (1 - exp(-e^v)), which tends to 1 as v -> -inf;
    evaluated via expm1 to stay accurate in that tail.
    """
    v = np.asarray(v, dtype=float)
    ev = np.exp(v)
    out = -ev / np.expm1(-ev)
    return out if out.ndim else float(out)


def ee_weight_deriv(v):
    """Derivative of :func:`ee_weight` with respect to v."""
    v = np.asarray(v, dtype=float)
    ev = np.exp(v)
    em = -np.expm1(-ev)  # 1 - exp(-e^v)
    out = ev * (em - ev * np.exp(-ev)) / em**2
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class LinkFunction:
    """Named link; only the cloglog link is implemented.

    The tag exists as an extension point for log/logit variants, which the
    estimation code does not support.
    """

    tag: str = "cloglog"

    def __post_init__(self):
        if self.tag != "cloglog":
            raise DomainError(f"unsupported link {self.tag!r}; only 'cloglog' is implemented")

    def apply(self, u):
        return cloglog(u)

    def inverse(self, v):
        return inv_cloglog(v)

    def inverse_deriv(self, v):
        return inv_cloglog_deriv(v)
