"""Slow, direct reference implementations used as oracles in tests.

Everything here is written from the estimator definitions with plain
loops, independently of the vectorized package code.
"""

import numpy as np


def fg_score_direct(data, curve, beta, scheme):
    """Pseudo-score evaluated subject by subject from its definition."""
    n = len(data)
    time, status, x, tau = data.time, data.status, data.x, data.tau

    def weight(i, t):
        if t > tau:
            return 0.0
        if status[i] == 0 and time[i] < tau and t >= time[i]:
            return 0.0  # randomly censored before the evaluation point
        m = min(time[i], t) if status[i] != 0 else t
        raw = 1.0 / curve.evaluate(m)
        return raw * curve.evaluate(t) if scheme == "stabilized" else raw

    def at_risk(i, t):
        if status[i] == 2:
            return 1.0
        return 1.0 if t <= time[i] else 0.0

    total = 0.0
    for i in np.where(status == 1)[0]:
        t = time[i]
        s0 = sum(weight(j, t) * at_risk(j, t) * np.exp(beta * x[j])
                 for j in range(n))
        s1 = sum(weight(j, t) * at_risk(j, t) * x[j] * np.exp(beta * x[j])
                 for j in range(n))
        total += weight(i, t) * (x[i] - s1 / s0)
    return total


def fg_ee_residuals(data, curve, beta, dgamma_times, dgamma, scheme):
    """LHS of the baseline estimating equation at each jump time."""
    n = len(data)
    time, status, x, tau = data.time, data.status, data.x, data.tau

    def weight(i, t):
        if t > tau:
            return 0.0
        if status[i] == 0 and time[i] < tau and t >= time[i]:
            return 0.0
        m = min(time[i], t) if status[i] != 0 else t
        raw = 1.0 / curve.evaluate(m)
        return raw * curve.evaluate(t) if scheme == "stabilized" else raw

    def at_risk(i, t):
        if status[i] == 2:
            return 1.0
        return 1.0 if t <= time[i] else 0.0

    out = []
    for t, dg in zip(dgamma_times, dgamma):
        dn = sum(weight(i, t) for i in range(n)
                 if status[i] == 1 and time[i] == t)
        comp = sum(weight(j, t) * at_risk(j, t) * np.exp(beta * x[j]) * dg
                   for j in range(n))
        out.append(dn - comp)
    return np.array(out)


def logrank_by_hand(time, event, group):
    """Two-sample log-rank from the O-E table, one event time at a time."""
    times = sorted(set(time[event]))
    o_minus_e = 0.0
    var = 0.0
    for t in times:
        at_risk = time >= t
        n_tot = at_risk.sum()
        n1 = (at_risk & (group == 1)).sum()
        d = (event & (time == t)).sum()
        d1 = (event & (time == t) & (group == 1)).sum()
        o_minus_e += d1 - d * n1 / n_tot
        if n_tot > 1:
            var += d * (n1 / n_tot) * (1 - n1 / n_tot) * (n_tot - d) / (n_tot - 1)
    return o_minus_e**2 / var


def gee_sandwich_direct(nmat, x, grid, alpha, beta):
    """Classical working-independence GEE sandwich for the cloglog model."""
    n, R = nmat.shape
    p = R + 1

    def h(u):
        return 1.0 - np.exp(-np.exp(u))

    def hp(u):
        return np.exp(u - np.exp(u))

    jac = np.zeros((p, p))
    meat = np.zeros((p, p))
    for i in range(n):
        u = alpha + beta * x[i]
        mu = h(u)
        a_inv = 1.0 / (mu * (1 - mu))
        d = np.zeros((p, R))
        d[:R, :] = np.diag(hp(u))
        d[R, :] = hp(u) * x[i]
        ui = d @ (a_inv * (nmat[i] - mu))
        meat += np.outer(ui, ui)
        jac += d @ (a_inv[:, None] * d.T)
    bread = np.linalg.inv(jac)
    return bread @ meat @ bread.T


def cox_score_statistic(time, event, group):
    """Cox partial-likelihood score test statistic at zero effect."""
    u = 0.0
    info = 0.0
    for t in sorted(set(time[event])):
        at_risk = time >= t
        n_tot = at_risk.sum()
        n1 = (at_risk & (group == 1)).sum()
        d_here = (event & (time == t))
        frac = n1 / n_tot
        u += (group[d_here] - frac).sum()
        info += d_here.sum() * frac * (1 - frac)
    return u**2 / info
