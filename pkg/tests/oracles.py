"""Independent reference computations used by the tests.

Nothing here calls condgraph's estimators; values come from hand-integrated
closed forms evaluated on dense numpy grids.
"""

import numpy as np


def lrp_value(x):
    x = np.asarray(x, dtype=float)
    return np.where(x < 1, 12.5 * x**2, np.where(x <= 2, 0.5 * x**2 + 24 * x - 12, 12.5 * x**2 - 24 * x + 36))


def lrp_grad(x):
    x = np.asarray(x, dtype=float)
    return np.where(x < 1, 25 * x, np.where(x <= 2, x + 24, 25 * x - 24))


def f_eps_value(x, eps):
    x = np.asarray(x, dtype=float)
    e = eps
    mid = (1 + 1 / e) * x**2 - 2 * x / e + 1 / e
    right = x**2 + 2 * e * x - 2 * e - e**3
    return np.where(x <= 1, x**2, np.where(x <= 1 + e * e, mid, right))


def f_eps_grad(x, eps):
    x = np.asarray(x, dtype=float)
    e = eps
    return np.where(x <= 1, 2 * x, np.where(x <= 1 + e * e, 2 * (1 + 1 / e) * x - 2 / e, 2 * x + 2 * e))


def ratios_1d(value, grad, x, f_star=0.0, x_star=0.0):
    """Pointwise defining ratios of the non-pair families for a 1-D function with X* = {x_star}."""
    f = value(x) - f_star
    g = grad(x)
    d = x - x_star
    return {
        "*SC": 2 * (f - g * d) / d**2 * -1,
        "RSI": g * d / d**2,
        "EB": np.abs(g) / np.abs(d),
        "PL": g**2 / (2 * f),
        "QG": 2 * f / d**2,
    }


def sc_range_1d(grad, x):
    """inf and sup of derivative difference quotients on neighbouring points."""
    g = grad(x)
    q = np.diff(g) / np.diff(x)
    return float(q.min()), float(q.max())


def brute_constants_1d(value, grad, lo=-5.0, hi=5.0, n=2_000_001, excl=1e-4):
    x = np.linspace(lo, hi, n)
    x = x[np.abs(x) >= excl]
    out = {}
    for fam, r in ratios_1d(value, grad, x).items():
        out[fam + "-"] = float(r.min())
        out[fam + "+"] = float(r.max())
    out["SC-"], out["SC+"] = sc_range_1d(grad, np.linspace(lo, hi, n))
    return out


def brute_star_norm_1d(grad, lo=-5.0, hi=5.0, n=2_000_001, excl=1e-4, x_star=0.0):
    x = np.linspace(lo, hi, n)
    x = x[np.abs(x - x_star) >= excl]
    return float(np.max(np.abs(grad(x)) / np.abs(x - x_star)))


def omega_grad(t, eps):
    """Derivative of the omega bump used to break condition continuity."""
    t = np.asarray(t, dtype=float)
    e = eps
    out = np.zeros_like(t)
    a, b, c = 1 - e * e, 1.0, 1 + e * e
    m1 = (t >= a) & (t <= b)
    m2 = (t > b) & (t <= c)
    out[m1] = (a - t[m1]) / e
    out[m2] = (t[m2] - c) / e
    return out


def gd_scalar(grad, x0, alpha, n):
    xs = [float(x0)]
    for _ in range(n):
        xs.append(xs[-1] - alpha * float(grad(xs[-1])))
    return np.array(xs)


def optimal_quadratic_rate(kappa):
    return ((kappa - 1) / (kappa + 1)) ** 2
