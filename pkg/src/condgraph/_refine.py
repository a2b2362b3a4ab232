"""Local refinement of grid extrema."""

from __future__ import annotations

from typing import Callable

import numpy as np
from scipy.optimize import minimize_scalar


def refine_1d(fun: Callable[[float], float], lo: float, hi: float, maxiter: int = 50) -> tuple[float, float]:
    """Bounded scalar minimisation of ``fun`` on [lo, hi]; returns (x, fun(x))."""
    if not hi > lo:
        return lo, fun(lo)
    res = minimize_scalar(
        fun, bounds=(lo, hi), method="bounded", options={"xatol": 1e-13, "maxiter": maxiter * 4}
    )
    return float(res.x), float(res.fun)


def refine_coordinates(
    fun: Callable[[np.ndarray], float],
    x0: np.ndarray,
    halfwidth: float,
    sweeps: int = 3,
    maxiter: int = 50,
) -> tuple[np.ndarray, float]:
    """Coordinate-wise bounded minimisation in a box of half-width ``halfwidth``."""
    x = np.array(x0, dtype=float)
    best = fun(x)
    for _ in range(sweeps):
        for i in range(x.size):
            def line(t, i=i):
                z = x.copy()
                z[i] = t
                return fun(z)

            t, v = refine_1d(line, x[i] - halfwidth, x[i] + halfwidth, maxiter)
            if v < best:
                best = v
                x[i] = t
    return x, best
