"""Gradient descent, heavy ball and adaptive-step GD with rate classification."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .objective import Objective

ATOL = 1e-10
BURN_IN = 10
CLASSES = ("converged_linear", "converged_sublinear", "stalled", "diverged")

# iterates beyond this norm are treated as divergent before overflow sets in
_BLOWUP = 1e100


@dataclass(eq=False)
class Trajectory:
    iterates: np.ndarray
    values: np.ndarray
    grad_norms: np.ndarray
    subopt: np.ndarray
    dist: np.ndarray
    algo: str
    params: dict = field(default_factory=dict)
    diverged: bool = False

    def __len__(self):
        return self.iterates.shape[0]

    @property
    def dist_sq(self) -> np.ndarray:
        return self.dist**2

    def series(self, name: str) -> np.ndarray:
        if name == "subopt":
            return self.subopt
        if name == "dist_sq":
            return self.dist_sq
        if name == "dist":
            return self.dist
        if name == "values":
            return self.values
        raise ValueError(f"unknown series {name!r}")

    def to_csv(self) -> str:
        d = self.iterates.shape[1]
        head = ["iter"] + [f"x{i}" for i in range(d)] + ["f", "grad_norm", "subopt", "dist"]
        rows = [",".join(head)]
        for k in range(len(self)):
            vals = list(self.iterates[k]) + [self.values[k], self.grad_norms[k], self.subopt[k], self.dist[k]]
            rows.append(",".join([str(k)] + [repr(float(v)) for v in vals]))
        return "\n".join(rows) + "\n"


def _finish(obj: Objective, xs: list, algo: str, params: dict, diverged: bool) -> Trajectory:
    it = np.array(xs, dtype=float)
    with np.errstate(all="ignore"):
        values = obj.value(it)
        grads = obj.gradient(it)
    return Trajectory(
        iterates=it,
        values=values,
        grad_norms=np.linalg.norm(grads, axis=-1),
        subopt=values - obj.f_star,
        dist=obj.minimizers.distance(it),
        algo=algo,
        params=params,
        diverged=diverged,
    )


def _bad(*arrays) -> bool:
    return any(not np.all(np.isfinite(a)) or np.max(np.abs(a)) > _BLOWUP for a in arrays)


def gd_step(x: np.ndarray, g: np.ndarray, alpha: float) -> np.ndarray:
    return x - alpha * g


def hb_step(x: np.ndarray, x_prev: np.ndarray, g: np.ndarray, alpha: float, beta: float) -> np.ndarray:
    return x - alpha * g + beta * (x - x_prev)


def adaptive_step(x: np.ndarray, fx: float, g: np.ndarray, alpha: float, gprime: Callable) -> np.ndarray:
    return x - alpha * gprime(fx) * g


def _x0(obj: Objective, x0) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x0, dtype=float))
    if x.shape != (obj.dimension,):
        raise ValueError(f"x0 must have shape ({obj.dimension},)")
    return x


def gd(obj: Objective, x0, alpha: float, n: int) -> Trajectory:
    """x_{k+1} = x_k - alpha grad f(x_k) for n steps."""
    if not alpha > 0 or n < 1:
        raise ValueError("need alpha > 0 and n >= 1")
    x = _x0(obj, x0)
    xs = [x]
    diverged = False
    with np.errstate(all="ignore"):
        for _ in range(n):
            g = obj.gradient(x)
            if _bad(g):
                diverged = True
                break
            x = gd_step(x, g, alpha)
            if _bad(x):
                diverged = True
                break
            xs.append(x)
    return _finish(obj, xs, "gd", {"alpha": alpha, "n": n}, diverged)


def heavy_ball(obj: Objective, x0, alpha: float, beta: float, n: int) -> Trajectory:
    """Heavy ball with zero initial momentum (x_{-1} = x_0)."""
    if not alpha > 0 or not 0 <= beta < 1 or n < 1:
        raise ValueError("need alpha > 0, beta in [0, 1) and n >= 1")
    x = _x0(obj, x0)
    x_prev = x
    xs = [x]
    diverged = False
    with np.errstate(all="ignore"):
        for _ in range(n):
            g = obj.gradient(x)
            if _bad(g):
                diverged = True
                break
            x, x_prev = hb_step(x, x_prev, g, alpha, beta), x
            if _bad(x):
                diverged = True
                break
            xs.append(x)
    return _finish(obj, xs, "heavy_ball", {"alpha": alpha, "beta": beta, "n": n}, diverged)


def adaptive_gd(obj: Objective, x0, alpha: float, gprime: Callable[[float], float], n: int) -> Trajectory:
    """GD on g o f written as GD on f with step alpha g'(f(x_k))."""
    if not alpha > 0 or n < 1:
        raise ValueError("need alpha > 0 and n >= 1")
    x = _x0(obj, x0)
    xs = [x]
    diverged = False
    with np.errstate(all="ignore"):
        for _ in range(n):
            fx = obj.value(x)
            g = obj.gradient(x)
            scale = gprime(fx)
            if _bad(g, scale):
                diverged = True
                break
            x = adaptive_step(x, fx, g, alpha, gprime)
            if _bad(x):
                diverged = True
                break
            xs.append(x)
    return _finish(obj, xs, "adaptive_gd", {"alpha": alpha, "n": n}, diverged)


def heavy_ball_batch(obj: Objective, x0, alphas, betas, n: int) -> np.ndarray:
    """Run many heavy-ball instances at once; returns subopt of shape (cells, n + 1).

    Rows that blow up are filled with inf from that point on.
    """
    alphas = np.asarray(alphas, dtype=float)[:, None]
    betas = np.asarray(betas, dtype=float)[:, None]
    m = alphas.shape[0]
    x = np.tile(_x0(obj, x0), (m, 1))
    x_prev = x.copy()
    out = np.empty((m, n + 1))
    alive = np.ones(m, dtype=bool)
    with np.errstate(all="ignore"):
        out[:, 0] = obj.value(x) - obj.f_star
        for k in range(1, n + 1):
            g = obj.gradient(x)
            x, x_prev = hb_step(x, x_prev, g, alphas, betas), x
            alive &= np.all(np.isfinite(x), axis=1) & (np.max(np.abs(x), axis=1) < _BLOWUP)
            x[~alive] = 0.0
            x_prev[~alive] = 0.0
            s = obj.value(x) - obj.f_star
            out[:, k] = np.where(alive, s, np.inf)
    return out


# ------------------------------------------------------------------ rates


@dataclass(frozen=True)
class RateEstimate:
    linear_rate: float
    fit_rate: float
    cls: str
    tail_start: int
    reason: str = ""

    def to_json(self) -> str:
        d = asdict(self)
        d["class"] = d.pop("cls")
        return json.dumps(d)


def _plateau(s: np.ndarray, atol: float, max_period: int = 16) -> bool:
    if s.size < 2 or not s[-1] > atol:
        return False
    # periodic with some period w <= max_period, checked on the last two entries
    for w in range(1, max_period + 1):
        if s.size < w + 2:
            break
        if abs(s[-1] - s[-1 - w]) < 1e-14 and abs(s[-2] - s[-2 - w]) < 1e-14:
            return True
    return False


def _fit(s: np.ndarray, idx: np.ndarray) -> float:
    if idx.size < 2:
        return float("nan")
    slope = np.polyfit(idx.astype(float), np.log(s[idx]), 1)[0]
    return float(np.exp(slope))


def estimate_rate(
    traj: Trajectory | np.ndarray,
    tail_fraction: float = 0.5,
    series: str = "subopt",
    atol: float = ATOL,
    class_margin: float = 1e-6,
    burn_in: int = BURN_IN,
) -> RateEstimate:
    """Linear rate (sup of tail ratios), geometric fit rate and a convergence class."""
    if isinstance(traj, Trajectory):
        s = np.asarray(traj.series(series), dtype=float)
        diverged = traj.diverged
    else:
        s = np.asarray(traj, dtype=float)
        diverged = False
    if s.size < 10:
        raise ValueError("need at least 10 recorded iterations")
    if diverged or not np.all(np.isfinite(s)):
        finite = np.isfinite(s)
        stop = int(np.argmin(finite)) if not finite.all() else s.size
        return RateEstimate(float("inf"), float("inf"), "diverged", max(stop - 1, 0), "non-finite")
    # indices before the series first drops below atol
    below = np.nonzero(s <= atol)[0]
    active = s.size if below.size == 0 else int(below[0])
    start = max(min(burn_in, active), active - int(np.floor(tail_fraction * active)))
    idx = np.arange(start, active)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = s[idx[1:]] / s[idx[:-1]] if idx.size > 1 else np.array([])
    linear = float(np.max(ratios)) if ratios.size else 0.0
    if below.size and s[-1] <= atol:
        fit = _fit(s, idx) if idx.size > 1 else 0.0
        return RateEstimate(linear, fit, "converged_linear", start, "below atol")
    if _plateau(s, atol):
        return RateEstimate(linear, 1.0, "stalled", start, "plateau")
    fit = _fit(s, idx)
    if s[-1] > 10 * s[start]:
        return RateEstimate(linear, fit, "diverged", start, "growth")
    # envelope test: oscillating or chaotic tails can end lower than they start
    w = max(1, idx.size // 10)
    decreasing = bool(np.max(s[idx[-w:]]) < np.min(s[idx[:w]]))
    if fit < 1 - class_margin and decreasing:
        half = idx.size // 2
        early, late = _fit(s, idx[:half]), _fit(s, idx[half:])
        # a fixed geometric rate keeps its log-slope; O(1/n) flattens out
        if np.log(late) > 0.8 * np.log(early):
            return RateEstimate(linear, fit, "converged_sublinear", start, "flattening")
        return RateEstimate(linear, fit, "converged_linear", start, "fit")
    if decreasing:
        return RateEstimate(linear, fit, "converged_sublinear", start, "slow")
    return RateEstimate(linear, fit, "stalled", start, "no progress")


def first_hit(traj: Trajectory, radius: float) -> int | None:
    if not radius > 0:
        raise ValueError("radius must be positive")
    hits = np.nonzero(traj.dist < radius)[0]
    return int(hits[0]) if hits.size else None


def sublinear_bound(L: float, d0: float, n: np.ndarray, best_iterate: bool = False) -> np.ndarray:
    """O(1/n) value-gap bounds: L d0^2 / (2n) for the last iterate, 2 L d0^2 / (n + 1) for the best."""
    n = np.asarray(n, dtype=float)
    if best_iterate:
        return 2.0 * L * d0**2 / (n + 1.0)
    return L * d0**2 / (2.0 * n)


def sublinear_slack(traj: Trajectory, L: float, best_iterate: bool = False) -> float:
    """min over n >= 1 of bound[n] - gap[n]; negative means the bound is violated."""
    n = np.arange(1, len(traj))
    gap = traj.subopt[1:]
    if best_iterate:
        gap = np.minimum.accumulate(traj.subopt)[1:]
    return float(np.min(sublinear_bound(L, traj.dist[0], n, best_iterate) - gap))
