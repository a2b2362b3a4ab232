"""Perturbations vanishing on a minimizer set and their star norm.

A perturbation ``h`` is admissible for a minimizer set X* when ``h = 0`` on
X* and ``|grad h(x)| <= c d(x, X*)`` for some finite ``c``. The smallest such
``c`` is the star norm.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ._refine import refine_1d, refine_coordinates
from .conditions import EstimationGrid
from .objective import (
    InvalidParameterError,
    MinimizerSet,
    Objective,
    PiecewisePoly,
    objective_from_label,
)


class InvalidPerturbationError(ValueError):
    pass


class IncompatiblePerturbationError(ValueError):
    pass


class PerturbationChangesMinimizersError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class StarNorm:
    value: float
    point: tuple[float, ...]
    bounded: bool = True

    def __float__(self):
        return self.value


def _default_grid(dimension: int) -> EstimationGrid:
    if dimension == 1:
        return EstimationGrid([-5.0], [5.0])
    return EstimationGrid(np.full(dimension, -3.0), np.full(dimension, 3.0), points_per_axis=41)


@dataclass(frozen=True, eq=False)
class Perturbation:
    """h with value/gradient maps on arrays of shape (..., d), anchored at X*.

    Construction validates eagerly: h vanishes on sampled anchor points, the
    gradient agrees with finite differences and the star norm is finite.
    """

    value: Callable[[np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray], np.ndarray]
    anchor_set: MinimizerSet
    label: str
    breakpoints: tuple[float, ...] = ()
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        if self.validate:
            self.check()

    @property
    def dimension(self) -> int:
        return self.anchor_set.dimension

    def __call__(self, x) -> np.ndarray:
        return self.value(np.asarray(x, dtype=float))

    def grad(self, x) -> np.ndarray:
        return self.gradient(np.asarray(x, dtype=float))

    def check(self, grid: EstimationGrid | None = None, n_probe: int = 100) -> None:
        rng = np.random.default_rng(0)
        anchors = np.concatenate(
            (self.anchor_set.low[None], self.anchor_set.sample(rng, 16))
        )
        if np.max(np.abs(self.value(anchors))) > 1e-12:
            raise InvalidPerturbationError(f"{self.label}: h does not vanish on the anchor set")
        grid = grid or _default_grid(self.dimension)
        probe = rng.uniform(grid.low, grid.high, size=(n_probe, self.dimension))
        probe = probe[_away(self.breakpoints, probe)]
        g = self.gradient(probe)
        fd = _fd(self.value, probe)
        err = np.max(np.abs(fd - g) / (1.0 + np.abs(g)), initial=0.0)
        if err > 1e-6:
            raise InvalidPerturbationError(f"{self.label}: gradient mismatch {err:.2e}")
        norm = star_norm(self, grid)
        if not (norm.bounded and np.isfinite(norm.value)):
            raise InvalidPerturbationError(f"{self.label}: gradient grows faster than d(x, X*)")

    def scale(self, c: float) -> Perturbation:
        c = float(c)
        return Perturbation(
            lambda x: c * self.value(x),
            lambda x: c * self.gradient(x),
            self.anchor_set,
            f"{c:g}*{self.label}",
            self.breakpoints,
            validate=False,
        )

    def __add__(self, other: Perturbation) -> Perturbation:
        if not self.anchor_set.same_as(other.anchor_set):
            raise IncompatiblePerturbationError("perturbations have different anchor sets")
        return Perturbation(
            lambda x: self.value(x) + other.value(x),
            lambda x: self.gradient(x) + other.gradient(x),
            self.anchor_set,
            f"{self.label}&{other.label}",
            tuple(sorted(set(self.breakpoints) | set(other.breakpoints))),
            validate=False,
        )


def _away(breakpoints, x, margin=1e-3):
    if not breakpoints:
        return np.ones(x.shape[0], dtype=bool)
    return np.min(np.abs(x[:, :1] - np.asarray(breakpoints)[None, :]), axis=1) >= margin


def _fd(value, x, step=1e-5):
    out = np.empty_like(x)
    for i in range(x.shape[-1]):
        e = np.zeros(x.shape[-1])
        e[i] = step
        out[..., i] = (value(x + e) - value(x - e)) / (2 * step)
    return out


def _ratios(h: Perturbation, x: np.ndarray) -> np.ndarray:
    d = h.anchor_set.distance(x)
    return np.linalg.norm(h.gradient(x), axis=-1) / d


def _grows_at_boundary(h: Perturbation, grid: EstimationGrid) -> bool:
    """True if the ratio keeps rising by more than 1% per doubling beyond the box."""
    dim = h.dimension
    center = h.anchor_set.project(0.5 * (grid.low + grid.high))
    radius = float(np.max(grid.high - grid.low)) / 2
    dirs = np.concatenate((np.eye(dim), -np.eye(dim)))
    if dim > 1:
        rng = np.random.default_rng(grid.seed)
        extra = rng.standard_normal((16, dim))
        dirs = np.concatenate((dirs, extra / np.linalg.norm(extra, axis=1, keepdims=True)))
    scales = radius * np.array([1.0, 2.0, 4.0])
    pts = center + scales[:, None, None] * dirs[None, :, :]
    r = _ratios(h, pts)
    with np.errstate(invalid="ignore"):
        rising = (r[1] > 1.01 * r[0]) & (r[2] > 1.01 * r[1])
    return bool(np.any(rising))


def star_norm(h: Perturbation, grid: EstimationGrid | None = None, refine: bool = True) -> StarNorm:
    """sup |grad h(x)| / d(x, X*) over the grid, refined near the maximiser."""
    grid = grid or _default_grid(h.dimension)
    pts = grid.raw_points(_AnchorView(h))
    pts = pts[h.anchor_set.distance(pts) >= grid.exclusion_radius]
    r = _ratios(h, pts)
    i = int(np.argmax(r))
    best_x, best = pts[i], float(r[i])
    if refine and best > 0:
        def neg(z):
            z = np.atleast_1d(np.asarray(z, dtype=float))
            if h.anchor_set.distance(z) < grid.exclusion_radius:
                return np.inf
            return -float(_ratios(h, z))

        step = grid.spacing
        if h.dimension == 1:
            lo = max(best_x[0] - 2 * step[0], grid.low[0])
            hi = min(best_x[0] + 2 * step[0], grid.high[0])
            t, v = refine_1d(lambda s: neg([s]), lo, hi)
            x_ref = np.array([t])
        else:
            x_ref, v = refine_coordinates(neg, best_x, float(2 * step.max()))
        if np.isfinite(v) and -v > best:
            best_x, best = x_ref, -v
    return StarNorm(best, tuple(np.atleast_1d(best_x)), not _grows_at_boundary(h, grid))


@dataclass(frozen=True)
class _AnchorView:
    """Adapter so grid point generation sees the perturbation's breakpoints."""

    h: Perturbation

    @property
    def dimension(self):
        return self.h.dimension

    @property
    def breakpoints(self):
        return self.h.breakpoints


# ------------------------------------------------------------------ families


def omega_profile(eps: float) -> PiecewisePoly:
    """The 1-D profile: zero up to 1 - eps^2, a dip of depth eps^3, flat after 1 + eps^2."""
    e = float(eps)
    a = 1.0 - e * e
    return PiecewisePoly.from_derivative(
        (a, 1.0, 1.0 + e * e),
        ([0.0], [-1.0 / e, a / e], [1.0 / e, -(1.0 + e * e) / e], [0.0]),
        anchor=0.0,
    )


def make_omega_eps(eps: float, direction=None, x_star=None) -> Perturbation:
    """h(x) = omega(<x - x*, u>) with |omega'| <= eps."""
    if not 0 < eps < 1:
        raise InvalidParameterError(f"eps must lie in (0, 1), got {eps}")
    x_star = np.atleast_1d(np.zeros(1) if x_star is None else np.asarray(x_star, dtype=float))
    u = np.zeros_like(x_star) if direction is None else np.atleast_1d(np.asarray(direction, float))
    if direction is None:
        u[0] = 1.0
    if u.shape != x_star.shape or abs(np.linalg.norm(u) - 1.0) > 1e-12:
        raise InvalidParameterError("direction must be a unit vector matching x_star")
    pp = omega_profile(eps)
    dpp = pp.derivative()

    def value(x):
        return pp((x - x_star) @ u)

    def gradient(x):
        return dpp((x - x_star) @ u)[..., None] * u

    bps = tuple(float(x_star[0] + b * u[0]) for b in pp.breakpoints) if x_star.size == 1 else ()
    return Perturbation(
        value, gradient, MinimizerSet.point(x_star), f"omega_eps:{eps:g}", tuple(sorted(bps))
    )


def as_perturbation(obj: Objective, validate: bool = True) -> Perturbation:
    """h = f - f*, anchored at f's minimizer set."""
    return Perturbation(
        lambda x: obj.value(x) - obj.f_star,
        obj.gradient,
        obj.minimizers,
        obj.label,
        obj.breakpoints,
        validate=validate,
    )


def diff_as_perturbation(f: Objective, g: Objective) -> Perturbation:
    """h = g - f; both objectives must share minimizers and optimal value."""
    if f.dimension != g.dimension or not f.minimizers.same_as(g.minimizers):
        raise IncompatiblePerturbationError(f"{g.label} and {f.label} have different minimizers")
    if abs(f.f_star - g.f_star) > 1e-12:
        raise IncompatiblePerturbationError(f"{g.label} and {f.label} have different optimal values")
    return Perturbation(
        lambda x: g.value(x) - f.value(x),
        lambda x: g.gradient(x) - f.gradient(x),
        f.minimizers,
        f"diff:{g.label}-{f.label}",
        tuple(sorted(set(f.breakpoints) | set(g.breakpoints))),
    )


def perturb(f: Objective, h: Perturbation, grid: EstimationGrid | None = None) -> Objective:
    """f + h, rejected if the sum no longer has minimizers X* and value f*."""
    if f.dimension != h.dimension or not f.minimizers.same_as(h.anchor_set):
        raise IncompatiblePerturbationError(f"{h.label} is not anchored at the minimizers of {f.label}")

    def value(x):
        return f.value(x) + h.value(x)

    def gradient(x):
        return f.gradient(x) + h.gradient(x)

    out = Objective(
        dimension=f.dimension,
        value=value,
        gradient=gradient,
        minimizers=f.minimizers,
        f_star=f.f_star,
        label=f"{f.label}+{h.label}",
        breakpoints=tuple(sorted(set(f.breakpoints) | set(h.breakpoints))),
        has_plateau=f.has_plateau,
    )
    grid = grid or EstimationGrid.default(f)
    pts = grid.raw_points(out)
    gap = out.value(pts) - out.f_star
    far = f.minimizers.distance(pts) >= 10 * grid.exclusion_radius
    if np.min(gap) < -1e-12 or np.any(gap[far] <= 1e-12):
        worst = pts[int(np.argmin(np.where(far, gap, np.inf)))]
        raise PerturbationChangesMinimizersError(
            f"{out.label}: value {float(np.min(gap)):.3g} below f* or new minimizer near {worst.tolist()}"
        )
    return out


# ------------------------------------------------------------------ labels

_SPLIT_DIFF = re.compile(r"-(?=[a-z_])")


def perturbation_from_label(label: str, anchor: MinimizerSet | None = None) -> Perturbation:
    """Parse ``omega_eps:0.1``, ``diff:A-B``, ``2*label`` or a corpus objective label."""
    label = label.strip()
    if "*" in label and not label.startswith("*"):
        c, _, rest = label.partition("*")
        try:
            return perturbation_from_label(rest, anchor).scale(float(c))
        except ValueError:
            pass
    if label.startswith("omega_eps"):
        _, _, arg = label.partition(":")
        x_star = None if anchor is None else anchor.low
        if anchor is not None and anchor.shape != "point":
            raise IncompatiblePerturbationError("omega_eps needs a single-point anchor")
        return make_omega_eps(float(arg), x_star=x_star)
    if label.startswith("diff:"):
        parts = _SPLIT_DIFF.split(label[len("diff:"):], maxsplit=1)
        if len(parts) != 2:
            raise ValueError(f"cannot parse difference label {label!r}")
        g, f = (objective_from_label(p) for p in parts)
        return diff_as_perturbation(f, g)
    return as_perturbation(objective_from_label(label))
