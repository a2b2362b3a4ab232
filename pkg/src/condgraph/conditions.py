"""The twelve upper/lower conditions, their defining ratios and constant estimation.

Each condition compares two nonnegative quantities A(x) and B(x) (or A(x, y),
B(x, y) for the two-point SC family). The lower condition with constant ``c``
holds at a point iff ``A >= c B`` and the upper one iff ``A <= c B``, so the
optimal lower constant is ``inf A/B`` and the optimal upper constant ``sup A/B``.

=====  ==========================================  ============
family A                                           B
=====  ==========================================  ============
SC     f(y) - f(x) - <g(x), y - x>                 |y - x|^2 / 2
*SC    f* - f(x) - <g(x), x_p - x>                 d^2 / 2
RSI    <g(x), x - x_p>                             d^2
EB     |g(x)|                                      d
PL     |g(x)|^2 / 2                                f(x) - f*
QG     f(x) - f*                                   d^2 / 2
=====  ==========================================  ============

Here ``x_p`` is the projection of ``x`` onto the minimizer set and ``d`` the
distance to it.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from ._refine import refine_1d, refine_coordinates
from .objective import Objective


class ExcludedPointError(ValueError):
    pass


class EstimationError(ValueError):
    pass


class InvalidConstantError(ValueError):
    pass


class ConditionKind(enum.Enum):
    SC_UP = "SC+"
    SC_LO = "SC-"
    STAR_SC_UP = "*SC+"
    STAR_SC_LO = "*SC-"
    RSI_UP = "RSI+"
    RSI_LO = "RSI-"
    EB_UP = "EB+"
    EB_LO = "EB-"
    PL_UP = "PL+"
    PL_LO = "PL-"
    QG_UP = "QG+"
    QG_LO = "QG-"

    @property
    def family(self) -> str:
        return self.value[:-1]

    @property
    def side(self) -> str:
        return "upper" if self.value.endswith("+") else "lower"

    @property
    def is_upper(self) -> bool:
        return self.side == "upper"

    @property
    def is_lower(self) -> bool:
        return self.side == "lower"

    @property
    def allows_nonpositive(self) -> bool:
        return self in (ConditionKind.SC_LO, ConditionKind.STAR_SC_LO)

    @property
    def partner(self) -> ConditionKind:
        flip = "-" if self.is_upper else "+"
        return ConditionKind(self.family + flip)

    @classmethod
    def parse(cls, name: str) -> ConditionKind:
        try:
            return cls(name.strip())
        except ValueError:
            raise ValueError(f"unknown condition {name!r}") from None

    def __str__(self):
        return self.value


FAMILIES = ("SC", "*SC", "RSI", "EB", "PL", "QG")
UPPER_KINDS = tuple(ConditionKind(f + "+") for f in FAMILIES)
LOWER_KINDS = tuple(ConditionKind(f + "-") for f in FAMILIES)


@dataclass(frozen=True)
class ConditionConstant:
    """A membership claim ``f in kind(value)``.

    Upper constants stay valid when increased and lower ones when decreased.
    Only SC- and *SC- may be non-positive (weak convexity).
    """

    kind: ConditionKind
    value: float

    def __post_init__(self):
        if isinstance(self.kind, str):
            object.__setattr__(self, "kind", ConditionKind.parse(self.kind))
        v = float(self.value)
        object.__setattr__(self, "value", v)
        if not np.isfinite(v):
            raise InvalidConstantError(f"{self.kind}: constant must be finite, got {v}")
        if v <= 0 and not self.kind.allows_nonpositive:
            raise InvalidConstantError(f"{self.kind}: constant must be positive, got {v}")

    def implies(self, other: ConditionConstant) -> bool:
        """Whether this claim is at least as strong as ``other`` (same kind)."""
        if other.kind is not self.kind:
            return False
        return self.value <= other.value if self.kind.is_upper else self.value >= other.value

    def better(self, other: ConditionConstant | None) -> ConditionConstant:
        if other is None or self.implies(other):
            return self
        return other

    def __str__(self):
        return f"{self.kind}({self.value:.10g})"


# ------------------------------------------------------------------ ratios


def _terms(kind: ConditionKind, obj: Objective, x: np.ndarray, y: np.ndarray | None = None):
    fam = kind.family
    if fam == "SC":
        if y is None:
            raise ValueError("SC ratios need a second point")
        diff = y - x
        a = obj.value(y) - obj.value(x) - np.sum(obj.gradient(x) * diff, axis=-1)
        return a, 0.5 * np.sum(diff * diff, axis=-1)
    g = obj.gradient(x)
    if fam == "PL":
        return 0.5 * np.sum(g * g, axis=-1), obj.value(x) - obj.f_star
    p = obj.minimizers.project(x)
    diff = x - p
    d2 = np.sum(diff * diff, axis=-1)
    if fam == "*SC":
        return obj.f_star - obj.value(x) + np.sum(g * diff, axis=-1), 0.5 * d2
    if fam == "RSI":
        return np.sum(g * diff, axis=-1), d2
    if fam == "EB":
        return np.linalg.norm(g, axis=-1), np.sqrt(d2)
    if fam == "QG":
        return obj.value(x) - obj.f_star, 0.5 * d2
    raise ValueError(f"unknown family {fam}")


def _ratio(kind, obj, x, y=None) -> np.ndarray:
    a, b = _terms(kind, obj, x, y)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = a / b
    return np.where(b > 0, r, np.inf)


def defining_ratio(kind: ConditionKind | str, obj: Objective, x, y=None) -> float:
    """The value rho(x) (or rho(x, y) for SC) compared against the constant."""
    kind = ConditionKind.parse(kind) if isinstance(kind, str) else kind
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if kind.family == "SC":
        if y is None:
            raise ValueError("SC ratios need a second point y")
        y = np.atleast_1d(np.asarray(y, dtype=float))
        if np.array_equal(x, y):
            raise ExcludedPointError("SC ratio needs y != x")
    elif obj.minimizers.distance(x) <= 0:
        raise ExcludedPointError(f"{x.tolist()} lies in the minimizer set")
    return float(_ratio(kind, obj, x, y))


# ------------------------------------------------------------------ grids


@dataclass(frozen=True, eq=False)
class EstimationGrid:
    """Box of probe points; points closer than ``exclusion_radius`` to X* are skipped."""

    low: np.ndarray
    high: np.ndarray
    points_per_axis: int = 20_001
    exclusion_radius: float = 1e-4
    pair_samples: int = 10_000
    pair_subgrid: int = 201
    seed: int = 0
    max_points: int = 250_000

    def __post_init__(self):
        object.__setattr__(self, "low", np.atleast_1d(np.asarray(self.low, dtype=float)))
        object.__setattr__(self, "high", np.atleast_1d(np.asarray(self.high, dtype=float)))
        if self.low.shape != self.high.shape or np.any(self.high <= self.low):
            raise EstimationError("grid box needs low < high in every coordinate")
        if not self.exclusion_radius > 0:
            raise EstimationError("exclusion_radius must be positive")
        if self.points_per_axis < 2:
            raise EstimationError("need at least two points per axis")

    @classmethod
    def default(cls, obj: Objective) -> EstimationGrid:
        if obj.dimension == 1:
            return cls([-5.0], [5.0])
        return cls(np.full(obj.dimension, -3.0), np.full(obj.dimension, 3.0), points_per_axis=41)

    @classmethod
    def around(cls, center, halfwidth: float, points_per_axis: int = 41, **kw) -> EstimationGrid:
        c = np.atleast_1d(np.asarray(center, dtype=float))
        return cls(c - halfwidth, c + halfwidth, points_per_axis=points_per_axis, **kw)

    @property
    def dimension(self) -> int:
        return self.low.size

    @property
    def spacing(self) -> np.ndarray:
        return (self.high - self.low) / (self.points_per_axis - 1)

    def describe(self) -> str:
        box = "x".join(f"[{lo:g},{hi:g}]" for lo, hi in zip(self.low, self.high))
        return f"box={box};n={self.points_per_axis};excl={self.exclusion_radius:g}"

    def _axis(self, i: int, n: int | None = None) -> np.ndarray:
        return np.linspace(self.low[i], self.high[i], n or self.points_per_axis)

    def raw_points(self, obj: Objective) -> np.ndarray:
        if self.dimension != obj.dimension:
            raise EstimationError("grid and objective dimensions differ")
        if self.dimension == 1:
            t = self._axis(0)
            extra = [b for b in obj.breakpoints if self.low[0] <= b <= self.high[0]]
            return np.union1d(t, extra)[:, None]
        total = self.points_per_axis**self.dimension
        if total > self.max_points:
            rng = np.random.default_rng(self.seed)
            return rng.uniform(self.low, self.high, size=(self.max_points, self.dimension))
        axes = [self._axis(i) for i in range(self.dimension)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def points(self, obj: Objective) -> np.ndarray:
        pts = self.raw_points(obj)
        pts = pts[obj.minimizers.distance(pts) >= self.exclusion_radius]
        if pts.size == 0:
            raise EstimationError("grid has no points outside the minimizer set")
        return pts

    def pairs(self, obj: Objective) -> tuple[np.ndarray, np.ndarray]:
        """Ordered point pairs (x, y), x != y, for the two-point SC ratio."""
        if self.dimension == 1:
            t = self._axis(0, self.pair_subgrid)
            bps = [b for b in obj.breakpoints if self.low[0] <= b <= self.high[0]]
            cells = np.concatenate(([self.low[0]], bps, [self.high[0]]))
            mids = 0.5 * (cells[1:] + cells[:-1])
            s = np.union1d(np.union1d(t, bps), mids)
            xx, yy = np.meshgrid(s, s, indexing="ij")
            keep = xx != yy
            return xx[keep][:, None], yy[keep][:, None]
        rng = np.random.default_rng(self.seed)
        n = self.pair_samples
        x = rng.uniform(self.low, self.high, size=(n, self.dimension))
        y = rng.uniform(self.low, self.high, size=(n, self.dimension))
        # axis-aligned pairs expose the extreme curvature of separable objectives
        base = rng.uniform(self.low, self.high, size=(n // 10, self.dimension))
        steps = rng.uniform(0.05, 1.0, size=n // 10) * np.min(self.high - self.low) / 2
        axes = rng.integers(0, self.dimension, size=n // 10)
        ya = base.copy()
        ya[np.arange(base.shape[0]), axes] += steps
        x = np.concatenate((x, base))
        y = np.concatenate((y, ya))
        keep = np.any(x != y, axis=-1)
        return x[keep], y[keep]


# ------------------------------------------------------------------ estimation


@dataclass(frozen=True)
class ConstantEstimate:
    """Grid estimate of an optimal constant and where it is attained.

    ``value`` may be 0 or inf when the objective is in no condition of that
    kind on the grid; ``constant()`` then raises.
    """

    kind: ConditionKind
    value: float
    point: tuple[float, ...] | None = None
    partner: tuple[float, ...] | None = None
    grid: str = ""
    notes: tuple[str, ...] = field(default_factory=tuple)

    @property
    def satisfied(self) -> bool:
        v = self.value
        if not np.isfinite(v):
            return False
        return v > 0 or (self.kind.allows_nonpositive and self.kind.is_lower)

    def constant(self) -> ConditionConstant:
        return ConditionConstant(self.kind, self.value)


def _refine_point(kind, obj, grid, x_best, sign):
    """Locally improve sign * ratio starting from grid optimum ``x_best``."""
    h = grid.spacing
    excl = grid.exclusion_radius

    def objective_fn(z):
        z = np.atleast_1d(np.asarray(z, dtype=float))
        if obj.minimizers.distance(z) < excl:
            return np.inf
        r = float(_ratio(kind, obj, z))
        return sign * r if np.isfinite(r) else np.inf

    if obj.dimension == 1:
        lo = max(x_best[0] - 2 * h[0], grid.low[0])
        hi = min(x_best[0] + 2 * h[0], grid.high[0])
        t, v = refine_1d(lambda s: objective_fn([s]), lo, hi)
        return np.array([t]), v
    return refine_coordinates(objective_fn, x_best, float(2 * h.max()))


def estimate_constant(
    kind: ConditionKind | str, obj: Objective, grid: EstimationGrid | None = None, refine: bool = True
) -> ConstantEstimate:
    """Optimal constant over the grid: inf of the ratio (lower) or sup (upper)."""
    kind = ConditionKind.parse(kind) if isinstance(kind, str) else kind
    grid = grid or EstimationGrid.default(obj)
    sign = 1.0 if kind.is_lower else -1.0
    notes = []
    if kind.family == "SC":
        x, y = grid.pairs(obj)
        r = _ratio(kind, obj, x, y)
        i = int(np.argmin(sign * r))
        return ConstantEstimate(kind, float(r[i]), tuple(x[i]), tuple(y[i]), grid.describe())
    pts = grid.points(obj)
    r = _ratio(kind, obj, pts)
    if kind.family == "PL":
        infinite = ~np.isfinite(r)
        if np.any(infinite):
            notes.append(f"{int(infinite.sum())} points with f = f* off the minimizer set")
            if kind.is_upper and obj.has_plateau:
                r = np.where(infinite, -np.inf, r)
    i = int(np.argmin(sign * r))
    best_x, best = pts[i], float(r[i])
    if refine and np.isfinite(best):
        x_ref, v_ref = _refine_point(kind, obj, grid, best_x, sign)
        # keep whichever of grid point and refined point is more extreme
        if np.isfinite(v_ref) and v_ref < sign * best:
            best_x, best = x_ref, sign * v_ref
    return ConstantEstimate(kind, best, tuple(np.atleast_1d(best_x)), None, grid.describe(), tuple(notes))


def estimate_all(obj: Objective, grid: EstimationGrid | None = None) -> dict[ConditionKind, ConstantEstimate]:
    grid = grid or EstimationGrid.default(obj)
    return {k: estimate_constant(k, obj, grid) for k in ConditionKind}


# ------------------------------------------------------------------ membership


@dataclass(frozen=True)
class Verdict:
    holds: bool
    margin: float
    worst_point: tuple[float, ...] | None = None
    partner: tuple[float, ...] | None = None

    def __bool__(self):
        return self.holds


def slack(constant: ConditionConstant, obj: Objective, x, y=None) -> np.ndarray:
    """A - cB (lower) or cB - A (upper); nonnegative where the inequality holds."""
    a, b = _terms(constant.kind, obj, np.asarray(x, dtype=float), None if y is None else np.asarray(y))
    s = a - constant.value * b
    return s if constant.kind.is_lower else -s


def verify_membership(
    obj: Objective, constant: ConditionConstant, grid: EstimationGrid | None = None, tol: float = 1e-9
) -> Verdict:
    """Check the defining inequality at every grid point (or pair) up to ``tol``."""
    grid = grid or EstimationGrid.default(obj)
    if constant.kind.family == "SC":
        x, y = grid.pairs(obj)
    else:
        x, y = grid.points(obj), None
    s = slack(constant, obj, x, y)
    s = np.where(np.isnan(s), -np.inf, s)
    i = int(np.argmin(s))
    worst = float(s[i])
    return Verdict(
        holds=worst >= -tol,
        margin=worst,
        worst_point=tuple(x[i]),
        partner=None if y is None else tuple(y[i]),
    )
