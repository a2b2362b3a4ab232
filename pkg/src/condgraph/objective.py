"""Test objectives with known minimizer sets.

Every objective evaluates on arrays of shape ``(..., d)``: ``value`` returns
shape ``(...)`` and ``gradient`` returns ``(..., d)``. The estimators in
:mod:`condgraph.conditions` rely on this to sweep whole grids at once.

Objectives are addressable by label, e.g. ``"f_lrp"``, ``"f_eps:0.1"``,
``"quadratic:1,10"``, ``"plateau:0.5,1"``, ``"logistic:seed=42,d=3,m=200"``.
A ``+`` appends a perturbation: ``"quadratic:2+omega_eps:0.1"``.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.special import expit


class InvalidObjectiveError(ValueError):
    pass


class InvalidParameterError(ValueError):
    pass


class DegenerateDatasetError(ValueError):
    pass


class LabelError(ValueError):
    pass


def _as_points(x, dimension: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1)
    if x.shape[-1] != dimension:
        raise ValueError(f"expected trailing dimension {dimension}, got shape {x.shape}")
    return x


@dataclass(frozen=True, eq=False)
class MinimizerSet:
    """Convex set of global minimizers: a point, an axis-aligned box or a segment."""

    shape: str
    low: np.ndarray
    high: np.ndarray | None = None

    def __post_init__(self):
        if self.shape not in ("point", "box", "segment"):
            raise ValueError(f"unknown minimizer-set shape {self.shape!r}")
        object.__setattr__(self, "low", np.atleast_1d(np.asarray(self.low, dtype=float)))
        if self.high is not None:
            object.__setattr__(self, "high", np.atleast_1d(np.asarray(self.high, dtype=float)))
        if self.shape != "point" and (self.high is None or self.high.shape != self.low.shape):
            raise ValueError("box and segment need two endpoints of equal dimension")
        if self.shape == "box" and np.any(self.high < self.low):
            raise ValueError("box low must not exceed high")

    @classmethod
    def point(cls, x) -> MinimizerSet:
        return cls("point", x)

    @classmethod
    def box(cls, low, high) -> MinimizerSet:
        return cls("box", low, high)

    @classmethod
    def segment(cls, a, b) -> MinimizerSet:
        return cls("segment", a, b)

    @property
    def dimension(self) -> int:
        return self.low.shape[0]

    def project(self, x) -> np.ndarray:
        x = _as_points(x, self.dimension)
        if self.shape == "point":
            return np.broadcast_to(self.low, x.shape).copy()
        if self.shape == "box":
            return np.clip(x, self.low, self.high)
        direction = self.high - self.low
        length_sq = direction @ direction
        if length_sq == 0.0:
            return np.broadcast_to(self.low, x.shape).copy()
        t = np.clip(((x - self.low) @ direction) / length_sq, 0.0, 1.0)
        p = self.low + t[..., None] * direction
        # points already on the segment map to themselves so projection is idempotent
        scale = 1.0 + np.abs(self.low).max() + np.abs(self.high).max()
        on_segment = np.linalg.norm(x - p, axis=-1) <= 8 * np.finfo(float).eps * scale
        return np.where(on_segment[..., None], x, p)

    def distance(self, x) -> np.ndarray:
        x = _as_points(x, self.dimension)
        return np.linalg.norm(x - self.project(x), axis=-1)

    def contains(self, x, tol: float = 0.0) -> np.ndarray:
        return self.distance(x) <= tol

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.shape == "point":
            return np.tile(self.low, (n, 1))
        if self.shape == "box":
            return rng.uniform(self.low, self.high, size=(n, self.dimension))
        t = rng.uniform(0.0, 1.0, size=(n, 1))
        return self.low + t * (self.high - self.low)

    def same_as(self, other: MinimizerSet, tol: float = 1e-12) -> bool:
        if self.shape != other.shape or self.dimension != other.dimension:
            return False
        if not np.allclose(self.low, other.low, atol=tol, rtol=0):
            return False
        if self.high is None:
            return True
        return bool(np.allclose(self.high, other.high, atol=tol, rtol=0))

    def describe(self) -> str:
        if self.shape == "point":
            return f"point{tuple(self.low.tolist())}"
        return f"{self.shape}{tuple(self.low.tolist())}..{tuple(self.high.tolist())}"


def _polyder(c: np.ndarray) -> np.ndarray:
    return np.polyder(c) if len(c) > 1 else np.zeros(1)


@dataclass(frozen=True, eq=False)
class PiecewisePoly:
    """Univariate piecewise polynomial; piece ``i`` covers ``[b[i-1], b[i])``.

    Coefficients use the ``np.polyval`` ordering (highest degree first).
    """

    breakpoints: tuple[float, ...]
    pieces: tuple[np.ndarray, ...]

    def __post_init__(self):
        if len(self.pieces) != len(self.breakpoints) + 1:
            raise ValueError("need exactly one more piece than breakpoints")
        if any(b2 <= b1 for b1, b2 in zip(self.breakpoints, self.breakpoints[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        object.__setattr__(
            self, "pieces", tuple(np.atleast_1d(np.asarray(c, dtype=float)) for c in self.pieces)
        )

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.breakpoints, t, side="right")
        out = np.empty_like(t)
        for i, coeffs in enumerate(self.pieces):
            mask = idx == i
            if np.any(mask):
                out[mask] = np.polyval(coeffs, t[mask])
        return out

    def derivative(self) -> PiecewisePoly:
        return PiecewisePoly(self.breakpoints, tuple(_polyder(c) for c in self.pieces))

    def piece_value(self, i: int, t: float) -> float:
        return float(np.polyval(self.pieces[i], t))

    def gluing_gaps(self) -> list[tuple[float, float, float]]:
        """(breakpoint, |value jump|, |derivative jump|) at every breakpoint."""
        d = self.derivative()
        gaps = []
        for i, b in enumerate(self.breakpoints):
            dv = abs(self.piece_value(i, b) - self.piece_value(i + 1, b))
            dd = abs(d.piece_value(i, b) - d.piece_value(i + 1, b))
            gaps.append((b, dv, dd))
        return gaps

    @classmethod
    def from_derivative(
        cls,
        breakpoints: Sequence[float],
        derivative_pieces: Sequence[Sequence[float]],
        anchor: float = 0.0,
        anchor_value: float = 0.0,
    ) -> PiecewisePoly:
        """Integrate a piecewise derivative, gluing constants for continuity."""
        bps = tuple(float(b) for b in breakpoints)
        prims = [np.polyint(np.asarray(c, dtype=float)) for c in derivative_pieces]
        k = int(np.searchsorted(bps, anchor, side="right"))
        prims[k][-1] += anchor_value - np.polyval(prims[k], anchor)
        for i in range(k + 1, len(prims)):
            b = bps[i - 1]
            prims[i][-1] += np.polyval(prims[i - 1], b) - np.polyval(prims[i], b)
        for i in range(k - 1, -1, -1):
            b = bps[i]
            prims[i][-1] += np.polyval(prims[i + 1], b) - np.polyval(prims[i], b)
        return cls(bps, tuple(prims))


@dataclass(frozen=True, eq=False)
class Objective:
    """A C^1 objective with gradient, minimizer set and optimal value.

    ``analytic_constants`` maps condition names (``"PL-"``, ``"SC+"``, ...) to
    known optimal constants. ``breakpoints`` lists the kinks of the second
    derivative for 1-D piecewise objectives; grids and finite-difference
    checks use them.
    """

    dimension: int
    value: Callable[[np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray], np.ndarray]
    minimizers: MinimizerSet
    f_star: float
    label: str
    analytic_constants: Mapping[str, float] = field(default_factory=dict)
    breakpoints: tuple[float, ...] = ()
    has_plateau: bool = False
    piecewise: PiecewisePoly | None = None

    def __post_init__(self):
        if self.dimension < 1:
            raise InvalidObjectiveError("dimension must be positive")
        if self.minimizers.dimension != self.dimension:
            raise InvalidObjectiveError("minimizer set dimension does not match objective")

    def __call__(self, x) -> np.ndarray:
        return self.value(_as_points(x, self.dimension))

    def grad(self, x) -> np.ndarray:
        return self.gradient(_as_points(x, self.dimension))

    def suboptimality(self, x) -> np.ndarray:
        return self(x) - self.f_star

    def distance(self, x) -> np.ndarray:
        return self.minimizers.distance(x)

    def project(self, x) -> np.ndarray:
        return self.minimizers.project(x)


def _univariate(pp: PiecewisePoly):
    dpp = pp.derivative()

    def value(x):
        return pp(np.asarray(x)[..., 0])

    def gradient(x):
        return dpp(np.asarray(x)[..., 0])[..., None]

    return value, gradient


def _piecewise_objective(pp: PiecewisePoly, label: str, **kwargs) -> Objective:
    value, gradient = _univariate(pp)
    return Objective(
        dimension=1,
        value=value,
        gradient=gradient,
        minimizers=MinimizerSet.point([0.0]),
        f_star=0.0,
        label=label,
        breakpoints=pp.breakpoints,
        piecewise=pp,
        **kwargs,
    )


def _fmt(v: float) -> str:
    return f"{v:g}"


def _uniform_constants(lower: float, upper: float) -> dict[str, float]:
    from .conditions import ConditionKind

    return {k.value: (upper if k.is_upper else lower) for k in ConditionKind}


def make_quadratic(eigenvalues, center=None) -> Objective:
    """f(x) = 1/2 sum_i lambda_i (x_i - c_i)^2 with a diagonal Hessian."""
    lam = np.atleast_1d(np.asarray(eigenvalues, dtype=float))
    if lam.ndim != 1 or lam.size == 0:
        raise InvalidObjectiveError("eigenvalues must be a non-empty vector")
    if np.any(lam <= 0):
        raise InvalidObjectiveError(f"eigenvalues must be positive, got {lam.tolist()}")
    c = np.zeros_like(lam) if center is None else np.atleast_1d(np.asarray(center, dtype=float))
    if c.shape != lam.shape:
        raise InvalidObjectiveError("center and eigenvalues differ in length")

    def value(x):
        return 0.5 * np.sum(lam * (x - c) ** 2, axis=-1)

    def gradient(x):
        return lam * (x - c)

    label = "quadratic:" + ",".join(_fmt(v) for v in lam)
    if np.any(c != 0):
        label += "@" + ",".join(_fmt(v) for v in c)
    return Objective(
        dimension=lam.size,
        value=value,
        gradient=gradient,
        minimizers=MinimizerSet.point(c),
        f_star=0.0,
        label=label,
        analytic_constants=_uniform_constants(lam.min(), lam.max()),
    )


def make_f_lrp() -> Objective:
    """Piecewise quadratic with f' = 25x, x + 24, 25x - 24 split at 1 and 2."""
    pp = PiecewisePoly.from_derivative((1.0, 2.0), ([25.0, 0.0], [1.0, 24.0], [25.0, -24.0]))
    # optimal constants by direct minimisation of each ratio; QG- is attained at x = 3
    constants = {
        "SC-": 1.0,
        "*SC-": 7.0,
        "RSI-": 13.0,
        "EB-": 13.0,
        "PL-": 169.0 / 19.0,
        "QG-": 17.0,
    }
    constants.update({k: 25.0 for k in ("SC+", "*SC+", "RSI+", "EB+", "PL+", "QG+")})
    return _piecewise_objective(pp, "f_lrp", analytic_constants=constants)


def make_f_eps(eps: float) -> Objective:
    """x^2 with a steep quadratic patch on [1, 1 + eps^2]."""
    if not eps > 0:
        raise InvalidParameterError(f"eps must be positive, got {eps}")
    e = float(eps)
    pp = PiecewisePoly(
        (1.0, 1.0 + e * e),
        (
            [1.0, 0.0, 0.0],
            [1.0 + 1.0 / e, -2.0 / e, 1.0 / e],
            [1.0, 2.0 * e, -2.0 * e - e**3],
        ),
    )
    return _piecewise_objective(
        pp, f"f_eps:{_fmt(e)}", analytic_constants={"SC-": 2.0, "SC+": 2.0 + 2.0 / e}
    )


def make_smooth_abs() -> Objective:
    """sqrt(x^2 + 1) - 1: convex, 1-smooth, not strongly convex."""

    def value(x):
        t = np.asarray(x)[..., 0]
        # t^2 / (sqrt(t^2+1) + 1) avoids cancellation near 0
        return t * t / (np.sqrt(t * t + 1.0) + 1.0)

    def gradient(x):
        t = np.asarray(x)[..., 0]
        return (t / np.sqrt(t * t + 1.0))[..., None]

    return Objective(
        dimension=1,
        value=value,
        gradient=gradient,
        minimizers=MinimizerSet.point([0.0]),
        f_star=0.0,
        label="smooth_abs",
        analytic_constants={"SC+": 1.0, "PL+": 1.0},
    )


def make_cubic_ramp() -> Objective:
    """0 below 1, (x-1)^3 on [1, 2], 3x - 5 above 2.

    Meant as a perturbation anchored at {0}; it vanishes on all of x < 1, so
    the declared minimizer set is a subset of its argmin.
    """
    pp = PiecewisePoly((1.0, 2.0), ([0.0], [1.0, -3.0, 3.0, -1.0], [3.0, -5.0]))
    return _piecewise_objective(pp, "cubic_ramp")


def make_plateau(eps: float, eta: float) -> Objective:
    """1/2 x^2 glued to a flat shelf on [1+eps, 1+eps+eta]; GD can get stuck there."""
    if not (eps > 0 and eta > 0):
        raise InvalidParameterError("plateau needs eps > 0 and eta > 0")
    e, h = float(eps), float(eta)
    c = 1.0 + e + h
    pp = PiecewisePoly(
        (1.0, 1.0 + e, c),
        (
            [0.5, 0.0, 0.0],
            [-0.5 / e, (1.0 + e) / e, -(1.0 + e) / (2.0 * e)],
            [(1.0 + e) / 2.0],
            [0.5, -c, c * c / 2.0 + (1.0 + e) / 2.0],
        ),
    )
    constants = {"SC+": 1.0, "SC-": -1.0 / e, "QG-": (1.0 + e) / (c * c + 1.0 + e)}
    return _piecewise_objective(
        pp, f"plateau:{_fmt(e)},{_fmt(h)}", analytic_constants=constants, has_plateau=True
    )


def make_distance_well(minimizers: MinimizerSet, curvature: float = 1.0, label: str | None = None):
    """(c/2) d(x, X*)^2: convex and smooth, flat on a non-trivial minimizer set."""
    if not curvature > 0:
        raise InvalidParameterError("curvature must be positive")
    c = float(curvature)

    def value(x):
        return 0.5 * c * minimizers.distance(x) ** 2

    def gradient(x):
        x = np.asarray(x, dtype=float)
        return c * (x - minimizers.project(x))

    if label is None:
        label = f"well:{minimizers.describe()},c={_fmt(c)}"
    return Objective(
        dimension=minimizers.dimension,
        value=value,
        gradient=gradient,
        minimizers=minimizers,
        f_star=0.0,
        label=label,
        analytic_constants={**{k: c for k in ("SC+", "*SC+", "RSI+", "EB+", "PL+", "QG+")},
                            **{k: c for k in ("*SC-", "RSI-", "EB-", "PL-", "QG-")},
                            "SC-": 0.0},
    )


def compose(obj: Objective, outer: Callable, outer_prime: Callable, label: str) -> Objective:
    """g o f for an increasing g; same minimizers, optimal value g(f*)."""

    def value(x):
        return outer(obj.value(x))

    def gradient(x):
        return outer_prime(obj.value(x))[..., None] * obj.gradient(x)

    return Objective(
        dimension=obj.dimension,
        value=value,
        gradient=gradient,
        minimizers=obj.minimizers,
        f_star=float(outer(np.asarray(obj.f_star))),
        label=label,
        breakpoints=obj.breakpoints,
    )


# ---------------------------------------------------------------- logistic


@dataclass(frozen=True, eq=False)
class LogisticDataset:
    """Samples Z = y * x with the label folded in."""

    samples: np.ndarray
    seed: int
    flip: float = 0.1

    @property
    def dimension(self) -> int:
        return self.samples.shape[1]

    @property
    def size(self) -> int:
        return self.samples.shape[0]

    @classmethod
    def synthetic(cls, seed: int = 42, d: int = 3, m: int = 200, flip: float = 0.1):
        """Gaussian features, labels from a planted direction, a fraction flipped."""
        rng = np.random.default_rng(seed)
        x = rng.standard_normal((m, d))
        w_true = rng.standard_normal(d)
        y = np.where(x @ w_true >= 0, 1.0, -1.0)
        y[rng.random(m) < flip] *= -1.0
        return cls(samples=y[:, None] * x, seed=seed, flip=flip)

    def span_check(self, n_directions: int = 64, seed: int | None = None) -> bool:
        """Every sampled direction (and its negative) sees some sample with <w, Z> > 0."""
        rng = np.random.default_rng(self.seed if seed is None else seed)
        w = rng.standard_normal((n_directions, self.dimension))
        w /= np.linalg.norm(w, axis=1, keepdims=True)
        proj = w @ self.samples.T
        return bool(np.all((proj > 0).any(axis=1)) and np.all((proj < 0).any(axis=1)))

    def key(self) -> tuple:
        return (self.seed, self.flip, self.samples.shape, self.samples.tobytes())


def _logistic_value(z: np.ndarray, x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, -(x @ z.T)).mean(axis=-1)


def _logistic_gradient(z: np.ndarray, x: np.ndarray) -> np.ndarray:
    w = expit(-(x @ z.T))
    return -(w @ z) / z.shape[0]


@functools.lru_cache(maxsize=16)
def _reference_minimizer_cached(key: tuple) -> tuple[np.ndarray, int, float]:
    z = _REFERENCE_DATA[key]
    lipschitz = np.sum(z * z) / (4.0 * z.shape[0])
    x = np.zeros(z.shape[1])
    alpha = 1.0 / lipschitz
    gnorm = np.inf
    for it in range(1_000_000):
        g = _logistic_gradient(z, x)
        gnorm = float(np.linalg.norm(g))
        if gnorm < 1e-12:
            break
        x = x - alpha * g
    return x, it, gnorm


_REFERENCE_DATA: dict[tuple, np.ndarray] = {}


def logistic_reference_minimizer(dataset: LogisticDataset) -> np.ndarray:
    """High-precision GD minimizer (step 1/L_hat, L_hat = sum ||Z||^2 / 4m), cached."""
    key = dataset.key()
    _REFERENCE_DATA[key] = dataset.samples
    x, _, _ = _reference_minimizer_cached(key)
    return x.copy()


def make_logistic(dataset: LogisticDataset) -> Objective:
    """Empirical logistic loss f(w) = mean ln(1 + exp(-<w, Z_i>))."""
    if not dataset.span_check():
        raise DegenerateDatasetError("samples are separable along a sampled direction")
    z = np.array(dataset.samples, dtype=float)
    x_star = logistic_reference_minimizer(dataset)

    def value(x):
        return _logistic_value(z, np.asarray(x, dtype=float))

    def gradient(x):
        return _logistic_gradient(z, np.asarray(x, dtype=float))

    label = f"logistic:seed={dataset.seed},d={dataset.dimension},m={dataset.size}"
    return Objective(
        dimension=dataset.dimension,
        value=value,
        gradient=gradient,
        minimizers=MinimizerSet.point(x_star),
        f_star=float(_logistic_value(z, x_star)),
        label=label,
    )


def square(obj: Objective) -> Objective:
    """f^2, the reparametrisation that gives a positive f quadratic growth."""
    return compose(obj, lambda t: t * t, lambda t: 2.0 * t, label=f"sq({obj.label})")


# ---------------------------------------------------------------- labels


def _floats(arg: str) -> list[float]:
    try:
        return [float(v) for v in arg.split(",") if v.strip()]
    except ValueError as exc:
        raise LabelError(f"bad numeric list {arg!r}") from exc


def _keyvals(arg: str) -> dict[str, str]:
    out = {}
    for item in filter(None, (s.strip() for s in arg.split(","))):
        if "=" not in item:
            raise LabelError(f"expected key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _base_objective(label: str) -> Objective:
    name, _, arg = label.partition(":")
    name = name.strip()
    try:
        if name == "f_lrp":
            return make_f_lrp()
        if name == "f_eps":
            (eps,) = _floats(arg)
            return make_f_eps(eps)
        if name == "quadratic":
            lam, _, center = arg.partition("@")
            return make_quadratic(_floats(lam), _floats(center) if center else None)
        if name == "plateau":
            eps, eta = _floats(arg)
            return make_plateau(eps, eta)
        if name == "smooth_abs":
            return make_smooth_abs()
        if name == "cubic_ramp":
            return make_cubic_ramp()
        if name == "box_well":
            vals = _floats(arg) if arg else [-1.0, 1.0]
            lo, hi = vals[0], vals[1]
            d = int(vals[2]) if len(vals) > 2 else 1
            ms = MinimizerSet.box(np.full(d, lo), np.full(d, hi))
            return make_distance_well(ms, 1.0, label=f"box_well:{_fmt(lo)},{_fmt(hi)},{d}")
        if name in ("logistic", "logistic_sq"):
            kv = _keyvals(arg)
            ds = LogisticDataset.synthetic(
                seed=int(kv.get("seed", 42)), d=int(kv.get("d", 3)), m=int(kv.get("m", 200))
            )
            obj = make_logistic(ds)
            return square(obj) if name == "logistic_sq" else obj
    except (ValueError, TypeError) as exc:
        if isinstance(exc, (LabelError, InvalidObjectiveError, InvalidParameterError)):
            raise
        raise LabelError(f"cannot parse objective label {label!r}: {exc}") from exc
    raise LabelError(f"unknown objective {name!r}")


def objective_from_label(label: str) -> Objective:
    """Build a corpus objective (optionally perturbed with ``+``) from its label."""
    base, *perts = label.split("+")
    obj = _base_objective(base)
    if perts:
        from .starnorm import perturb, perturbation_from_label

        for p in perts:
            obj = perturb(obj, perturbation_from_label(p, anchor=obj.minimizers))
    return obj


CORPUS_LABELS = (
    "quadratic:1,10",
    "quadratic:2",
    "f_lrp",
    "f_eps:0.1",
    "f_eps:0.5",
    "smooth_abs",
    "plateau:0.5,1",
    "box_well:-1,1,1",
)


# ---------------------------------------------------------------- checks


def away_from_breakpoints(obj: Objective, x: np.ndarray, margin: float = 1e-3) -> np.ndarray:
    """Mask of points at least ``margin`` away from every 1-D breakpoint."""
    x = _as_points(x, obj.dimension)
    if not obj.breakpoints:
        return np.ones(x.shape[:-1], dtype=bool)
    t = x[..., 0]
    bps = np.asarray(obj.breakpoints)
    return np.min(np.abs(t[..., None] - bps), axis=-1) >= margin


def finite_difference_gradient(obj: Objective, x: np.ndarray, step: float = 1e-5) -> np.ndarray:
    x = _as_points(x, obj.dimension)
    out = np.empty_like(x)
    for i in range(obj.dimension):
        e = np.zeros(obj.dimension)
        e[i] = step
        out[..., i] = (obj(x + e) - obj(x - e)) / (2 * step)
    return out
