"""Executable implication graph between the twelve conditions.

Each edge turns constants of its source conditions into a constant of the
target condition. ``closure`` propagates a set of known constants to a fixed
point; ``verify_edge`` checks an edge numerically on an objective.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from .conditions import (
    ConditionConstant,
    ConditionKind,
    ConstantEstimate,
    EstimationGrid,
    InvalidConstantError,
    Verdict,
    estimate_constant,
    verify_membership,
)
from .objective import Objective

K = ConditionKind


class ConversionDomainError(ValueError):
    pass


class SourceNotSatisfiedError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ImplicationEdge:
    sources: tuple[ConditionKind, ...]
    target: ConditionKind
    convert: Callable[..., float]
    formula: str
    nonpositive_ok: frozenset[ConditionKind] = frozenset()
    domain: Callable[..., bool] | None = None

    @property
    def edge_id(self) -> str:
        return " & ".join(str(s) for s in self.sources) + " -> " + str(self.target)

    @property
    def graph(self) -> str:
        sides = {s.side for s in self.sources} | {self.target.side}
        return sides.pop() if len(sides) == 1 else "mixed"

    def as_dict(self) -> dict:
        return {
            "id": self.edge_id,
            "sources": [str(s) for s in self.sources],
            "target": str(self.target),
            "constant": self.formula,
            "nonpositive_sources": sorted(str(k) for k in self.nonpositive_ok),
            "graph": self.graph,
        }


def _edge(sources, target, convert, formula, nonpositive_ok=(), domain=None):
    return ImplicationEdge(
        tuple(K(s) for s in sources),
        K(target),
        convert,
        formula,
        frozenset(K(s) for s in nonpositive_ok),
        domain,
    )


def builtin_edges() -> list[ImplicationEdge]:
    ident = lambda c: c  # noqa: E731
    return [
        # lower graph
        _edge(["SC-"], "*SC-", ident, "mu", nonpositive_ok=["SC-"]),
        _edge(["*SC-"], "PL-", ident, "mu"),
        _edge(["PL-"], "QG-", ident, "mu"),
        _edge(["*SC-", "QG-"], "RSI-", lambda a, b: (a + b) / 2, "(mu1 + mu2) / 2", nonpositive_ok=["*SC-"]),
        _edge(["*SC-"], "RSI-", ident, "mu"),
        _edge(["RSI-"], "QG-", ident, "mu"),
        _edge(["RSI-"], "EB-", ident, "mu"),
        _edge(["PL-", "QG-"], "EB-", lambda a, b: math.sqrt(a * b), "sqrt(mu1 mu2)"),
        _edge(["EB-", "QG+"], "PL-", lambda m, L: m * m / L, "mu^2 / L"),
        # upper graph
        _edge(["SC+"], "PL+", ident, "L"),
        _edge(["PL+"], "*SC+", ident, "L"),
        _edge(["PL+"], "QG+", ident, "L"),
        _edge(["PL+", "QG+"], "EB+", lambda a, b: math.sqrt(a * b), "sqrt(L1 L2)"),
        _edge(["EB+"], "RSI+", ident, "L"),
        _edge(["*SC+"], "QG+", ident, "L"),
        _edge(["*SC+", "QG+"], "RSI+", lambda a, b: (a + b) / 2, "(L1 + L2) / 2"),
        _edge(["RSI+"], "*SC+", lambda L: 2 * L, "2 L"),
        _edge(["RSI+"], "QG+", ident, "L"),
        # mixed
        _edge(
            ["SC-", "QG+"], "EB+",
            lambda m, L: L + math.sqrt(L * (L - m)),
            "L + sqrt(L (L - mu))",
            nonpositive_ok=["SC-"],
            domain=lambda m, L: m <= L,
        ),
        _edge(
            ["SC-", "*SC+"], "EB+",
            lambda m, L: L + 2 * max(-m, 0.0),
            "L + 2 max(-mu, 0)",
            nonpositive_ok=["SC-"],
        ),
        _edge(["QG-", "EB+"], "PL+", lambda m, L: L * L / m, "L^2 / mu"),
    ]


# arrows of the published diagram that are not separate edges here
EXCLUDED_ARROWS = [
    {
        "arrow": "RSI- & QG+ -> *SC- (2 mu - L)",
        "reason": "drawn in the diagram but no proof accompanies it; excluded",
    },
    {
        "arrow": "PL- -> EB-",
        "reason": "realised by PL- & QG- -> EB- with mu1 = mu2, QG- coming from PL- -> QG-",
    },
    {
        "arrow": "PL+ -> EB+",
        "reason": "realised by PL+ & QG+ -> EB+, QG+ coming from PL+ -> QG+",
    },
    {
        "arrow": "*SC+ -> RSI+",
        "reason": "realised by *SC+ & QG+ -> RSI+, QG+ coming from *SC+ -> QG+",
    },
    {
        "arrow": "*SC- (0) & QG- -> RSI- (mu / 2)",
        "reason": "convex instance of *SC- & QG- -> RSI- with mu1 = 0",
    },
]


def edges_json(edges: Sequence[ImplicationEdge] | None = None, indent: int = 2) -> str:
    edges = builtin_edges() if edges is None else edges
    return json.dumps(
        {"edges": [e.as_dict() for e in edges], "excluded": EXCLUDED_ARROWS}, indent=indent
    )


def apply_edge(edge: ImplicationEdge, constants: Sequence[ConditionConstant]) -> ConditionConstant:
    kinds = tuple(c.kind for c in constants)
    if kinds != edge.sources:
        raise ValueError(f"edge {edge.edge_id} expects {edge.sources}, got {kinds}")
    vals = [c.value for c in constants]
    for c in constants:
        if c.value <= 0 and c.kind not in edge.nonpositive_ok:
            raise ConversionDomainError(f"{edge.edge_id}: needs {c.kind} constant > 0, got {c.value}")
    if edge.domain is not None and not edge.domain(*vals):
        raise ConversionDomainError(f"{edge.edge_id}: constants {vals} outside the conversion domain")
    try:
        return ConditionConstant(edge.target, edge.convert(*vals))
    except (InvalidConstantError, ValueError) as exc:
        raise ConversionDomainError(f"{edge.edge_id}: {exc}") from exc


# ------------------------------------------------------------------ closure


def _best(current: ConditionConstant | None, new: ConditionConstant) -> bool:
    """Whether ``new`` strictly improves on ``current`` beyond rounding."""
    if current is None:
        return True
    scale = 1e-12 * max(1.0, abs(current.value))
    if new.kind.is_upper:
        return new.value < current.value - scale
    return new.value > current.value + scale


def closure(
    initial: Iterable[ConditionConstant],
    extras: Iterable[str] = (),
    edges: Sequence[ImplicationEdge] | None = None,
    max_rounds: int = 100,
) -> list[ConditionConstant]:
    """Best constant per kind reachable from ``initial`` by repeated edge application.

    ``extras`` may contain "convexity" and "star-convexity", which add SC-(0)
    and *SC-(0) to the starting set.
    """
    edges = builtin_edges() if edges is None else edges
    known: dict[ConditionKind, ConditionConstant] = {}
    seeds = list(initial)
    extras = set(extras)
    if "convexity" in extras:
        seeds.append(ConditionConstant(K.SC_LO, 0.0))
    if "star-convexity" in extras or "convexity" in extras:
        seeds.append(ConditionConstant(K.STAR_SC_LO, 0.0))
    for c in seeds:
        if _best(known.get(c.kind), c):
            known[c.kind] = c
    for _ in range(max_rounds):
        changed = False
        for e in edges:
            if not all(s in known for s in e.sources):
                continue
            try:
                new = apply_edge(e, [known[s] for s in e.sources])
            except ConversionDomainError:
                continue
            if _best(known.get(new.kind), new):
                known[new.kind] = new
                changed = True
        if not changed:
            break
    return [known[k] for k in ConditionKind if k in known]


def flags(constants: Iterable[ConditionConstant]) -> set[str]:
    out = set()
    for c in constants:
        if c.kind is K.SC_LO and c.value >= 0:
            out |= {"convexity", "star-convexity"}
        if c.kind is K.STAR_SC_LO and c.value >= 0:
            out.add("star-convexity")
    return out


# ------------------------------------------------------------------ verification


@dataclass(frozen=True)
class EdgeReport:
    edge_id: str
    objective: str
    sources: tuple[ConstantEstimate, ...]
    converted: ConditionConstant | None
    verdict: Verdict | None
    status: str = "verified"
    detail: str = ""

    @property
    def holds(self) -> bool:
        return self.verdict is not None and self.verdict.holds

    @property
    def margin(self) -> float:
        return math.nan if self.verdict is None else self.verdict.margin


def verify_edge(
    edge: ImplicationEdge,
    obj: Objective,
    grid: EstimationGrid | None = None,
    tol: float = 1e-6,
    estimates: dict | None = None,
) -> EdgeReport:
    """Estimate the source constants, convert, and check the target membership."""
    grid = grid or EstimationGrid.default(obj)
    ests = []
    for s in edge.sources:
        e = estimates[s] if estimates and s in estimates else estimate_constant(s, obj, grid)
        if not e.satisfied or (e.value <= 0 and s not in edge.nonpositive_ok):
            raise SourceNotSatisfiedError(f"{obj.label} has no usable {s} constant (estimate {e.value})")
        ests.append(e)
    converted = apply_edge(edge, [e.constant() for e in ests])
    verdict = verify_membership(obj, converted, grid, tol)
    return EdgeReport(edge.edge_id, obj.label, tuple(ests), converted, verdict)


def verify_graph(
    objectives: Sequence[Objective],
    edges: Sequence[ImplicationEdge] | None = None,
    grids: dict[str, EstimationGrid] | None = None,
    tol: float = 1e-6,
) -> list[EdgeReport]:
    """verify_edge over every (edge, objective) pair; unusable sources are reported as skipped."""
    edges = builtin_edges() if edges is None else edges
    reports = []
    for obj in objectives:
        grid = (grids or {}).get(obj.label) or EstimationGrid.default(obj)
        cache: dict = {}
        for e in edges:
            for s in e.sources:
                if s not in cache:
                    cache[s] = estimate_constant(s, obj, grid)
            try:
                reports.append(verify_edge(e, obj, grid, tol, cache))
            except (SourceNotSatisfiedError, ConversionDomainError) as exc:
                srcs = tuple(cache[s] for s in e.sources)
                reports.append(EdgeReport(e.edge_id, obj.label, srcs, None, None, "skipped", str(exc)))
    return reports
