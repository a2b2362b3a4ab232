"""Step-size rules and guaranteed GD rates for every upper/lower condition pair.

Six pairs have a direct contraction proof (the base rules). Every other cell
reduces to one of them through constant conversions of the implication
graph; the rule records that chain and the step size it induces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable

from .conditions import ConditionConstant, ConditionKind
from .implication import flags

K = ConditionKind

ROWS = (K.SC_UP, K.PL_UP, K.EB_UP, K.STAR_SC_UP, K.RSI_UP, K.QG_UP)
COLS = (K.SC_LO, K.STAR_SC_LO, K.PL_LO, K.RSI_LO, K.EB_LO, K.QG_LO)

LYAPUNOV = ("value_gap", "distance_sq", "min_value_gap")


class NoGuaranteeError(ValueError):
    pass


RATES: dict[str, Callable[[float], float]] = {
    "((k-1)/(k+1))^2": lambda k: ((k - 1) / (k + 1)) ** 2,
    "1-1/k": lambda k: 1 - 1 / k,
    "1-1/(2k)": lambda k: 1 - 1 / (2 * k),
    "1-1/k^2": lambda k: 1 - 1 / k**2,
    "(1-1/k)^2": lambda k: (1 - 1 / k) ** 2,
    "1-1/(4k)": lambda k: 1 - 1 / (4 * k),
    "1-1/(4k^2)": lambda k: 1 - 1 / (4 * k**2),
    "1-1/(4k^4)": lambda k: 1 - 1 / (4 * k**4),
    "1-1/(16k^2)": lambda k: 1 - 1 / (16 * k**2),
    "1-1/(16k^4)": lambda k: 1 - 1 / (16 * k**4),
}


@dataclass(frozen=True, eq=False)
class TuningRule:
    """GD tuning for one cell: alpha(L, mu) and the guaranteed rate q(kappa).

    ``base`` names the direct proof the cell reduces to and ``chain`` lists
    the constant conversions used on the way; both are empty/self for base
    cells. ``extra`` is None, "star-convexity" or "convexity".
    """

    pair: tuple[ConditionKind, ConditionKind]
    formula: str
    step: Callable[[float, float], float]
    step_formula: str
    lyapunov: str
    base: str
    chain: tuple[str, ...] = ()
    extra: str | None = None

    @property
    def upper(self) -> ConditionKind:
        return self.pair[0]

    @property
    def lower(self) -> ConditionKind:
        return self.pair[1]

    @property
    def name(self) -> str:
        mark = {"star-convexity": "*", "convexity": "+cvx"}.get(self.extra, "")
        return f"{self.upper}/{self.lower}{mark}"

    @property
    def is_base(self) -> bool:
        return not self.chain

    def rate(self, kappa: float) -> float:
        return RATES[self.formula](kappa)

    def alpha(self, L: float, mu: float) -> float:
        return self.step(L, mu)

    def q(self, L: float, mu: float) -> float:
        return self.rate(L / mu)

    def applicable(self, extras: Iterable[str]) -> bool:
        extras = _expand(extras)
        return self.extra is None or self.extra in extras


def _expand(extras: Iterable[str]) -> set[str]:
    out = set(extras)
    if "convexity" in out:
        out.add("star-convexity")
    return out


def _kinds(pair) -> tuple[ConditionKind, ConditionKind]:
    u, lo = (K.parse(p) if isinstance(p, str) else p for p in pair)
    if not (u.is_upper and lo.is_lower):
        raise ValueError(f"pair must be (upper, lower), got ({u}, {lo})")
    return u, lo


# base proofs
_B_SC = ("SC+/SC-", lambda L, m: 2 / (L + m), "2/(L+mu)", "((k-1)/(k+1))^2", "distance_sq")
_B_PL = ("SC+/PL-", lambda L, m: 1 / L, "1/L", "1-1/k", "value_gap")
_B_PLSSC = ("PL+/*SC-", lambda L, m: 1 / L, "1/L", "1-1/k", "distance_sq")
_B_PLRSI = ("PL+/RSI-*", lambda L, m: 1 / (2 * L), "1/(2L)", "1-1/(2k)", "distance_sq")
_B_EBRSI = ("EB+/RSI-", lambda L, m: m / L**2, "mu/L^2", "1-1/k^2", "distance_sq")
_B_QGSC = ("QG+/SC-", lambda L, m: 1 / L, "1/L", "(1-1/k)^2", "distance_sq")

BASE_RULES = {b[0]: b for b in (_B_SC, _B_PL, _B_PLSSC, _B_PLRSI, _B_EBRSI, _B_QGSC)}


def _rule(upper, lower, base, formula, step, step_formula, chain=(), extra=None):
    name, _, _, base_formula, lyap = base
    if not chain:
        assert formula == base_formula
    chain = tuple(dict.fromkeys(chain))
    return TuningRule((K(upper), K(lower)), formula, step, step_formula, lyap, name, chain, extra)


_STAR = "star-convexity"
_CVX = "convexity"

# common conversion steps
_TO_QG_UP = {"PL+": "PL+(L) -> QG+(L)", "EB+": "EB+(L) -> RSI+(L) -> QG+(L)",
             "*SC+": "*SC+(L) -> QG+(L)", "RSI+": "RSI+(L) -> QG+(L)", "QG+": ""}
_HALF_RSI = "QG-(mu) & *SC-(0) -> RSI-(mu/2)"
_EB_TO_PL = "EB-(mu) & QG+(L) -> PL-(mu^2/L)"


def _build_table() -> dict[tuple[ConditionKind, ConditionKind], tuple[TuningRule, ...]]:
    t: dict = {}

    def add(rule):
        t.setdefault(rule.pair, ())
        t[rule.pair] = t[rule.pair] + (rule,)

    # first row
    add(_rule("SC+", "SC-", _B_SC, "((k-1)/(k+1))^2", _B_SC[1], "2/(L+mu)"))
    add(_rule("SC+", "*SC-", _B_PL, "1-1/k", lambda L, m: 1 / L, "1/L", ["*SC-(mu) -> PL-(mu)"]))
    add(_rule("SC+", "PL-", _B_PL, "1-1/k", lambda L, m: 1 / L, "1/L"))
    add(_rule("SC+", "RSI-", _B_PL, "1-1/k^2", lambda L, m: 1 / L, "1/L",
              ["RSI-(mu) -> EB-(mu)", "SC+(L) -> PL+(L) -> QG+(L)", _EB_TO_PL]))
    add(_rule("SC+", "RSI-", _B_PLRSI, "1-1/(2k)", lambda L, m: 1 / (2 * L), "1/(2L)",
              ["SC+(L) -> PL+(L)"], _STAR))
    add(_rule("SC+", "EB-", _B_PL, "1-1/k^2", lambda L, m: 1 / L, "1/L",
              ["SC+(L) -> PL+(L) -> QG+(L)", _EB_TO_PL]))
    add(_rule("SC+", "QG-", _B_PLRSI, "1-1/(4k)", lambda L, m: 1 / (2 * L), "1/(2L)",
              ["SC+(L) -> PL+(L)", _HALF_RSI], _STAR))

    # PL+ row
    add(_rule("PL+", "SC-", _B_QGSC, "(1-1/k)^2", lambda L, m: 1 / L, "1/L", [_TO_QG_UP["PL+"]]))
    add(_rule("PL+", "*SC-", _B_PLSSC, "1-1/k", lambda L, m: 1 / L, "1/L"))
    add(_rule("PL+", "PL-", _B_PLRSI, "1-1/(4k)", lambda L, m: 1 / (2 * L), "1/(2L)",
              ["PL-(mu) -> QG-(mu)", _HALF_RSI], _STAR))
    add(_rule("PL+", "RSI-", _B_EBRSI, "1-1/k^2", lambda L, m: m / L**2, "mu/L^2",
              ["PL+(L) -> QG+(L)", "PL+(L) & QG+(L) -> EB+(L)"]))
    add(_rule("PL+", "RSI-", _B_PLRSI, "1-1/(2k)", lambda L, m: 1 / (2 * L), "1/(2L)", extra=_STAR))
    add(_rule("PL+", "EB-", _B_PLRSI, "1-1/(4k^2)", lambda L, m: 1 / (2 * L), "1/(2L)",
              ["PL+(L) -> QG+(L)", _EB_TO_PL, "PL-(mu^2/L) -> QG-(mu^2/L)",
               "QG-(mu^2/L) & *SC-(0) -> RSI-(mu^2/(2L))"], _STAR))
    add(_rule("PL+", "QG-", _B_PLRSI, "1-1/(4k)", lambda L, m: 1 / (2 * L), "1/(2L)",
              [_HALF_RSI], _STAR))

    # rows reducing to the EB+/RSI- proof with an effective upper constant c*L
    def eb_row(upper, to_eb, scale, extra_all, formulas):
        chain0 = list(to_eb)
        qg_chain = [_TO_QG_UP[upper]] if _TO_QG_UP[upper] else []
        f_sc, f_ssc, f_pl, f_rsi, f_eb, f_qg = formulas
        s = scale
        add(_rule(upper, "SC-", _B_QGSC, f_sc, lambda L, m: 1 / L, "1/L", qg_chain))
        add(_rule(upper, "*SC-", _B_EBRSI, f_ssc, lambda L, m: m / (s * L) ** 2,
                  f"mu/({s:g}L)^2" if s != 1 else "mu/L^2",
                  chain0 + ["*SC-(mu) -> RSI-(mu)"], extra_all))
        add(_rule(upper, "PL-", _B_EBRSI, f_pl, lambda L, m: (m / 2) / (s * L) ** 2,
                  f"mu/(2({s:g}L)^2)" if s != 1 else "mu/(2L^2)",
                  chain0 + ["PL-(mu) -> QG-(mu)", _HALF_RSI], extra_all or _STAR))
        add(_rule(upper, "RSI-", _B_EBRSI, f_rsi, lambda L, m: m / (s * L) ** 2,
                  f"mu/({s:g}L)^2" if s != 1 else "mu/L^2", chain0, extra_all))
        add(_rule(upper, "EB-", _B_EBRSI, f_eb, lambda L, m: (m * m / (2 * L)) / (s * L) ** 2,
                  f"mu^2/(2L({s:g}L)^2)" if s != 1 else "mu^2/(2L^3)",
                  chain0 + qg_chain + [_EB_TO_PL, "PL-(mu^2/L) -> QG-(mu^2/L)",
                                       "QG-(mu^2/L) & *SC-(0) -> RSI-(mu^2/(2L))"],
                  extra_all or _STAR))
        add(_rule(upper, "QG-", _B_EBRSI, f_qg, lambda L, m: (m / 2) / (s * L) ** 2,
                  f"mu/(2({s:g}L)^2)" if s != 1 else "mu/(2L^2)",
                  chain0 + [_HALF_RSI], extra_all or _STAR))

    eb_row("EB+", [], 1, None,
           ("(1-1/k)^2", "1-1/k^2", "1-1/(4k^2)", "1-1/k^2", "1-1/(4k^4)", "1-1/(4k^2)"))
    eb_row("*SC+", ["SC-(0) & *SC+(L) -> EB+(L)"], 1, _CVX,
           ("(1-1/k)^2", "1-1/k^2", "1-1/(4k^2)", "1-1/k^2", "1-1/(4k^4)", "1-1/(4k^2)"))
    for upper in ("RSI+", "QG+"):
        pre = ["RSI+(L) -> QG+(L)"] if upper == "RSI+" else []
        eb_row(upper, pre + ["SC-(0) & QG+(L) -> EB+(2L)"], 2, _CVX,
               ("(1-1/k)^2", "1-1/(4k^2)", "1-1/(16k^2)", "1-1/(4k^2)", "1-1/(16k^4)", "1-1/(16k^2)"))
    return t


TABLE = _build_table()


def gd_rules(pair, extras: Iterable[str] = ()) -> tuple[TuningRule, ...]:
    """All variants of a cell that are valid under ``extras``."""
    pair = _kinds(pair)
    if pair not in TABLE:
        raise KeyError(f"no table cell for {pair}")
    return tuple(r for r in TABLE[pair] if r.applicable(extras))


def gd_rule(pair, extra: str | None = None) -> TuningRule:
    """The cell's rule; with ``extra`` given, the variant proved under it is preferred."""
    extras = () if extra is None else (extra,)
    rules = gd_rules(pair, extras)
    if not rules:
        needs = sorted({r.extra for r in TABLE[_kinds(pair)]})
        raise NoGuaranteeError(f"{pair[0]}/{pair[1]} needs {' or '.join(needs)}")
    if extra is not None:
        tagged = [r for r in rules if r.extra is not None]
        if tagged:
            return tagged[-1]
    return rules[0]


def base_rules() -> list[TuningRule]:
    seen = {}
    for rules in TABLE.values():
        for r in rules:
            if r.is_base:
                seen[r.base] = r
    return [seen[name] for name in BASE_RULES]


def hb_quadratic_rule(L: float, mu: float) -> tuple[float, float]:
    """Heavy-ball tuning optimal on quadratics with spectrum in [mu, L]."""
    if not mu > 0 or L < mu:
        raise ValueError(f"need L >= mu > 0, got L={L}, mu={mu}")
    sl, sm = math.sqrt(L), math.sqrt(mu)
    alpha = 4 / (sl + sm) ** 2
    beta = ((sl - sm) / (sl + sm)) ** 2
    return alpha, beta


@dataclass(frozen=True)
class Guarantee:
    rule: TuningRule
    alpha: float
    q: float
    L: float
    mu: float


def candidate_guarantees(constants: Iterable[ConditionConstant], extras: Iterable[str] = ()) -> list[Guarantee]:
    constants = list(constants)
    known = {c.kind: c.value for c in constants}
    extras = _expand(set(extras) | flags(constants))
    out = []
    for (u, lo), rules in TABLE.items():
        if u not in known or lo not in known:
            continue
        L, mu = known[u], known[lo]
        if not (mu > 0 and L >= mu):
            continue
        for r in rules:
            if r.applicable(extras):
                out.append(Guarantee(r, r.alpha(L, mu), r.q(L, mu), L, mu))
    return out


def best_guarantee(constants: Iterable[ConditionConstant], extras: Iterable[str] = ()) -> Guarantee:
    """Smallest guaranteed rate over every satisfied cell, each with its own kappa."""
    cands = candidate_guarantees(constants, extras)
    if not cands:
        raise NoGuaranteeError("no condition pair with a linear-rate guarantee is satisfied")
    return min(cands, key=lambda g: g.q)


def table_csv() -> str:
    """Rows are upper conditions, columns lower ones; '*' and '+cvx' mark the extras."""
    mark = {None: "", _STAR: " *", _CVX: " +cvx"}
    lines = ["upper," + ",".join(str(c) for c in COLS)]
    for u in ROWS:
        cells = []
        for lo in COLS:
            cells.append(" | ".join(r.formula + mark[r.extra] for r in TABLE[(u, lo)]))
        lines.append(f"{u}," + ",".join(cells))
    return "\n".join(lines) + "\n"


def rules_csv() -> str:
    lines = ["upper,lower,extra,rate,step,lyapunov,base,chain"]
    for u in ROWS:
        for lo in COLS:
            for r in TABLE[(u, lo)]:
                lines.append(
                    ",".join([str(u), str(lo), r.extra or "", r.formula, r.step_formula,
                              r.lyapunov, r.base, " ; ".join(r.chain)])
                )
    return "\n".join(lines) + "\n"
