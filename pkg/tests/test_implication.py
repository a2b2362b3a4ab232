import json

import pytest

from condgraph.conditions import ConditionConstant, ConditionKind, estimate_all, verify_membership
from condgraph.implication import (
    ConversionDomainError,
    SourceNotSatisfiedError,
    apply_edge,
    builtin_edges,
    closure,
    edges_json,
    flags,
    verify_edge,
    verify_graph,
)
from condgraph.objective import make_plateau, objective_from_label

K = ConditionKind


def C(kind, v):
    return ConditionConstant(K(kind), v)


def edge(eid):
    return {e.edge_id: e for e in builtin_edges()}[eid]


def test_edge_set():
    edges = builtin_edges()
    assert len(edges) == 21
    assert len({e.edge_id for e in edges}) == 21
    ids = {e.edge_id for e in edges}
    for eid in ("PL- -> QG-", "RSI+ -> *SC+", "*SC- & QG- -> RSI-", "QG- & EB+ -> PL+", "SC- & QG+ -> EB+"):
        assert eid in ids


def test_conversion_examples():
    assert apply_edge(edge("PL- -> QG-"), [C("PL-", 3.0)]).value == 3.0
    assert apply_edge(edge("SC- & QG+ -> EB+"), [C("SC-", 0.0), C("QG+", 4.0)]).value == 8.0
    assert apply_edge(edge("EB- & QG+ -> PL-"), [C("EB-", 13.0), C("QG+", 25.0)]).value == pytest.approx(6.76)
    assert apply_edge(edge("RSI+ -> *SC+"), [C("RSI+", 25.0)]).value == 50.0
    assert apply_edge(edge("*SC- & QG- -> RSI-"), [C("*SC-", 7.0), C("QG-", 19.0)]).value == 13.0
    assert apply_edge(edge("SC- & *SC+ -> EB+"), [C("SC-", -1.0), C("*SC+", 4.0)]).value == 6.0


def test_conversion_errors():
    with pytest.raises(ValueError):
        apply_edge(edge("PL- -> QG-"), [C("QG-", 3.0)])
    with pytest.raises(ConversionDomainError):
        apply_edge(edge("SC- & QG+ -> EB+"), [C("SC-", 5.0), C("QG+", 4.0)])
    with pytest.raises(ConversionDomainError):
        apply_edge(edge("*SC- & QG- -> RSI-"), [C("*SC-", -5.0), C("QG-", 1.0)])
    with pytest.raises(ConversionDomainError):
        apply_edge(edge("*SC- -> PL-"), [C("*SC-", 0.0)])


@pytest.mark.parametrize("e", builtin_edges(), ids=lambda e: e.edge_id)
def test_monotone_conversion(e):
    base = {k: (0.5 if k.is_lower else 4.0) for k in e.sources}
    v0 = apply_edge(e, [C(k, base[k]) for k in e.sources]).value
    for k in e.sources:
        better = dict(base)
        better[k] = base[k] * (1.5 if k.is_lower else 0.75)
        try:
            v1 = apply_edge(e, [C(s, better[s]) for s in e.sources]).value
        except ConversionDomainError:
            continue
        # a better source constant never yields a worse target
        if e.target.is_lower:
            assert v1 >= v0 - 1e-12
        else:
            assert v1 <= v0 + 1e-12


def test_closure_examples():
    full = closure([C("SC-", 1.0), C("SC+", 10.0)])
    assert {c.kind for c in full} == set(ConditionKind)
    pl = closure([C("PL-", 2.0)])
    assert {str(c.kind): c.value for c in pl} == {"PL-": 2.0, "QG-": 2.0, "EB-": 2.0}
    rsi = closure([C("RSI+", 2.0)])
    assert {str(c.kind): c.value for c in rsi} == {"*SC+": 4.0, "RSI+": 2.0, "QG+": 2.0}


def test_closure_convexity_flag():
    out = {str(c.kind): c.value for c in closure([C("QG-", 2.0)], extras=["convexity"])}
    assert out["RSI-"] == 1.0
    assert out["SC-"] == 0.0


def test_closure_idempotent(f_lrp):
    ests = [e.constant() for e in estimate_all(f_lrp).values() if e.satisfied]
    once = closure(ests)
    twice = closure(once)
    assert [(c.kind, c.value) for c in once] == [(c.kind, c.value) for c in twice]


@pytest.mark.parametrize("label", ["f_lrp", "quadratic:1,10", "f_eps:0.1"])
def test_closure_dominated_by_estimates(label):
    f = objective_from_label(label)
    est = estimate_all(f)
    srcs = [e.constant() for k, e in est.items() if e.satisfied and k in (K.SC_LO, K.SC_UP)]
    for c in closure(srcs):
        direct = est[c.kind].value
        if c.kind.is_lower:
            assert c.value <= direct + 1e-6
        else:
            assert c.value >= direct - 1e-6


def test_flags():
    assert flags([C("SC-", 0.0)]) == {"convexity", "star-convexity"}
    assert flags([C("*SC-", 1.0)]) == {"star-convexity"}
    assert flags([C("SC-", -1.0)]) == set()


@pytest.mark.parametrize("e", builtin_edges(), ids=lambda e: e.edge_id)
def test_edges_on_quadratic(e, quad_1_10):
    r = verify_edge(e, quad_1_10)
    assert r.holds, r


def test_lrp_rsi_pair_edge_tight(f_lrp):
    rsi = apply_edge(edge("*SC- & QG- -> RSI-"), [C("*SC-", 7.0), C("QG-", 19.0)])
    assert verify_membership(f_lrp, rsi).holds
    assert not verify_membership(f_lrp, C("RSI-", 13.0 + 1e-2)).holds


def test_eb_to_pl_on_f_eps(f_eps01):
    r = verify_edge(edge("EB- & QG+ -> PL-"), f_eps01)
    assert r.holds
    assert r.converted.value <= estimate_all(f_eps01)[K.PL_LO].value + 1e-9


def test_unsatisfied_source():
    f = make_plateau(0.5, 1.0)
    with pytest.raises(SourceNotSatisfiedError):
        verify_edge(edge("PL- -> QG-"), f)


def test_verify_graph_marks_skips():
    reports = verify_graph([make_plateau(0.5, 1.0)])
    assert len(reports) == 21
    assert any(r.status == "skipped" for r in reports)
    assert all(r.holds for r in reports if r.status == "verified")


def test_edges_json():
    d = json.loads(edges_json())
    assert len(d["edges"]) == 21
    assert any("2 mu - L" in x["arrow"] for x in d["excluded"])
    assert all(1 <= len(x["sources"]) <= 2 for x in d["edges"])
