import itertools
import random
from fractions import Fraction

import networkx as nx
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pebblelab.builders import build_strassen
from pebblelab.cdag import CdagDraft
from pebblelab.domflow import (DominatorQuery, FlowQuery, LemmaViolation, QueryError, SearchExhausted,
                               brute_force_min_dominator, check_internal_flow_bound, empirical_flow,
                               flow_lower_bound, min_dominator, min_postdominator, separates, vertex_cut)
from pebblelab.lemmas import random_dag, random_query


def nx_vertex_flow(g, sources, targets):
    """Independent oracle: vertex-split max flow via networkx."""
    G = nx.DiGraph()
    big = 10**9
    for v in range(len(g)):
        G.add_edge(("i", v), ("o", v), capacity=1)
        for w in g.succs[v]:
            G.add_edge(("o", v), ("i", w), capacity=big)
    for s in sources:
        G.add_edge("S", ("i", s), capacity=big)
    for t in targets:
        G.add_edge(("o", t), "T", capacity=big)
    return nx.maximum_flow_value(G, "S", "T")


def graph(edges, inputs, outputs):
    d = CdagDraft()
    names = sorted({x for e in edges for x in e} | set(inputs))
    for x in names:
        d.add_vertex(x)
    for u, v in edges:
        d.add_edge(u, v)
    d.inputs, d.outputs = list(inputs), list(outputs)
    return d.seal()


def test_chain_tie_break_picks_earliest():
    g = graph([("a", "b"), ("b", "c")], ["a"], ["c"])
    res = min_dominator(DominatorQuery.dominator(g, [g.index("c")]))
    assert res.size == 1 and {g.ids[v] for v in res.witness} == {"a"}


def test_single_output_dominates_itself(h2):
    for t in h2.outputs:
        assert min_dominator(DominatorQuery.dominator(h2, [t])).size == 1


def test_all_outputs_of_h2(h2):
    res = min_dominator(DominatorQuery.dominator(h2, h2.outputs))
    assert res.size == 4 == nx_vertex_flow(h2, h2.inputs, h2.outputs)
    assert brute_force_min_dominator(DominatorQuery.dominator(h2, h2.outputs), 8).size == 4


def test_postdominator_examples(h2):
    res = min_postdominator(DominatorQuery.post_dominator(h2, h2.inputs, h2.outputs))
    products = set(h2.vertices_with_role("product"))
    assert res.size <= 7 and separates(h2, h2.inputs, h2.outputs, products)
    g = graph([("a", "c")], ["a"], ["c"])
    assert min_postdominator(DominatorQuery.post_dominator(g, [0], [1])).size == 1
    g = graph([("a", "c"), ("b", "d")], ["a", "b"], ["c", "d"])
    res = min_postdominator(DominatorQuery.post_dominator(g, [g.index("a")], [g.index("d")]))
    assert res.size == 0 and res.witness == frozenset()


def test_query_validation(h2):
    with pytest.raises(QueryError):
        DominatorQuery.dominator(h2, [])
    with pytest.raises(QueryError):
        DominatorQuery.post_dominator(h2, [h2.outputs[0]], h2.outputs)
    with pytest.raises(QueryError):
        DominatorQuery.dominator(h2, [999])
    with pytest.raises(QueryError):
        min_postdominator(DominatorQuery.dominator(h2, h2.outputs))


def test_brute_force_exhausts(h2):
    with pytest.raises(SearchExhausted, match=r"exhausted\(0\)"):
        brute_force_min_dominator(DominatorQuery.dominator(h2, h2.outputs[:1]), 0)


@given(st.integers(0, 2**32))
def test_mincut_matches_brute_force(seed):
    rng = random.Random(seed)
    g = random_dag(rng)
    q = random_query(rng, g)
    fast = (min_dominator if q.mode == "dominator" else min_postdominator)(q)
    assert fast.size == brute_force_min_dominator(q, len(g)).size
    assert fast.size == nx_vertex_flow(g, q.source_set, q.targets)
    assert separates(g, q.source_set, q.targets, fast.witness)


@given(st.integers(0, 2**32))
def test_mincut_matches_networkx_on_h4(seed):
    g = build_strassen(4)[0]
    rng = random.Random(seed)
    targets = rng.sample(range(len(g)), rng.randint(1, 12))
    size, cut = vertex_cut(g, g.inputs, targets)
    assert size == nx_vertex_flow(g, g.inputs, targets) == len(cut)


def test_flow_formula_examples():
    assert flow_lower_bound(8, 4, 2) == 2
    assert flow_lower_bound(6, 4, 2) == Fraction(15, 8)
    assert flow_lower_bound(0, 4, 2) == 0
    assert FlowQuery(8, 4, 2).bound == 2
    with pytest.raises(QueryError):
        FlowQuery(9, 4, 2)
    with pytest.raises(QueryError):
        flow_lower_bound(0, 5, 2)


@given(st.integers(1, 6), st.data())
def test_flow_formula_is_clamped_and_monotone(n, data):
    u = data.draw(st.integers(0, 2 * n * n))
    v = data.draw(st.integers(0, n * n))
    w = flow_lower_bound(u, v, n)
    assert w >= 0
    if u < 2 * n * n:
        assert flow_lower_bound(u + 1, v, n) >= w
    if v < n * n:
        assert flow_lower_bound(u, v + 1, n) >= w


def test_empirical_flow_examples():
    assert empirical_flow(1, 2, [0, 1], [0]) == 2
    assert empirical_flow(1, 2, [], [0]) == 1
    assert empirical_flow(2, 2, range(8), range(4)) == 16
    assert empirical_flow(2, 3, [0, 1, 2, 3], [0, 1, 2, 3]) == 81
    with pytest.raises(QueryError):
        empirical_flow(3, 2, [0], [0])


def test_internal_flow_examples(h4):
    g, report = h4
    fam = report.family(1)
    outs = g.indices(fam.outputs[0])
    assert check_internal_flow_bound(g, fam, outs, []) == 8
    internal = [g.index(x) for x in fam.members[0] if x not in set(fam.inputs[0])]
    assert check_internal_flow_bound(g, fam, outs[:1], internal[:2]) >= 0  # vacuous radicand
    with pytest.raises(QueryError, match="input"):
        check_internal_flow_bound(g, fam, outs, g.indices(fam.inputs[0][:1]))


def test_internal_flow_random_gamma(h4):
    g, report = h4
    fam = report.family(1)
    rng = random.Random(7)
    internal = sorted(g.index(x) for m, ins in zip(fam.members, fam.inputs) for x in m if x not in set(ins))
    allouts = [g.index(o) for outs in fam.outputs for o in outs]
    for _ in range(300):
        outs = rng.sample(allouts, rng.randint(1, len(allouts)))
        gamma = rng.sample(internal, rng.randint(0, 3))
        if len(gamma) <= 2 * len(outs):
            check_internal_flow_bound(g, fam, outs, gamma)


def test_internal_flow_violation_is_reported(h4, monkeypatch):
    import pebblelab.bounds as b
    g, report = h4
    fam = report.family(1)
    monkeypatch.setattr(b, "internal_flow_inputs", lambda n, o, gamma: 9.0)
    with pytest.raises(LemmaViolation):
        check_internal_flow_bound(g, fam, g.indices(fam.outputs[0]), [])


def test_postdominators_respect_flow_bound(h2):
    """Every (input subset, output subset) of H^{2x2}."""
    ins, outs = list(h2.inputs), list(h2.outputs)
    for r in range(1, 9):
        for I in itertools.combinations(ins, r):
            for k in range(1, 5):
                for O in itertools.combinations(outs, k):
                    res = min_postdominator(DominatorQuery.post_dominator(h2, I, O))
                    assert res.size >= flow_lower_bound(len(I), len(O), 2)
