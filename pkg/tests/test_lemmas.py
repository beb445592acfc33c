import networkx as nx
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pebblelab.builders import build_strassen, strassen_spec
from pebblelab.lemmas import (EncoderSubsetCode, disjoint_path_count, encoder_isomorphism, encoder_max_disjoint,
                              encoder_neighbours, load_table1, sandwich, two_disjoint_h2, verify_cdag_product,
                              verify_corollary_half, verify_disjoint_paths, verify_dominator_2M,
                              verify_family_disjointness, verify_flow, verify_oracle_equivalence, verify_table1)


@given(st.integers(0, 127))
def test_code_bits_bijection(c):
    code = EncoderSubsetCode(c)
    assert EncoderSubsetCode.from_bits(code.bits) == code
    assert len(code.outputs) == sum(code.bits)


def test_code_weights():
    assert EncoderSubsetCode(88).outputs == [1, 3, 4]
    assert EncoderSubsetCode(1).outputs == [7]
    with pytest.raises(ValueError):
        EncoderSubsetCode(128)


@pytest.mark.parametrize("code,x", [(127, 4), (88, 2), (0, 0), (29, 3), (75, 4)])
def test_encoder_examples(code, x):
    assert encoder_max_disjoint("A", code) == x


@pytest.mark.parametrize("side", "AB")
def test_matching_matches_networkx(side):
    nb = encoder_neighbours(side)
    for c in range(128):
        G = nx.Graph()
        outs = EncoderSubsetCode(c).outputs
        G.add_nodes_from(("y", i) for i in outs)
        G.add_edges_from((("y", i), ("x", p)) for i in outs for p in nb[i])
        want = len(nx.bipartite.maximum_matching(G, top_nodes=[("y", i) for i in outs])) // 2
        assert encoder_max_disjoint(side, c) == want


def test_golden_table_shape():
    rows = load_table1()
    assert len(rows) == 128 and sorted(r.code for r in rows) == list(range(128))


def test_table1_verdict():
    v = verify_table1()
    assert v.details["matched"] == 127
    assert v.details["sandwich_ok"] == 256 and v.details["isomorphic_ok"] == 128
    assert [x["code"] for x in v.violations] == [75]
    # the printed bit pattern of that row spells a different code
    assert v.details["golden_inconsistencies"] == [{"code": 75, "bits": "1001010", "size": 4, "bits_encode": 74}]


def test_encoder_isomorphism_is_structural():
    pi, sigma = encoder_isomorphism()
    na, nb = encoder_neighbours("A"), encoder_neighbours("B")
    for k in range(1, 8):
        assert sorted(pi[p] for p in na[k]) == nb[sigma[k - 1]]


def test_sandwich_values():
    assert [sandwich(y) for y in range(8)] == [(0, 0), (1, 1), (2, 2), (2, 3), (3, 4), (3, 5), (4, 6), (4, 7)]


@pytest.mark.parametrize("side", "AB")
def test_sandwich_lower_end_is_tight(side):
    lows = {}
    for c in range(128):
        y = len(EncoderSubsetCode(c).outputs)
        lows[y] = min(lows.get(y, 9), encoder_max_disjoint(side, c))
    assert all(lows[y] == sandwich(y)[0] for y in range(8))


def test_corollary_half(h2):
    v = verify_corollary_half(h2)
    assert v.passed and v.instances_checked == 15
    v = verify_corollary_half(two_disjoint_h2())
    assert v.passed and v.instances_checked == 255


def test_dominator_2m_sampled_small():
    v = verify_dominator_2M(4, 1, seed=3, cutoff=0, samples=200)
    assert v.passed and v.details["mode"] == "sampled" and v.instances_checked == 201


def test_dominator_2m_is_seeded():
    a = verify_dominator_2M(8, 1, seed=5, samples=30)
    b = verify_dominator_2M(8, 1, seed=5, samples=30)
    assert a.to_dict()["violations"] == b.to_dict()["violations"] and a.instances_checked == 31


def test_disjoint_paths_whole_member(h4):
    g, report = h4
    Z = g.indices(report.family(1).outputs[0])
    assert disjoint_path_count(g, report, 1, Z, ()) == (8, 8)


def test_disjoint_paths_small_sweep():
    v = verify_disjoint_paths(4, 1, samples=60, seed=11)
    assert v.passed and v.instances_checked == 60


@pytest.mark.parametrize("level,count", [(1, 7), (2, 49)])
def test_families(level, count):
    v = verify_family_disjointness(8, level)
    assert v.passed and v.details["members"] == count == v.details["isomorphic"]


def test_like_family():
    v = verify_family_disjointness(4, 2, spec=strassen_spec())
    assert v.passed and v.details["members"] >= 1


def test_flow_verdict_small():
    v = verify_flow(2, 2, y_sizes=(4,), x_sizes=(8,))
    assert v.passed and v.instances_checked == 1


def test_cdag_product_and_oracle():
    assert verify_cdag_product(sizes=(1, 2, 4), trials=2).passed
    assert verify_oracle_equivalence(queries=25, seed=9).passed
