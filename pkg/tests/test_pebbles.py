import pytest
from hypothesis import given
from hypothesis import strategies as st

from pebblelab.builders import build_naive, build_strassen
from pebblelab.cdag import CdagDraft
from pebblelab.pebbles import (FREE, NO_RECOMPUTE, BadMove, CacheOverflow, CacheTooSmall, InputCompute,
                               MissingOperand, NotBlue, NotRed, OutputNotBlue, Recomputation, Schedule,
                               TraceError, blocked_block_size, generate_blocked_schedule,
                               generate_naive_schedule, io_lower_report, min_cache, naive_tile, read_trace,
                               schedule_order, trace_line, validate_schedule, working_set, write_trace)


def tiny():
    """a, b -> c"""
    d = CdagDraft()
    for x in "abc":
        d.add_vertex(x)
    d.add_edge("a", "c")
    d.add_edge("b", "c")
    d.inputs, d.outputs = ["a", "b"], ["c"]
    return d.seal()


GOOD = [("load", "a"), ("load", "b"), ("compute", "c"), ("store", "c")]


def run(moves, M=3, mode=FREE, g=None):
    g = g or tiny()
    return validate_schedule(g, Schedule.from_moves(g, moves, M), M, mode)


def test_minimal_schedule():
    stats = run(GOOD)
    assert (stats.io_total, stats.loads, stats.stores, stats.peak_red) == (3, 2, 1, 3)


def test_cache_overflow_names_the_compute():
    with pytest.raises(CacheOverflow) as exc:
        run(GOOD, M=2)
    assert exc.value.index == 2 and exc.value.vertex == "c"


@pytest.mark.parametrize("moves,error", [
    ([("load", "a"), ("compute", "c")], MissingOperand),
    ([("load", "c")], NotBlue),
    ([("store", "a")], NotRed),
    ([("evict", "a")], NotRed),
    ([("compute", "a")], InputCompute),
    ([("load", "a"), ("load", "b"), ("compute", "c")], OutputNotBlue),
])
def test_rule_violations(moves, error):
    with pytest.raises(error):
        run(moves)


def test_unknown_move_rejected():
    with pytest.raises(BadMove):
        run([("teleport", "a")])


def test_recompute_allowed_only_in_free_mode():
    moves = GOOD[:3] + [("compute", "c"), ("store", "c")]
    assert run(moves).recomputed_vertices == 1
    with pytest.raises(Recomputation):
        run(moves, mode=NO_RECOMPUTE)


def test_deleted_value_cannot_be_reloaded():
    moves = [("load", "a"), ("load", "b"), ("compute", "c"), ("evict", "c"), ("load", "c")]
    with pytest.raises(NotBlue):
        run(moves, mode=NO_RECOMPUTE)


def test_min_cache_is_widest_compute_plus_one(h2):
    assert min_cache(h2) == 5
    assert min_cache(build_naive(4)) == 3
    with pytest.raises(CacheTooSmall):
        generate_blocked_schedule(8, 4)


def test_working_set_values():
    # peak red demand of in-cache depth-first evaluation
    assert [working_set(s) for s in (1, 2, 4)] == [3, 14, 58]
    assert blocked_block_size(16, 16) == 2
    assert blocked_block_size(16, 5) == 1


@pytest.mark.parametrize("n,M", [(2, 5), (4, 5), (4, 16), (8, 5), (8, 16), (8, 24), (16, 16), (8, 60)])
def test_blocked_schedule_is_valid(n, M):
    g = build_strassen(n)[0]
    s = generate_blocked_schedule(n, M, g)
    stats = validate_schedule(g, s, M, NO_RECOMPUTE)
    assert stats.recomputed_vertices == 0
    assert stats.peak_red <= M
    assert stats.io_total >= 3 * n * n
    assert stats.computes == len(g) - len(g.inputs)


@pytest.mark.parametrize("n", [2, 4, 8])
def test_blocked_schedule_is_trivial_when_everything_fits(n):
    M = working_set(n)
    g = build_strassen(n)[0]
    assert validate_schedule(g, generate_blocked_schedule(n, M, g), M).io_total == 3 * n * n


@given(st.sampled_from([2, 4, 8]), st.integers(5, 80))
def test_blocked_io_roughly_monotone_in_cache(n, M):
    g = build_strassen(n)[0]
    small = validate_schedule(g, generate_blocked_schedule(n, M, g), M).io_total
    big = validate_schedule(g, generate_blocked_schedule(n, 2 * M, g), 2 * M).io_total
    assert big <= small * 1.05


@given(st.integers(1, 10), st.integers(3, 40))
def test_naive_schedule_valid(n, M):
    g = build_naive(n)
    stats = validate_schedule(g, generate_naive_schedule(n, M, g), M, NO_RECOMPUTE)
    assert stats.io_total >= 3 * n * n
    b = naive_tile(M)
    assert b * b + b + 3 <= M or b == 1


def test_schedule_order_rejects_small_cache(h2):
    order = [v for v in h2.topo if v not in set(h2.inputs)]
    with pytest.raises(CacheTooSmall):
        schedule_order(h2, order, 4)


def test_io_lower_report():
    g = build_strassen(8)[0]
    cmp_ = io_lower_report(g, generate_blocked_schedule(8, 16, g), 16, 16)
    assert not cmp_.violation and cmp_.ratio == cmp_.measured_io / 16


def test_trace_roundtrip(tmp_path):
    g = build_strassen(4)[0]
    s = generate_blocked_schedule(4, 16, g)
    path = tmp_path / "t.jsonl"
    write_trace(g, s, path)
    back = read_trace(g, path)
    assert list(back) == list(s) and back.cache == 16
    assert validate_schedule(g, back) == validate_schedule(g, s)


def test_corrupted_trace_reports_line(tmp_path):
    g = tiny()
    path = tmp_path / "t.jsonl"
    write_trace(g, Schedule.from_moves(g, GOOD, 3), path)
    lines = path.read_text().splitlines()
    lines[2] = '{"op": "compute", "v": "a"}'
    path.write_text("\n".join(lines) + "\n")
    s = read_trace(g, path)
    with pytest.raises(InputCompute) as exc:
        validate_schedule(g, s)
    assert trace_line(s, exc.value.index) == 3
    lines[1] = "{not json"
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(TraceError) as exc:
        read_trace(g, path)
    assert exc.value.line == 2
