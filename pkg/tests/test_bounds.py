import math
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from pebblelab.bounds import (BoundError, BoundParams, count_Z, generic_qM_bound, generic_qM_par,
                              strassen_like_bound, strassen_like_par_bound, strassen_par_bound,
                              strassen_seq_bound, sub_cdag_level)


def test_sequential_examples():
    assert strassen_seq_bound(BoundParams(4, 4)).value == 4
    v = strassen_seq_bound(BoundParams(2, 16))
    assert v.value == 12 and v.regime == "trivial-fallback"
    assert isinstance(strassen_seq_bound(BoundParams(8, 4)).value, Fraction)
    with pytest.raises(BoundError):
        strassen_seq_bound(BoundParams(6, 4))


@pytest.mark.parametrize("M", [1, 4, 16, 64])
def test_at_twice_root_m_bound_equals_m(M):
    assert strassen_seq_bound(BoundParams(2 * math.isqrt(M), M)).value == M


def test_parallel_examples():
    assert strassen_par_bound(BoundParams(8, 16, 8)).value == 2
    with pytest.raises(BoundError, match="2n"):
        strassen_par_bound(BoundParams(4, 4, 2))
    with pytest.raises(BoundError):
        strassen_par_bound(BoundParams(8, 4, 8))
    assert strassen_par_bound(BoundParams(16, 1024, 1)).value == strassen_seq_bound(BoundParams(16, 1024)).value


def test_generic_examples():
    assert generic_qM_bound(BoundParams(4, 4, q=7)).value == 28
    assert generic_qM_bound(BoundParams(4, 4, q=0)).value == 0
    assert generic_qM_par(BoundParams(4, 4, P=8, q=7)).value == Fraction(28, 8)
    assert generic_qM_par(BoundParams(2, 4, P=7, q=7)).value == 4


def test_strassen_like_examples():
    assert strassen_like_bound(BoundParams(16, 4)).value == 4  # two levels above the 2 sqrt(M) blocks
    assert strassen_like_bound(BoundParams(4, 4)).regime == "trivial-fallback"
    v = strassen_like_bound(BoundParams(27, 1, n0=3, m0=23))
    assert v.regime == "main" and v.value > 0
    assert strassen_like_par_bound(BoundParams(16, 4, P=128)).value == Fraction(4, 128)


def test_count_z_examples():
    assert count_Z(BoundParams(2, 1)) == 4
    assert count_Z(BoundParams(4, 1)) == 28
    assert count_Z(BoundParams(8, 1)) == 196
    assert sub_cdag_level(8, 1) == 2
    with pytest.raises(BoundError):
        count_Z(BoundParams(2, 4))


@pytest.mark.parametrize("n,M", [(4, 1), (8, 1), (8, 4), (16, 4)])
def test_count_z_matches_family(n, M):
    from pebblelab.builders import build_strassen
    fam = build_strassen(n)[1].family(sub_cdag_level(n, M))
    assert len(fam.members) * 4 * M == count_Z(BoundParams(n, M))


@given(st.integers(0, 6), st.integers(0, 4))
def test_seq_bound_is_q_times_m(k, r):
    M = 4 ** r
    n = 2 * math.isqrt(M) * 2 ** k
    q = Fraction(count_Z(BoundParams(n, M)), 4 * M)
    assert strassen_seq_bound(BoundParams(n, M)).value == generic_qM_bound(BoundParams(n, M, q=int(q))).value


@given(st.integers(0, 5), st.integers(0, 4))
def test_monotone_in_n(k, r):
    M = 4 ** r
    n = 2 * math.isqrt(M) * 2 ** k
    assert strassen_seq_bound(BoundParams(2 * n, M)).value >= strassen_seq_bound(BoundParams(n, M)).value


@given(st.integers(1, 10**6), st.integers(1, 10**4))
def test_values_nonnegative(n, M):
    p = BoundParams(n, M)
    assert float(strassen_like_bound(p).value) >= 0
