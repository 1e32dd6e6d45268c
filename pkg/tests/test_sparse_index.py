import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hcsolve import sparse_index as si
from hcsolve.exceptions import CapacityError


def brute(d, N, gamma, scale=None, thr=None):
    """Independent float-free enumeration over the (N+1)^d grid."""
    from fractions import Fraction

    thr = Fraction(N) if thr is None else thr
    out = []
    for n in itertools.product(range(N + 1), repeat=d):
        v = [Fraction(k) for k in n]
        if scale is not None:
            v[scale] *= Fraction(3, 2)
        if max(v) == 0:
            out.append(n)
            continue
        mix = math.prod(max(Fraction(1), k) for k in v)
        if gamma == si.FULL_TENSOR:
            ok = max(v) <= thr
        else:
            ok = mix * max(v) ** (-gamma) <= thr ** (1 - gamma)
        if ok:
            out.append(n)
    return out


def test_norms():
    assert si.mix_norm((0, 0, 0)) == 1 and si.inf_norm((0, 0, 0)) == 0
    assert si.mix_norm((1, 2)) == 2 and si.inf_norm((1, 2)) == 2
    assert si.mix_norm((3, 0, 2)) == 6 and si.inf_norm((3, 0, 2)) == 3


def test_build_examples():
    assert si.build(1, 5, -2).tuples() == [(k,) for k in range(6)]
    assert si.build(2, 2, 0).tuples() == [(0, 0), (0, 1), (0, 2), (1, 0), (1, 1), (1, 2), (2, 0), (2, 1)]
    assert len(si.build(2, 2, si.FULL_TENSOR)) == 9


@pytest.mark.parametrize("d,N,gamma", [(2, 6, 0), (2, 7, -1), (3, 6, -2), (3, 5, 0.5), (2, 9, -0.5), (4, 11, -3), (3, 4, si.FULL_TENSOR)])
def test_build_matches_brute_force(d, N, gamma):
    assert si.build(d, N, gamma).tuples() == brute(d, N, gamma)


def test_ex5_cardinality():
    s = si.build(4, 11, -3)
    assert len(s) == len(brute(4, 11, -3)) < 12**4


def test_budget_guard():
    with pytest.raises(CapacityError):
        si.build(3, 10, 0, budget=50)


@pytest.mark.parametrize("d", [1, 2, 3])
@pytest.mark.parametrize("N", [1, 4, 10])
@pytest.mark.parametrize("gamma", [0, -1, -5])
def test_downward_closed_and_nested(d, N, gamma):
    s = si.build(d, N, gamma)
    members = set(s.tuples())
    for n in members:
        for i in range(d):
            if n[i] > 0:
                m = n[:i] + (n[i] - 1,) + n[i + 1:]
                assert m in members
    assert members <= set(si.build(d, N + 1, gamma).tuples())
    assert set(si.order_subset(s)) <= members


@pytest.mark.parametrize("d,N,gamma", [(2, 4, 0), (3, 6, -1), (2, 10, -5), (4, 5, -3)])
def test_sparsity(d, N, gamma):
    assert len(si.build(d, N, gamma)) < (N + 1) ** d


def test_scaling_subset():
    s1 = si.build(1, 6, 0)
    assert si.scaling_subset(s1, 0) == [(k,) for k in range(5)]
    s2 = si.build(2, 2, 0)
    assert si.scaling_subset(s2, 0) == [n for n in brute(2, 2, 0, scale=0) if n in s2]
    for s in (si.build(3, 7, -2), si.build(2, 9, 0.5)):
        for i in range(s.d):
            sub = si.scaling_subset(s, i)
            assert (0,) * s.d in sub
            assert sub == [n for n in brute(s.d, s.N, s.gamma, scale=i) if n in s]


def test_order_subset():
    from fractions import Fraction

    assert si.order_subset(si.build(1, 6, 0)) == [(k,) for k in range(5)]
    s = si.build(2, 3, -1)
    assert si.order_subset(s) == brute(2, 3, -1, thr=Fraction(2, 3) * 3)
    assert si.order_subset(si.build(2, 2, -1))[0] == (0, 0)


def test_dt_subsets():
    s = si.build(2, 3, -1)
    assert si.dt_scaling_subset(s, 1) == [n for n in s.tuples() if n[1] <= 2]
    assert si.dt_order_subset(s) == [n for n in s.tuples() if max(n) <= 2]
    full = si.build(2, 6, si.FULL_TENSOR)
    for i in range(2):
        assert si.dt_scaling_subset(full, i) == si.scaling_subset(full, i)
    assert si.dt_order_subset(full) == si.order_subset(full)
    assert set(si.dt_order_subset(s)) <= set(s.tuples())


def test_position_of():
    s = si.build(3, 5, -1)
    assert s.position_of((0, 0, 0)) == 0
    assert s.position_of((5, 5, 5)) is None
    for k, n in enumerate(s.tuples()):
        assert s.position_of(n) == k
    assert s.tuples() == sorted(s.tuples())


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 3), st.integers(1, 8), st.sampled_from([0.0, -1.0, -2.0, -0.5, 0.3]))
def test_membership_invariant(d, N, gamma):
    s = si.build(d, N, gamma)
    for n in s.tuples():
        if max(n) > 0:
            lhs = math.log(si.mix_norm(n)) - gamma * math.log(si.inf_norm(n))
            assert lhs <= (1 - gamma) * math.log(N) + 1e-12
