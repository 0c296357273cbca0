import itertools
import math

import pytest
from hypothesis import given, strategies as st

from orthofield.lattice import (
    DimensionMismatch,
    LatticeIndex,
    Rectangle,
    compositions,
    count_compositions,
    count_compositions_brute,
    dyadic_block,
    leq,
    min_index,
    volume,
)


def test_leq_examples():
    assert leq((1, 2), (2, 2))
    assert not leq((2, 1), (1, 2))
    assert leq((3, -1), (3, -1))


def test_leq_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        leq((1, 2), (1, 2, 3))


def test_min_index_examples():
    assert min_index((1, 5), (3, 2)) == LatticeIndex((1, 2))
    assert min_index((4, 4), (4, 4)) == LatticeIndex((4, 4))
    assert min_index((0, 0), (-1, 4)) == LatticeIndex((-1, 0))


def test_volume_examples():
    assert volume((2, 3)) == 6
    assert volume((1, 1, 1)) == 1
    block = dyadic_block((1, 2))
    assert block == LatticeIndex((2, 4))
    assert volume(block) == 8
    with pytest.raises(ValueError):
        volume((0, 2))


def test_count_compositions_examples():
    assert count_compositions(3, 2) == 4
    assert count_compositions(2, 3) == 6
    for k in range(8):
        assert count_compositions(k, 1) == 1


def test_count_compositions_matches_brute_force():
    for d in range(1, 5):
        for k in range(13):
            assert count_compositions(k, d) == count_compositions_brute(k, d)
            assert len(list(compositions(k, d))) == count_compositions(k, d)


def test_count_compositions_polynomial_growth():
    for d in range(1, 5):
        for k in range(1, 40):
            assert count_compositions(k, d) <= (k + 1) ** (d - 1)


def test_rectangle_iteration_is_lexicographic_and_complete():
    rect = Rectangle((1, 1), (2, 3))
    visited = [i.coords for i in rect]
    assert visited == sorted(visited)
    assert len(visited) == len(set(visited)) == rect.volume == 6
    assert (2, 3) in [v for v in visited]


def test_rectangle_rejects_bad_input():
    with pytest.raises(ValueError):
        Rectangle((2, 2), (1, 3))
    with pytest.raises(ValueError):
        Rectangle((0, 1), (2, 2))


small_ints = st.integers(min_value=-6, max_value=6)


def indices(d):
    return st.lists(small_ints, min_size=d, max_size=d).map(LatticeIndex)


@given(st.integers(1, 4).flatmap(lambda d: st.tuples(indices(d), indices(d), indices(d))))
def test_partial_order_axioms(triple):
    i, j, k = triple
    assert leq(i, i)
    if leq(i, j) and leq(j, i):
        assert i == j
    if leq(i, j) and leq(j, k):
        assert leq(i, k)


@given(st.integers(1, 4).flatmap(lambda d: st.tuples(indices(d), indices(d), indices(d))))
def test_min_is_greatest_lower_bound(triple):
    i, j, k = triple
    m = min_index(i, j)
    assert leq(m, i) and leq(m, j)
    if leq(k, i) and leq(k, j):
        assert leq(k, m)


@given(
    st.lists(st.integers(1, 5), min_size=1, max_size=3),
    st.lists(st.integers(1, 5), min_size=1, max_size=3),
)
def test_volume_multiplicative_under_concatenation(a, b):
    assert volume(a + b) == volume(a) * volume(b)


@given(st.lists(st.integers(1, 4), min_size=1, max_size=3))
def test_rectangle_visits_each_index_once(upper):
    rect = Rectangle(upper)
    seen = [i.coords for i in rect]
    assert len(seen) == len(set(seen)) == math.prod(upper)
    expected = set(itertools.product(*[range(1, u + 1) for u in upper]))
    assert set(seen) == expected
