import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from modedse.pareto import ParetoArchive, crowding_distance, dominates, hypervolume, nondominated_sort

from oracles import brute_force_fronts, grid_hypervolume

small_points = st.lists(st.tuples(*[st.integers(0, 5)] * 3), min_size=1, max_size=8)


def test_dominance_examples():
    assert dominates((1, 1, 1, 1), (2, 2, 2, 2))
    assert not dominates((1, 2, 1, 1), (2, 1, 1, 1)) and not dominates((2, 1, 1, 1), (1, 2, 1, 1))
    assert not dominates((1, 1), (1, 1))


def test_sort_hand_example():
    assert nondominated_sort([(1, 2), (2, 1), (3, 3)]) == [[0, 1], [2]]
    assert nondominated_sort([(1, 1)] * 4) == [[0, 1, 2, 3]]


@settings(max_examples=100)
@given(st.lists(st.tuples(*[st.integers(0, 6)] * 4), min_size=1, max_size=40))
def test_sort_matches_brute_force(points):
    assert [sorted(f) for f in nondominated_sort(points)] == brute_force_fronts(points)


def test_crowding_examples():
    assert crowding_distance([(0, 0), (1, 1)]) == [math.inf, math.inf]
    # three equally spaced on one objective, constant on the other
    d = crowding_distance([(0.0, 5.0), (1.0, 5.0), (2.0, 5.0)])
    assert d[1] == pytest.approx(1.0)
    same = crowding_distance([(1, 1)] * 4)
    assert sum(math.isinf(v) for v in same) == 2 and sorted(same)[:2] == [0.0, 0.0]


@settings(max_examples=150)
@given(small_points)
def test_hypervolume_3d_matches_grid(points):
    assert hypervolume(points, (6, 6, 6)) == grid_hypervolume(points, (6, 6, 6))


@settings(max_examples=60)
@given(st.lists(st.tuples(*[st.integers(0, 4)] * 4), min_size=1, max_size=6))
def test_hypervolume_4d_matches_grid(points):
    assert hypervolume(points, (5, 5, 5, 5)) == grid_hypervolume(points, (5, 5, 5, 5))


def test_hypervolume_2d_and_outside_ref():
    assert hypervolume([(1, 3), (2, 2), (3, 1)], (4, 4)) == 6
    assert hypervolume([(5, 0)], (4, 4)) == 0.0


@given(st.lists(st.tuples(*[st.integers(0, 5)] * 3), max_size=30))
def test_archive_invariants(points):
    a = ParetoArchive()
    hv = 0.0
    for p in points:
        a.add(p)
        assert a.is_mutually_nondominated()
        now = hypervolume(a.vectors(), (6, 6, 6))
        assert now >= hv
        hv = now
    # the archive is exactly the distinct first front
    if points:
        front = {points[i] for i in nondominated_sort(points)[0]}
        assert set(a.vectors()) == front


def test_archive_rejects_equal_vectors():
    a = ParetoArchive()
    assert a.add((1, 2)) and not a.add((1, 2))


def test_archive_capacity():
    a = ParetoArchive(capacity=3)
    for i in range(6):
        a.add((i, 5 - i))
    assert len(a) == 3 and a.is_mutually_nondominated()
