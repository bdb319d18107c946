import pytest
from gmpy2 import mpq
from hypothesis import given, settings, strategies as st

from spincount import generators as gen
from spincount.errors import UsageError, ValidationError
from spincount.model import (Graph, Pinning, SpinModel, ball, coloring, conditional_weight, extend,
                             greedy_configuration, hardcore, ising, is_permissive_exhaustive,
                             list_coloring, pinned_weight, sphere, support, weight)

from brute import marginal


def test_graph_basics():
    g = Graph(4, [(0, 1), (1, 2), (2, 3)])
    assert g.max_degree == 2
    assert g.degree(0) == 1 and g.has_edge(2, 1)
    assert g.distance(0, 3) == 3 and g.diameter() == 3
    assert g.is_connected()
    assert not Graph(3, [(0, 1)]).is_connected()


@pytest.mark.parametrize("edges", [[(0, 0)], [(0, 1), (1, 0)], [(0, 5)]])
def test_graph_rejects_non_simple(edges):
    with pytest.raises(ValidationError):
        Graph(3, edges)


def test_weight_examples():
    k3 = coloring(gen.complete(3), 3)
    assert weight(k3, (0, 1, 2)) == 1
    assert weight(coloring(gen.path(2), 3), (1, 1)) == 0
    hc = hardcore(gen.path(2), 2)
    assert weight(hc, (0, 0)) == 1
    assert weight(hc, (1, 0)) == 2
    assert weight(hc, (1, 1)) == 0


def test_conditional_weight_examples():
    m = coloring(gen.path(3), 3)
    pin = Pinning.from_dict(3, {0: 0, 2: 0})
    assert conditional_weight(m, pin, (0, 1, 0)) == 1
    # the monochromatic pinned edge is internal to the pinning and ignored
    bad = Pinning.from_dict(3, {0: 0, 1: 0})
    assert conditional_weight(m, bad, (0, 0, 1)) == 1
    assert pinned_weight(m, bad) == 0
    assert conditional_weight(m, pin, (1, 1, 0)) == 0


def test_support_examples():
    edge = coloring(gen.path(2), 3)
    assert support(edge, Pinning.from_dict(2, {0: 0}), 1) == (1, 2)
    assert support(coloring(gen.empty(1), 3), Pinning.empty(1), 0) == (0, 1, 2)
    lc = list_coloring(gen.path(2), 3, [[0, 1], [0, 1, 2]])
    assert support(lc, Pinning.from_dict(2, {1: 1}), 0) == (0,)
    with pytest.raises(UsageError):
        support(edge, Pinning.from_dict(2, {0: 0}), 0)


def test_extend_is_pure_and_allows_infeasible():
    p0 = Pinning.empty(3)
    h = hash(p0)
    p1 = extend(p0, 1, 2)
    assert p1.as_dict() == {1: 2} and p0.as_dict() == {} and hash(p0) == h
    p2 = Pinning.from_dict(3, {0: 0}).extend(1, 0)
    assert p2.as_dict() == {0: 0, 1: 0}
    with pytest.raises(UsageError):
        p1.extend(1, 0)


def test_pinning_accessors():
    p = Pinning.from_dict(4, {1: 2, 3: 0})
    assert p.domain == frozenset({1, 3}) and p.free() == [0, 2]
    assert 1 in p and 0 not in p and p[1] == 2
    assert p.differences(p.assign(1, 0)) == [1]
    assert p.unpin(1).domain == frozenset({3})
    with pytest.raises(UsageError):
        Pinning.from_dict(2, {5: 0})


def test_sphere_ball_examples():
    g = gen.path(3)
    assert sphere(g, 1, 1) == {0, 2}
    assert sphere(g, 1, 0) == {1} and ball(g, 1, 0) == {1}
    assert ball(g, 0, 5) == {0, 1, 2}


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 9), st.integers(0, 1000), st.integers(0, 4))
def test_sphere_is_ball_difference(n, seed, ell):
    g = gen.random_bounded_degree(n, 3, seed)
    for v in range(n):
        if ell >= 1:
            assert sphere(g, v, ell) == ball(g, v, ell) - ball(g, v, ell - 1)


def test_permissiveness_examples():
    for seed in range(3):
        g = gen.random_bounded_degree(7, 3, seed)
        assert is_permissive_exhaustive(coloring(g, 4))
        assert is_permissive_exhaustive(hardcore(g, 1))
    assert not is_permissive_exhaustive(coloring(gen.complete(3), 2))
    assert not is_permissive_exhaustive(coloring(gen.complete(3), 2), literal=True)
    assert is_permissive_exhaustive(coloring(gen.path(3), 3), literal=True)


def test_weight_equals_empty_conditional_weight():
    m = ising(gen.cycle(4), coupling=mpq(3, 2), field_weight=mpq(2))
    from itertools import product
    for x in product(range(2), repeat=4):
        assert weight(m, x) == conditional_weight(m, Pinning.empty(4), x)


@settings(max_examples=25, deadline=None)
@given(st.integers(3, 6), st.integers(0, 10 ** 6), st.data())
def test_local_support_matches_brute_force(n, seed, data):
    g = gen.random_bounded_degree(n, 3, seed)
    q = g.max_degree + 1 if g.max_degree >= 2 else 3
    m = coloring(g, q)
    vals = data.draw(st.lists(st.integers(-1, q - 1), min_size=n, max_size=n))
    pin = Pinning(vals)
    if not pinned_weight(m, pin) or not pin.free():
        return
    v = pin.free()[0]
    probs = marginal(m, pin, v)
    assert set(support(m, pin, v)) == {c for c in range(q) if probs[c] > 0}


def test_model_validation():
    g = gen.path(2)
    with pytest.raises(ValidationError):
        SpinModel(g, 2, [[1, -1], [-1, 1]], [1, 1])
    with pytest.raises(ValidationError):
        SpinModel(g, 2, [[1, 2], [3, 1]], [1, 1])
    with pytest.raises(ValidationError):
        SpinModel(g, 1, [[1]], [1])
    m = SpinModel(g, 2, [["1/2", 1], [1, "1/2"]], [1, 1])
    assert m.exact and m.A_E[0][0] == mpq(1, 2)
    assert not ising(g, 0.2).exact


def test_greedy_configuration():
    m = coloring(gen.cycle(5), 3)
    x = greedy_configuration(m)
    assert weight(m, x) == 1
    assert x == greedy_configuration(m)
