from fractions import Fraction

import pytest
from gmpy2 import mpq
from hypothesis import given, settings, strategies as st

from brute import marginal
from grid import grid
from spincount import generators as gen
from spincount import oracle as O
from spincount.errors import SizeError, UsageError
from spincount.estimator import (ErrorSchedule, ParamSet, delta_rate, depth_for, estimate_partition,
                                 marginal_from_ratios, measure_delta_global, measured_params,
                                 recursive_estimator, region_params, select_R)
from spincount.model import Pinning, SpinModel, coloring, list_coloring

P = Pinning.from_dict


def _params(model, R):
    b = O.measured_marginal_bound(model)
    return ParamSet(R=R, eta=measure_delta_global(model, R) / b, b=b)


# schedule and selection ------------------------------------------------------

def test_delta_rate_values():
    assert delta_rate(1, 2) == 1
    assert delta_rate(1, 3) == mpq(1, 2)
    assert delta_rate(mpq(1, 2), 1) == mpq(1, 2)
    with pytest.raises(UsageError):
        delta_rate(0, 1)


@given(st.integers(1, 6), st.integers(1, 60))
def test_delta_rate_nonincreasing(C, R):
    assert delta_rate(C, R + 1) <= delta_rate(C, R)


def test_select_r_example():
    R, eta = select_R(1, mpq(1, 2), 3)
    assert R == 29 and eta == mpq(1, 8192)
    # the chosen R is the first one meeting the inequality
    with pytest.raises(SizeError):
        select_R(1, mpq(1, 2), 3, R_max=28)


def test_select_r_monotone_in_b():
    Rs = [select_R(1, mpq(1, d), 3)[0] for d in (2, 3, 4, 6)]
    assert Rs == sorted(Rs)


def test_select_r_rejects_bad_input():
    with pytest.raises(UsageError):
        select_R(1, mpq(3, 2), 3)
    with pytest.raises(UsageError):
        select_R(1, mpq(1, 2), 0)


def test_error_schedule():
    s = ErrorSchedule(mpq(1, 4))
    assert s(0) == 4 and s(1) == 1 and s(3) == mpq(1, 4)
    assert s.margin(2) == 3
    assert ErrorSchedule(0.25)(2) == 0.5
    with pytest.raises(UsageError):
        s(-1)


def test_depth_for():
    assert depth_for(4, mpq(1, 10)) == 7
    assert depth_for(1, mpq(1, 2)) == 2


def test_param_set_validation():
    with pytest.raises(UsageError):
        ParamSet(R=0, eta=1, b=mpq(1, 2))
    with pytest.raises(UsageError):
        ParamSet(R=1, eta=1, b=1)
    with pytest.raises(UsageError):
        ParamSet(R=1, eta=-1, b=mpq(1, 2))
    with pytest.raises(UsageError):
        ParamSet(R=1, eta=1, b=mpq(1, 2), mode="guess")


def test_measured_params_path():
    p = measured_params(coloring(gen.path(4), 3))
    assert p.guarantee_valid and p.b == mpq(1, 4)
    assert 30 * p.delta < p.b ** 4


# ratio recursion -------------------------------------------------------------

def test_depth_zero_returns_one():
    m = coloring(gen.path(3), 3)
    assert recursive_estimator(m, P(3, {0: 0}), P(3, {0: 1}), 0, 0, _params(m, 1)) == 1


def test_fully_pinned_sphere_is_exact():
    m = SpinModel(gen.path(3), 2, [[2, 1], [1, 3]], [[1, 1], [1, 2], [1, 1]])
    s = P(3, {0: 0, 2: 1})
    t = P(3, {0: 1, 2: 1})
    # the radius-2 sphere around vertex 0 is {2}, which is pinned
    res = recursive_estimator(m, s, t, 3, 0, _params(m, 2), details=True)
    assert res.value == O.exact_ratio(m, s, t)
    assert res.stats["brute_force"] == 1 and res.stats["lp_calls"] == 0


def test_bad_discrepancy_rejected():
    m = coloring(gen.path(3), 3)
    with pytest.raises(UsageError):
        recursive_estimator(m, P(3, {0: 0}), P(3, {0: 1}), 1, 2, _params(m, 1))
    with pytest.raises(UsageError):
        recursive_estimator(m, P(3, {0: 0}), P(3, {0: 1}), -1, 0, _params(m, 1))


def _small_grid_instance():
    inst = grid()[5]
    assert inst.name.startswith("col2-") and inst.R == 2
    return inst, region_params(inst.model, inst.base, inst.region, inst.R)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_grid_instance_within_schedule(k):
    inst, p = _small_grid_instance()
    assert p.guarantee_valid
    s, t = inst.pairs()[0]
    r = O.exact_ratio(inst.model, s, t)
    res = recursive_estimator(inst.model, s, t, k, inst.u, p, details=True)
    assert abs(res.value / r - 1) <= ErrorSchedule(p.b)(k)
    assert res.stats["lp_calls"] > 0


def test_memo_does_not_change_value():
    inst, p = _small_grid_instance()
    s, t = inst.pairs()[1]
    a = recursive_estimator(inst.model, s, t, 3, inst.u, p, details=True)
    b = recursive_estimator(inst.model, s, t, 3, inst.u, p, memo=False, details=True)
    assert a.value == b.value
    assert b.stats["memo_hits"] == 0 and b.stats["calls"] >= a.stats["calls"]


def test_deterministic():
    inst, p = _small_grid_instance()
    s, t = inst.pairs()[0]
    vals = {recursive_estimator(inst.model, s, t, 2, inst.u, p) for _ in range(3)}
    assert len(vals) == 1


def test_p5_centre_ratio():
    m = coloring(gen.path(5), 7)
    s, t = P(5, {2: 0}), P(5, {2: 1})
    v = recursive_estimator(m, s, t, 3, 2, _params(m, 1))
    assert abs(v / O.exact_ratio(m, s, t) - 1) <= mpq(1, 4)


# marginals and counting ------------------------------------------------------

def test_marginal_single_support():
    m = list_coloring(gen.path(2), 3, [[0, 1], [0, 1, 2]])
    mu = marginal_from_ratios(m, P(2, {1: 1}), 0, 2, _params(m, 1))
    assert list(mu.probs) == [1, 0, 0]


def test_marginal_rejects_pinned_vertex():
    m = coloring(gen.path(2), 3)
    with pytest.raises(UsageError):
        marginal_from_ratios(m, P(2, {0: 1}), 0, 2, _params(m, 1))


def test_marginal_matches_brute_when_exact():
    m = SpinModel(gen.path(3), 2, [[2, 1], [1, 3]], [[1, 1], [1, 2], [1, 1]])
    pin = P(3, {1: 1})
    mu = marginal_from_ratios(m, pin, 0, 3, _params(m, 1))
    ref = marginal(m, pin, 0)
    assert [Fraction(int(x.numerator), int(x.denominator)) for x in mu.probs] == ref


def test_marginal_sums_to_one():
    inst, p = _small_grid_instance()
    mu = marginal_from_ratios(inst.model, inst.base, inst.u, 2, p)
    assert sum(mu.probs) == 1


@pytest.mark.parametrize("model,Z", [
    (coloring(gen.path(4), 3), 24),
    (coloring(gen.complete(3), 5), 60),
    (list_coloring(gen.path(3), 3, [[0, 1], [0, 1, 2], [1, 2]]), 5),
])
def test_estimate_partition(model, Z):
    p = measured_params(model)
    assert p.guarantee_valid
    est = estimate_partition(model, mpq(1, 10), p)
    assert Z * mpq(9, 10) <= est <= Z * mpq(11, 10)


def test_estimate_partition_measured_mode_and_record():
    m = coloring(gen.path(4), 3)
    p = measured_params(m)
    res = estimate_partition(m, mpq(1, 10), p, details=True)
    assert abs(res.value / 24 - 1) <= mpq(1, 10)
    rec = res.as_record()
    assert rec["mode"] == "measured" and rec["guarantee_valid"] is True
    assert rec["k"] == depth_for(4, mpq(1, 10))


def test_estimate_partition_bad_eps():
    m = coloring(gen.path(2), 3)
    with pytest.raises(UsageError):
        estimate_partition(m, 0, _params(m, 1))
    with pytest.raises(UsageError):
        estimate_partition(m, 1, _params(m, 1))


@settings(max_examples=15, deadline=None)
@given(st.integers(2, 6), st.integers(3, 5))
def test_estimate_partition_on_paths(n, q):
    m = coloring(gen.path(n), q)
    est = estimate_partition(m, mpq(1, 10), measured_params(m))
    Z = q * (q - 1) ** (n - 1)
    assert abs(est / Z - 1) <= mpq(1, 10)
