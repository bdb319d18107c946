import random

import pytest
from gmpy2 import mpq

from spincount import generators as gen
from spincount import lpcert as L
from spincount import oracle as O
from spincount.arith import harmonic
from spincount.couptree import build_tree
from spincount.errors import UsageError
from spincount.estimator import measure_delta_global
from spincount.model import Pinning, SpinModel, coloring, list_coloring

P = Pinning.from_dict


def exact_leaf_ratios(tree):
    return {w.index: O.exact_ratio(tree.model, w.sigma, w.tau) for w in tree.nodes if w.is_leaf}


def single_node():
    m = SpinModel(gen.path(2), 3, [[1, 2, 1], [2, 1, 1], [1, 1, 1]], [1, 1, 1])
    return build_tree(m, P(2, {0: 0, 1: 1}), P(2, {0: 2, 1: 1}), 0, 1)


def five_node():
    m = list_coloring(gen.path(2), 4, [[0, 1], [2, 3]])
    return build_tree(m, P(2, {0: 0}), P(2, {0: 1}), 0, 1)


def test_single_node_feasible_iff_ratio_in_bracket():
    tr = single_node()
    rat = exact_leaf_ratios(tr)
    r = rat[0]
    assert r == 2
    lp = L.build_lp(tr, rat, r, r, 0, 1)
    assert lp.num_vars == 2 and L.feasible(lp)
    assert not L.feasible(L.build_lp(tr, rat, mpq(1, 2), mpq(3, 2), 0, 1))
    assert not L.check(tr, rat, mpq(5, 2), 3, 0, 1)
    assert L.check(tr, rat, 1, 3, 0, 1, method="tree")


def test_five_node_lp_shape():
    tr = five_node()
    lp = L.build_lp(tr, exact_leaf_ratios(tr), 1, 1, 0, 1)
    assert lp.num_vars == 10
    fam = [c.family for c in lp.constraints]
    assert fam.count("validity") == 2
    assert sum(1 for c in lp.constraints if c.name.startswith("rx")) == 2
    assert sum(1 for c in lp.constraints if c.name.startswith("ry")) == 2
    assert fam.count("overflow") == 2 and fam.count("leaf") == 8


def test_missing_ratio_and_bad_parameters():
    tr = five_node()
    with pytest.raises(UsageError):
        L.build_lp(tr, {}, 1, 1, 0, 1)
    rat = exact_leaf_ratios(tr)
    with pytest.raises(UsageError):
        L.build_lp(tr, rat, 2, 1, 0, 1)
    with pytest.raises(UsageError):
        L.build_lp(tr, rat, 1, 1, 0, 0)


def test_validity_only_relaxation_is_feasible():
    from spincount.simplex import solve
    lp = L.build_lp(five_node(), exact_leaf_ratios(five_node()), 1, 1, 0, 1)
    val = [c for c in lp.constraints if c.family == "validity"]
    rows = [c.coeffs for c in val]
    assert solve(lp.num_vars, rows, [c.sense for c in val], [c.rhs for c in val]).status == "optimal"


def _instances():
    out = []
    for seed in range(3):
        g = gen.random_bounded_degree(6, 3, seed)
        m = coloring(g, 5)
        w = g.adj[0][0]
        out.append((m, P(6, {0: 0, w: 2}), P(6, {0: 1, w: 2}), 0))
    m = SpinModel(gen.cycle(5), 3, [[mpq(1, 2), 1, 1], [1, mpq(1, 2), 1], [1, 1, mpq(1, 2)]], [1, 1, 1])
    out.append((m, P(5, {0: 0, 3: 1}), P(5, {0: 2, 3: 1}), 0))
    m = SpinModel(gen.path(3), 3, [[mpq(1, 3), 1, 1], [1, mpq(1, 3), 1], [1, 1, mpq(1, 3)]], [1, 1, 1])
    out.append((m, P(3, {0: 0}), P(3, {0: 1}), 0))
    m = list_coloring(gen.path(3), 4, [[0, 1], [0, 2, 3], [1, 2, 3]])
    out.append((m, P(3, {0: 0}), P(3, {0: 1}), 0))
    return out


def _satisfies(lp, x, y):
    vals = {}
    for w in lp.tree.nodes:
        vals[lp.x(w)], vals[lp.y(w)] = x[w.index], y[w.index]
    for c in lp.constraints:
        lhs = sum(a * vals[j] for j, a in c.coeffs.items())
        if not {"==": lhs == c.rhs, "<=": lhs <= c.rhs, ">=": lhs >= c.rhs}[c.sense]:
            return False
    return True


@pytest.mark.parametrize("idx", range(4))
def test_witness_solution_is_feasible(idx):
    m, s, t, u = _instances()[idx]
    tr = build_tree(m, s, t, u, 1)
    rat = exact_leaf_ratios(tr)
    r = O.exact_ratio(m, s, t)
    z, x, y = L.witness_solution(tr)
    # the smallest eta that the witness's overflow constraints allow
    eta = max((sum(x[c.index] for c in w.children if c.kind == "bad") * w.ell / x[w.index]
               for w in tr.nodes if w.kind == "internal" and x[w.index]), default=mpq(1))
    eta = max(eta, mpq(1, 10 ** 6))
    lp = L.build_lp(tr, rat, r, r, 0, eta)
    assert _satisfies(lp, x, y)
    assert L.feasible(lp, "simplex") and L.feasible(lp, "tree")
    # Gamma sums
    gx, gy = L.gamma_sums(tr, x, y)
    assert sum(gx) == O.pinning_probability(m, s)
    assert sum(gy) == O.pinning_probability(m, t)
    for i in range(1, len(gx)):
        assert gx[i] <= eta / i * sum(gx[:i + 1])
        assert gy[i] <= eta / i * sum(gy[:i + 1])
    assert gx[0] == r * gy[0]
    assert all(gx[i] == r * gy[i] for i in range(1, len(gx)))


@pytest.mark.parametrize("idx", range(6))
def test_literal_and_tree_solvers_agree(idx):
    m, s, t, u = _instances()[idx]
    tr = build_tree(m, s, t, u, 1)
    shared = build_tree(m, s, t, u, 1, share=True)
    rat = exact_leaf_ratios(tr)
    rat_s = exact_leaf_ratios(shared)
    r = O.exact_ratio(m, s, t)
    rng = random.Random(idx)
    for _ in range(8):
        lo = r * mpq(rng.randint(50, 120), 100)
        hi = lo * mpq(rng.randint(100, 150), 100)
        eps = mpq(rng.choice([0, 1, 5]), 100)
        eta = mpq(rng.choice([1, 10, 100]), 100)
        a = L.check(tr, rat, lo, hi, eps, eta, method="tree")
        if tr.size <= L.AUTO_LITERAL_LIMIT:
            assert a == L.check(tr, rat, lo, hi, eps, eta, method="simplex")
        assert a == L.check(shared, rat_s, lo, hi, eps, eta, method="tree")


def test_root_cone_backends_agree():
    m, s, t, u = _instances()[0]
    tr = build_tree(m, s, t, u, 1, share=True)
    rat = exact_leaf_ratios(tr)
    r = O.exact_ratio(m, s, t)
    ex = L.root_cone(tr, rat, r, r * mpq(11, 10), mpq(1, 20), mpq(1, 2), exact=True)
    hi = L.root_cone(tr, rat, r, r * mpq(11, 10), mpq(1, 20), mpq(1, 2), exact=False, backend="highs")
    assert float(ex[0]) == pytest.approx(hi[0], rel=1e-7)
    assert float(ex[1]) == pytest.approx(hi[1], rel=1e-7)
    assert (ex[0] <= 1 <= ex[1]) == L.check(tr, rat, r, r * mpq(11, 10), mpq(1, 20), mpq(1, 2))
    with pytest.raises(UsageError):
        L.root_cone(tr, rat, r, r, 0, 1, exact=True, backend="highs")


def test_eps_hat_rules():
    b, eta, eps = mpq(1, 2), mpq(1, 10), mpq(1, 100)
    H = harmonic(9)
    assert L.eps_hat(eps, b, eta, 2, 3) == 5 * eta * H * eps / (b * b)
    assert L.eps_hat(eps, b, eta, 2, 3, rule="loop") == eta * H * eps


def test_search_on_single_node_tree():
    tr = single_node()
    rat = exact_leaf_ratios(tr)
    b, eta, eps = mpq(1, 4), mpq(1, 2), mpq(1, 100)
    res = L.marginal_estimator(tr, rat, eps, b, eta, details=True)
    r = mpq(2)
    assert 1 / (1 + res.eps_hat) <= res.value / r <= 1 + res.eps_hat
    assert res.iterations <= L.search_iteration_bound(b, res.eps_hat)


def _measured(m, R):
    b = O.measured_marginal_bound(m)
    return b, measure_delta_global(m, R) / b


def test_search_symmetric_instance():
    m = coloring(gen.star(3), 4)
    tr = build_tree(m, P(4, {0: 0}), P(4, {0: 1}), 0, 1, share=True)
    rat = exact_leaf_ratios(tr)
    b, eta = _measured(m, 1)
    res = L.marginal_estimator(tr, rat, mpq(1, 1000), b, eta, details=True)
    assert 1 / (1 + res.eps_hat) <= res.value <= 1 + res.eps_hat
    assert res.iterations <= L.search_iteration_bound(b, res.eps_hat)
    # determinism
    assert L.marginal_estimator(tr, rat, mpq(1, 1000), b, eta) == res.value


def test_search_on_p5_centre_matches_oracle():
    m = coloring(gen.path(5), 7)
    b, eta = _measured(m, 2)
    s, t = P(5, {2: 0}), P(5, {2: 1})
    tr = build_tree(m, s, t, 2, 2, share=True)
    rat = exact_leaf_ratios(tr)
    r = O.exact_ratio(m, s, t)
    assert L.check(tr, rat, r, r, 0, eta)
    res = L.marginal_estimator(tr, rat, mpq(1, 100), b, eta, 2, 2, details=True)
    assert 1 / (1 + res.eps_hat) <= res.value / r <= 1 + res.eps_hat


def test_search_parameter_checks():
    tr = single_node()
    rat = exact_leaf_ratios(tr)
    with pytest.raises(UsageError):
        L.marginal_estimator(tr, rat, 0, mpq(1, 2), 1)
    with pytest.raises(UsageError):
        L.marginal_estimator(tr, rat, mpq(1, 10), mpq(3, 2), 1)
    with pytest.raises(UsageError):
        L.marginal_estimator(tr, rat, 100, mpq(1, 2), 1)


def test_float_search_matches_exact():
    m = coloring(gen.path(3), 4)
    mf = SpinModel(m.graph, 4, [[float(a) for a in r] for r in m.A_E], [[1.0] * 4] * 3, exact=False)
    s, t = P(3, {0: 0}), P(3, {0: 1})
    te, tf = build_tree(m, s, t, 0, 1), build_tree(mf, s, t, 0, 1)
    re, rf = exact_leaf_ratios(te), exact_leaf_ratios(tf)
    b, eta = _measured(m, 1)
    x = L.marginal_estimator(te, re, mpq(1, 100), b, eta)
    y = L.marginal_estimator(tf, rf, 0.01, float(b), float(eta))
    assert float(x) == pytest.approx(y, rel=1e-6)


def test_dump_lp_format():
    tr = five_node()
    text = L.dump_lp(L.build_lp(tr, exact_leaf_ratios(tr), 1, 1, 0, 1))
    lines = text.splitlines()
    assert lines[2] == "Minimize" and "Subject To" in lines and lines[-1] == "End"
    assert " x_root: + 1.0 x0 = 1.0" in lines
    assert sum(1 for s in lines if s.endswith(">= 0")) == 10
