import numpy as np
import pytest
from gmpy2 import mpq
from hypothesis import given, settings, strategies as st

from brute import conditional
from spincount import cidiag as D
from spincount import generators as gen
from spincount import oracle as O
from spincount.errors import UsageError
from spincount.model import Pinning, SpinModel, coloring, ising, list_coloring

P = Pinning.from_dict


def proper(model, X):
    return all(X[u] != X[v] for u, v in model.graph.edges) and all(model.A_V[v][X[v]] for v in range(model.n))


# presets -----------------------------------------------------------------------

def test_presets():
    assert "vigoda2000" in D.preset_names()
    fp = D.flip_preset("vigoda2000")
    assert fp.p[0] == 1 and fp.p[1] == pytest.approx(13 / 42)
    assert fp.prob(2) == pytest.approx(13 / 84)
    assert fp.prob(0) == 0 and fp.prob(7) == 0
    assert fp.citation
    with pytest.raises(UsageError):
        D.flip_preset("nope")
    with pytest.raises(UsageError):
        D.FlipParams((1.5,))


# Kempe components and moves ---------------------------------------------------------

def test_kempe_examples():
    m = coloring(gen.path(3), 3)
    X = (0, 1, 0)
    assert D.kempe_component(m, X, 0, 1) == {0, 1, 2}
    assert D.kempe_component(m, X, 0, 2) == {0}
    assert D.kempe_component(m, X, 0, 0) == frozenset()
    # the chain stops at a third colour
    assert D.kempe_component(m, (0, 2, 0), 0, 1) == {0}


def test_flip_with_zero_probability_is_identity():
    m = coloring(gen.cycle(5), 4)
    fp = D.FlipParams((0,) * 6)
    X = (0, 1, 0, 1, 2)
    for v in range(5):
        for c in range(4):
            assert D.flip_move(m, X, fp, v, c, 0.0) == X


def test_flip_swaps_component():
    m = coloring(gen.path(3), 3)
    fp = D.flip_preset("vigoda2000")
    assert D.flip_move(m, (0, 1, 0), fp, 0, 1, 0.0) == (1, 0, 1)
    # r above p_3 / 3 keeps the state
    assert D.flip_move(m, (0, 1, 0), fp, 0, 1, 0.99) == (0, 1, 0)


def test_flip_blocked_by_list():
    m = list_coloring(gen.path(2), 3, [[0, 1], [1, 2]])
    fp = D.flip_preset("vigoda2000")
    # {0, 1} swaps 0 <-> 1, but vertex 1 cannot take colour 0
    assert D.flip_move(m, (0, 1), fp, 0, 1, 0.0) == (0, 1)


def test_flip_preserves_properness():
    m = coloring(gen.cycle(5), 4)
    fp = D.flip_preset("vigoda2000")
    state = D.ChainState.seeded((0, 1, 0, 1, 2), 7)
    for _ in range(2000):
        state = D.flip_step(m, state, fp)
        assert proper(m, state.X)


def test_compiled_flip_run_matches_python_semantics():
    m = coloring(gen.complete(3), 3)
    fp = D.flip_preset("vigoda2000")
    X, counts = D.flip_run(m, (0, 1, 2), fp, 5000, seed=3)
    assert counts.sum() == 5000
    for code in np.nonzero(counts)[0]:
        assert proper(m, D.decode_state(int(code), 3, 3))
    assert proper(m, X)
    again = D.flip_run(m, (0, 1, 2), fp, 5000, seed=3)
    assert again[0] == X and (again[1] == counts).all()


@given(st.lists(st.integers(0, 4), min_size=1, max_size=6))
def test_state_code_round_trip(X):
    assert D.decode_state(D.encode_state(X, 5), len(X), 5) == tuple(X)


def test_glauber_move_changes_one_vertex():
    m = coloring(gen.cycle(5), 4)
    X = (0, 1, 0, 1, 2)
    rng = np.random.default_rng(0)
    for _ in range(200):
        v = int(rng.integers(5))
        Y = D.glauber_move(m, X, v, float(rng.random()))
        assert all(Y[w] == X[w] for w in range(5) if w != v)
        assert proper(m, Y)


def test_local_conditional_matches_brute():
    m = SpinModel(gen.path(3), 2, [[2, 1], [1, 3]], [[1, 1], [1, 2], [1, 1]])
    X = (1, 0, 0)
    w = D.local_conditional(m, X, 1)
    z = sum(w)
    ref = {}
    for x, p in conditional(m, P(3, {0: 1, 2: 0})).items():
        ref[x[1]] = ref.get(x[1], 0) + p
    assert [a / z for a in w] == [ref[0], ref[1]]


def test_coupled_step_with_equal_models_agrees():
    m = coloring(gen.cycle(6), 5)
    fp = D.flip_preset("vigoda2000")
    rng = np.random.default_rng(1)
    X = (0, 1, 2, 0, 1, 2)
    for chain in D.CHAINS:
        for _ in range(100):
            a, b = D.coupled_step_disagreement(m, m, X, chain, fp, rng)
            assert a == b


def test_coupled_flip_disagreement_is_bounded():
    g = gen.cycle(6)
    mp = list_coloring(g, 4, [[0, 1, 2, 3]] * 6)
    mq = list_coloring(g, 4, [[0, 1, 2]] + [[0, 1, 2, 3]] * 5)
    fp = D.flip_preset("vigoda2000")
    rng = np.random.default_rng(2)
    X = (0, 1, 0, 1, 0, 1)
    for _ in range(300):
        a, b = D.coupled_step_disagreement(mp, mq, X, "flip", fp, rng, v=0)
        assert sum(x != y for x, y in zip(a, b)) <= 2 * D.MAX_FLIP


def test_coupled_step_rejects_mismatch():
    with pytest.raises(UsageError):
        D.coupled_step_disagreement(coloring(gen.path(3), 3), coloring(gen.path(3), 4), (0, 1, 0), "glauber")
    with pytest.raises(UsageError):
        D.coupled_step_disagreement(coloring(gen.path(3), 3), coloring(gen.path(3), 3), (0, 1, 0), "flip")


# Dobrushin --------------------------------------------------------------------

def test_dobrushin_edgeless():
    rep = D.dobrushin_matrix(coloring(gen.empty(3), 3))
    assert rep.norm == 0
    assert rep.as_record()["entries"] == []


def test_dobrushin_two_vertex_ising():
    a = mpq(3)
    m = ising(gen.path(2), coupling=a, field_weight=1)
    rep = D.dobrushin_matrix(m)
    # conditional at v is proportional to row A_E[x_u]; brute TV of the two rows
    rows = [[m.A_E[c][k] for k in range(2)] for c in range(2)]
    p0 = [x / sum(rows[0]) for x in rows[0]]
    p1 = [x / sum(rows[1]) for x in rows[1]]
    tv = sum(abs(x - y) for x, y in zip(p0, p1)) / 2
    assert rep.matrix[0][1] == tv == rep.matrix[1][0]
    assert tv == mpq(1, 2)
    assert rep.norm == tv


def test_dobrushin_local_matches_literal():
    m = SpinModel(gen.cycle(4), 3, [[mpq(1, 2), 1, 1], [1, mpq(1, 2), 1], [1, 1, mpq(1, 2)]], [1, 1, 1])
    assert D.dobrushin_matrix(m).matrix == D.dobrushin_matrix(m, literal=True).matrix


# influence --------------------------------------------------------------------

def test_influence_profile_and_decay_bound():
    m = coloring(gen.path(4), 3)
    s, t = P(4, {0: 0}), P(4, {0: 1})
    prof = D.influence_profile(m, s, t, 0, 4)
    assert prof.values == [O.total_influence(m, s, t, 0, ell) for ell in range(1, 5)]
    assert prof.values[3] == 0  # empty sphere
    assert D.decay_bound(1, 2) == 1
    assert D.decay_bound(0, 5) == 0
    assert D.decay_bound(1.0, 3) == 0.5


# contraction and CI -------------------------------------------------------------

def test_contraction_zero_trials():
    rep = D.contraction_estimate(coloring(gen.path(3), 3), "glauber", trials=0)
    assert rep.factor is None and rep.mean_distance == []


def test_contraction_seeded_determinism():
    m = SpinModel(gen.cycle(5), 3, [[mpq(1, 2), 1, 1], [1, mpq(1, 2), 1], [1, 1, mpq(1, 2)]], [1, 1, 1])
    a = D.contraction_estimate(m, "glauber", trials=50, steps=20, seed=11)
    b = D.contraction_estimate(m, "glauber", trials=50, steps=20, seed=11)
    assert a.as_record() == b.as_record()
    assert a.mean_distance[0] == 1
    fp = D.flip_preset("vigoda2000")
    c = D.contraction_estimate(coloring(gen.cycle(5), 5), "flip", fp, trials=30, steps=10, seed=4)
    d = D.contraction_estimate(coloring(gen.cycle(5), 5), "flip", fp, trials=30, steps=10, seed=4)
    assert c.mean_distance == d.mean_distance


def test_contraction_flip_needs_params():
    with pytest.raises(UsageError):
        D.contraction_estimate(coloring(gen.path(3), 3), "flip", trials=1)
    with pytest.raises(UsageError):
        D.contraction_estimate(coloring(gen.path(3), 3), "walk")


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_initial_pair_differs_once(seed):
    m = coloring(gen.cycle(5), 4)
    X, Y = D.initial_pair(m, np.random.default_rng(seed))
    assert proper(m, X) and proper(m, Y)
    assert sum(x != y for x, y in zip(X, Y)) == 1


def test_ci_estimates():
    m = coloring(gen.path(3), 3)
    s = P(3, {0: 0})
    assert D.ci_estimate(m, s, s).value == 0
    assert D.ci_estimate(m, s, s, "mc").value == 0
    t = P(3, {0: 1})
    ex = D.ci_estimate(m, s, t)
    assert ex.value == O.exact_w1_hamming(m, s, t) and not ex.heuristic
    mc = D.ci_estimate(m, s, t, "mc", trials=100, samples=20, seed=5)
    assert mc.heuristic and mc.value > 0
    assert mc.as_record()["method"] == "mc"
    with pytest.raises(UsageError):
        D.ci_estimate(m, s, t, "guess")
    with pytest.raises(UsageError):
        D.ci_estimate(m, P(3, {0: 0, 2: 0}), P(3, {0: 1, 2: 1}))
