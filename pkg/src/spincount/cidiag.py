"""Diagnostics for the structural hypotheses behind the counting algorithm:
exact influence profiles, Dobrushin influence matrices, flip and Glauber
dynamics, one-step disagreement couplings and Monte Carlo contraction and
coupling-independence estimates.

Everything Monte Carlo here is an estimate with a standard error, never a
certified bound. Random numbers come from numpy's PCG64, seeded through
``SeedSequence([seed, trial])`` so aggregates do not depend on scheduling.
"""
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from itertools import product

import numba
import numpy as np

from .arith import format_number, to_exact
from .errors import InitError, NonPermissiveError, SizeError, UsageError
from .model import Pinning, SpinModel, sphere, support
from .oracle import DEFAULT_CAP, exact_marginal, exact_tv, exact_w1_hamming, total_influence

CHAINS = ("flip", "glauber")
MAX_FLIP = 6
Z95 = 1.959963984540054


def _rng(seed: int, trial: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(trial)])))


def _num(x):
    return x if isinstance(x, float) else format_number(x)


# ---------------------------------------------------------------- influence


@dataclass
class InfluenceProfile:
    vertex: int
    values: list  # values[l-1] = total influence at distance l

    def as_record(self) -> dict:
        return {"kind": "influence", "vertex": self.vertex + 1,
                "values": [_num(x) for x in self.values]}


def influence_profile(model: SpinModel, sigma: Pinning, tau: Pinning, v: int, ell_max: int,
                      cap: int = DEFAULT_CAP) -> InfluenceProfile:
    """Exact total influence of the discrepancy at v on each sphere S_l(v),
    l = 1..ell_max. Empty spheres give 0."""
    if ell_max < 0:
        raise UsageError("ell_max must be nonnegative")
    return InfluenceProfile(v, [total_influence(model, sigma, tau, v, ell, cap)
                                for ell in range(1, ell_max + 1)])


def decay_bound(C, ell: int):
    """2C * 2^(-ceil(l / 2C)), the influence envelope implied by C-coupling
    independence. Exact for rational C; C = 0 gives 0."""
    C = to_exact(C) if not isinstance(C, float) else C
    if C <= 0:
        return 0 * C
    k = math.ceil(to_exact(ell) / (2 * to_exact(C)))
    return 2 * C / (2 ** k) if not isinstance(C, float) else 2 * C * 2.0 ** (-k)


# ---------------------------------------------------------------- Dobrushin


@dataclass
class DobrushinReport:
    matrix: list  # matrix[u][v] = influence of u on v
    norm: object

    def as_record(self) -> dict:
        n = len(self.matrix)
        entries = [[u + 1, v + 1, _num(self.matrix[u][v])]
                   for u in range(n) for v in range(n) if self.matrix[u][v]]
        return {"kind": "dobrushin", "n": n, "norm": _num(self.norm), "entries": entries}


def local_conditional(model: SpinModel, x, v: int) -> list:
    """Unnormalised conditional weights at v given the colours x of its
    neighbours (x is indexable by vertex; entries of non-neighbours unused)."""
    out = []
    for c in range(model.q):
        w = model.A_V[v][c]
        for u in model.graph.adj[v]:
            if not w:
                break
            w = w * model.A_E[c][x[u]]
        out.append(w)
    return out


def _normalise(vec):
    z = sum(vec[1:], vec[0])
    if not z:
        return None
    return [a / z for a in vec]


def _tv(p, r):
    return sum((abs(a - b) for a, b in zip(p, r)), 0 * p[0]) / 2


def _entry_local(model, u, v):
    """max TV at v over boundary pairs that differ only at neighbour u."""
    g, q = model.graph, model.q
    others = [w for w in g.adj[v] if w != u]
    best = model.zero
    x = [0] * model.n
    for cols in product(range(q), repeat=len(others)):
        for w, c in zip(others, cols):
            x[w] = c
        dists = []
        for c in range(q):
            x[u] = c
            dists.append(_normalise(local_conditional(model, x, v)))
        for a in range(q):
            for b in range(a + 1, q):
                if dists[a] is not None and dists[b] is not None:
                    t = _tv(dists[a], dists[b])
                    if t > best:
                        best = t
    return best


def _entry_literal(model, u, v, cap):
    """Same entry by enumerating full boundary pinnings of V - {v} and
    asking the oracle for each conditional marginal."""
    n, q = model.n, model.q
    rest = [w for w in range(n) if w not in (u, v)]
    if q ** (len(rest) + 1) > cap:
        raise SizeError("literal Dobrushin enumeration exceeds cap")
    best = model.zero
    for cols in product(range(q), repeat=len(rest)):
        vals = [-1] * n
        for w, c in zip(rest, cols):
            vals[w] = c
        dists = []
        for c in range(q):
            vals[u] = c
            try:
                dists.append(exact_marginal(model, Pinning(vals), v).probs)
            except NonPermissiveError:
                dists.append(None)
        for a in range(q):
            for b in range(a + 1, q):
                if dists[a] is not None and dists[b] is not None:
                    t = exact_tv(dists[a], dists[b])
                    if t > best:
                        best = t
    return best


def dobrushin_matrix(model: SpinModel, literal: bool = False, cap: int = DEFAULT_CAP) -> DobrushinReport:
    """Influence matrix rho[u][v] and its norm max_u sum_v rho[u][v].

    Entries only depend on the colours of N(v), so by default only those are
    enumerated; non-adjacent pairs are 0. ``literal=True`` enumerates whole
    boundary pinnings instead (slow, for cross-checking).
    """
    g, q = model.graph, model.q
    n = model.n
    if not literal and sum(q ** g.degree(v) for v in range(n)) * q > cap:
        raise SizeError("Dobrushin enumeration exceeds cap")
    rho = [[model.zero] * n for _ in range(n)]
    for v in range(n):
        for u in range(n):
            if u == v:
                continue
            if literal:
                rho[u][v] = _entry_literal(model, u, v, cap)
            elif g.has_edge(u, v):
                rho[u][v] = _entry_local(model, u, v)
    norm = max((sum(row, model.zero) for row in rho), default=model.zero)
    return DobrushinReport(rho, norm)


# ---------------------------------------------------------------- chains


@dataclass
class FlipParams:
    p: tuple
    name: str = "custom"
    citation: str = ""

    def __post_init__(self):
        p = tuple(float(to_exact(x)) if isinstance(x, str) else float(x) for x in self.p)
        if any(not 0 <= x <= 1 for x in p):
            raise UsageError("flip probabilities must lie in [0, 1]")
        self.p = p

    def prob(self, ell: int) -> float:
        """Flip probability p_l / l for a component of size l (0 when l = 0)."""
        if ell <= 0 or ell > len(self.p):
            return 0.0
        return self.p[ell - 1] / ell

    def as_array(self) -> np.ndarray:
        out = np.zeros(len(self.p) + 1)
        for ell in range(1, len(self.p) + 1):
            out[ell] = self.prob(ell)
        return out

    def as_record(self) -> dict:
        return {"name": self.name, "p": list(self.p), "citation": self.citation}


@lru_cache(maxsize=None)
def _presets() -> dict:
    text = resources.files("spincount").joinpath("data/flip_presets.json").read_text()
    return json.loads(text)


def preset_names() -> list:
    return sorted(_presets())


def flip_preset(name: str) -> FlipParams:
    table = _presets()
    if name not in table:
        raise UsageError(f"unknown flip preset {name!r}; known: {', '.join(sorted(table))}")
    entry = table[name]
    return FlipParams(tuple(entry["p"]), name, entry.get("citation", ""))


@dataclass
class ChainState:
    X: tuple
    rng: np.random.Generator = field(repr=False)

    @classmethod
    def seeded(cls, X, seed: int, trial: int = 0) -> "ChainState":
        return cls(tuple(X), _rng(seed, trial))


def kempe_component(model: SpinModel, X, v: int, c: int) -> frozenset:
    """Vertices reachable from v along paths alternating between X(v) and c.

    Empty when c == X(v).
    """
    a = X[v]
    if c == a:
        return frozenset()
    adj = model.graph.adj
    seen = {v}
    stack = [v]
    while stack:
        w = stack.pop()
        for y in adj[w]:
            if y not in seen and X[y] in (a, c) and X[y] != X[w]:
                seen.add(y)
                stack.append(y)
    return frozenset(seen)


def _apply_flip(model, X, S, a, c):
    """Swap a <-> c on S, or None if some new colour is outside a list."""
    Y = list(X)
    for w in S:
        new = c if X[w] == a else a
        if not model.A_V[w][new]:
            return None
        Y[w] = new
    return tuple(Y)


def flip_move(model: SpinModel, X, params: FlipParams, v: int, c: int, r: float) -> tuple:
    """One flip update with the randomness given explicitly."""
    S = kempe_component(model, X, v, c)
    if not S or r >= params.prob(len(S)):
        return tuple(X)
    Y = _apply_flip(model, X, S, X[v], c)
    return tuple(X) if Y is None else Y


def flip_step(model: SpinModel, state: ChainState, params: FlipParams) -> ChainState:
    """Uniform (v, c), flip S_X(v, c) with probability p_l / l."""
    rng = state.rng
    v = int(rng.integers(model.n))
    c = int(rng.integers(model.q))
    r = float(rng.random())
    return ChainState(flip_move(model, state.X, params, v, c, r), rng)


def _float_tables(model):
    AE = np.array([[float(a) for a in row] for row in model.A_E])
    AV = np.array([[float(a) for a in vec] for vec in model.A_V])
    return AE, AV


def _sample(weights, r: float) -> int:
    total = sum(weights)
    if total <= 0:
        raise NonPermissiveError("all conditional weights vanish")
    acc = 0.0
    target = r * total
    last = 0
    for c, w in enumerate(weights):
        if w > 0:
            acc += w
            last = c
            if target < acc:
                return c
    return last


def glauber_move(model: SpinModel, X, v: int, r: float) -> tuple:
    w = [float(a) for a in local_conditional(model, X, v)]
    Y = list(X)
    Y[v] = _sample(w, r)
    return tuple(Y)


def glauber_step(model: SpinModel, state: ChainState) -> ChainState:
    """Resample a uniform vertex from its exact local conditional."""
    rng = state.rng
    v = int(rng.integers(model.n))
    r = float(rng.random())
    return ChainState(glauber_move(model, state.X, v, r), rng)


def _maximal_pair(p, r, a: float, b: float, c: float) -> tuple:
    """Sample from the TV-optimal coupling of p and r (normalised lists)."""
    m = [min(x, y) for x, y in zip(p, r)]
    s = sum(m)
    if a < s:
        k = _sample(m, b)
        return k, k
    rest_p = [max(x - y, 0.0) for x, y in zip(p, m)]
    rest_r = [max(x - y, 0.0) for x, y in zip(r, m)]
    return _sample(rest_p, b), _sample(rest_r, c)


def _differing_vertex(modelP, modelQ):
    diff = [v for v in range(modelP.n) if modelP.A_V[v] != modelQ.A_V[v]]
    return diff


def coupled_step_disagreement(modelP: SpinModel, modelQ: SpinModel, X, chain: str,
                              params: FlipParams | None = None, rng=None, v: int | None = None) -> tuple:
    """One coupled step of the chains for modelP and modelQ from the same state.

    flip: both chains use the same (u, c). Components of size 0 or above 6
    leave both chains in place; if the component avoids v and its neighbours
    the same coin decides both moves, otherwise the coins are independent.
    glauber: same vertex, TV-optimal coupling of the two local conditionals.
    ``v`` is the vertex near which the models differ (found from the vertex
    weights when omitted).
    """
    if chain not in CHAINS:
        raise UsageError(f"unknown chain {chain!r}")
    if modelP.graph != modelQ.graph or modelP.q != modelQ.q:
        raise UsageError("coupled models must share graph and colours")
    rng = rng if rng is not None else _rng(0)
    X = tuple(X)
    same = modelP == modelQ
    if chain == "glauber":
        u = int(rng.integers(modelP.n))
        a, b, c = (float(t) for t in rng.random(3))
        wp = [float(t) for t in local_conditional(modelP, X, u)]
        wq = [float(t) for t in local_conditional(modelQ, X, u)]
        zp, zq = sum(wp), sum(wq)
        if zp <= 0 or zq <= 0:
            raise NonPermissiveError("all conditional weights vanish")
        kp, kq = _maximal_pair([t / zp for t in wp], [t / zq for t in wq], a, b, c)
        XP, XQ = list(X), list(X)
        XP[u], XQ[u] = kp, kq
        return tuple(XP), tuple(XQ)
    if params is None:
        raise UsageError("flip chain needs flip parameters")
    u = int(rng.integers(modelP.n))
    c = int(rng.integers(modelP.q))
    r1, r2 = (float(t) for t in rng.random(2))
    S = kempe_component(modelP, X, u, c)
    ell = len(S)
    if ell == 0 or ell > MAX_FLIP:
        return X, X
    if v is None:
        diff = _differing_vertex(modelP, modelQ)
        v = diff[0] if diff else None
    near = set() if v is None else {v, *modelP.graph.adj[v]}
    rq = r1 if same or not (S & near) else r2
    return flip_move(modelP, X, params, u, c, r1), flip_move(modelQ, X, params, u, c, rq)


# ---------------------------------------------------------------- compiled kernels


def _csr(graph):
    indptr = np.zeros(graph.n + 1, dtype=np.int64)
    for v in range(graph.n):
        indptr[v + 1] = indptr[v] + len(graph.adj[v])
    indices = np.array([u for v in range(graph.n) for u in graph.adj[v]], dtype=np.int64)
    return indptr, indices


@numba.njit(cache=True)
def _kempe_nb(indptr, indices, X, v, c, mark, stamp, stack, out):
    a = X[v]
    if c == a:
        return 0
    mark[v] = stamp
    stack[0] = v
    top = 1
    size = 0
    while top > 0:
        top -= 1
        w = stack[top]
        out[size] = w
        size += 1
        for k in range(indptr[w], indptr[w + 1]):
            y = indices[k]
            if mark[y] != stamp and (X[y] == a or X[y] == c) and X[y] != X[w]:
                mark[y] = stamp
                stack[top] = y
                top += 1
    return size


@numba.njit(cache=True)
def _flip_nb(indptr, indices, allowed, X, prob, v, c, r, mark, stamp, stack, comp):
    """Apply one flip move to X in place; returns True if X changed."""
    ell = _kempe_nb(indptr, indices, X, v, c, mark, stamp, stack, comp)
    if ell == 0 or ell >= prob.shape[0] or r >= prob[ell]:
        return False
    a = X[v]
    for i in range(ell):
        w = comp[i]
        new = c if X[w] == a else a
        if not allowed[w, new]:
            return False
    for i in range(ell):
        w = comp[i]
        X[w] = c if X[w] == a else a
    return True


@numba.njit(cache=True)
def _flip_run_nb(indptr, indices, allowed, X, prob, vs, cs, rs, counts, q, stamp0):
    n = X.shape[0]
    mark = np.zeros(n, dtype=np.int64)
    stack = np.zeros(n, dtype=np.int64)
    comp = np.zeros(n, dtype=np.int64)
    for t in range(vs.shape[0]):
        _flip_nb(indptr, indices, allowed, X, prob, vs[t], cs[t], rs[t], mark, stamp0 + t + 1, stack, comp)
        if counts.shape[0] > 0:
            code = 0
            for i in range(n - 1, -1, -1):
                code = code * q + X[i]
            counts[code] += 1


@numba.njit(cache=True)
def _flip_pair_nb(indptr, indices, allowed, X, Y, prob, vs, cs, rs, dist):
    """Identity coupling of two flip chains; dist[t] = Hamming after t steps."""
    n = X.shape[0]
    mark = np.zeros(n, dtype=np.int64)
    stack = np.zeros(n, dtype=np.int64)
    comp = np.zeros(n, dtype=np.int64)
    stamp = 0
    d = 0
    for i in range(n):
        if X[i] != Y[i]:
            d += 1
    dist[0] = d
    for t in range(vs.shape[0]):
        stamp += 1
        _flip_nb(indptr, indices, allowed, X, prob, vs[t], cs[t], rs[t], mark, stamp, stack, comp)
        stamp += 1
        _flip_nb(indptr, indices, allowed, Y, prob, vs[t], cs[t], rs[t], mark, stamp, stack, comp)
        d = 0
        for i in range(n):
            if X[i] != Y[i]:
                d += 1
        dist[t + 1] = d


def _allowed(model):
    return np.array([[bool(model.A_V[v][c]) for c in range(model.q)] for v in range(model.n)])


def _flip_prob(params):
    return params.as_array()[: MAX_FLIP + 1] if len(params.p) > MAX_FLIP else params.as_array()


def flip_run(model: SpinModel, X0, params: FlipParams, steps: int, seed: int,
             occupancy: bool = True, chunk: int = 1 << 16) -> tuple:
    """Run the flip chain for ``steps`` seeded steps with the compiled kernel.

    Returns (final state, visit counts indexed by sum X[i] q^i or None).
    """
    n, q = model.n, model.q
    if occupancy and q ** n > 10 ** 7:
        raise SizeError("occupancy table too large")
    indptr, indices = _csr(model.graph)
    allowed = _allowed(model)
    prob = params.as_array()
    X = np.array(X0, dtype=np.int64)
    counts = np.zeros(q ** n if occupancy else 0, dtype=np.int64)
    rng = _rng(seed)
    done = 0
    while done < steps:
        m = min(chunk, steps - done)
        vs = rng.integers(n, size=m)
        cs = rng.integers(q, size=m)
        rs = rng.random(m)
        _flip_run_nb(indptr, indices, allowed, X, prob, vs, cs, rs, counts, q, done)
        done += m
    return tuple(int(x) for x in X), (counts if occupancy else None)


def decode_state(code: int, n: int, q: int) -> tuple:
    out = []
    for _ in range(n):
        out.append(code % q)
        code //= q
    return tuple(out)


def encode_state(X, q: int) -> int:
    code = 0
    for x in reversed(X):
        code = code * q + int(x)
    return code


# ---------------------------------------------------------------- contraction


@dataclass
class ContractionReport:
    chain: str
    trials: int
    steps: int
    seed: int
    mean_distance: list
    factor: float | None
    stderr: float | None
    half_width: float | None
    upper95: float | None
    params: dict = field(default_factory=dict)
    heuristic: bool = True

    def as_record(self) -> dict:
        return {"kind": "contraction", "chain": self.chain, "trials": self.trials, "steps": self.steps,
                "seed": self.seed, "mean_distance": self.mean_distance, "factor": self.factor,
                "stderr": self.stderr, "half_width": self.half_width, "upper95": self.upper95,
                "params": self.params, "heuristic": self.heuristic,
                "metric": "hamming (any 2-equivalent metric changes factors by at most a factor 2 overall)"}


def random_configuration(model: SpinModel, rng, pin: Pinning | None = None, restarts: int = 1000) -> tuple:
    """Random greedy completion of ``pin``: random order, uniform colour from
    the current support; restarted on dead ends."""
    pin = pin or Pinning.empty(model.n)
    free = pin.free()
    for _ in range(restarts):
        cur = pin
        order = [free[i] for i in rng.permutation(len(free))]
        for v in order:
            sup = support(model, cur, v)
            if not sup:
                break
            cur = cur.assign(v, sup[int(rng.integers(len(sup)))])
        else:
            return cur.values
    raise InitError(f"no feasible configuration after {restarts} restarts")


def initial_pair(model: SpinModel, rng, disagree: int = 1, pin: Pinning | None = None,
                 restarts: int = 1000) -> tuple:
    """Two feasible configurations extending ``pin`` that differ on exactly
    ``disagree`` free vertices."""
    pin = pin or Pinning.empty(model.n)
    free = pin.free()
    if not 0 <= disagree <= len(free):
        raise UsageError("cannot disagree on more vertices than are free")
    for _ in range(restarts):
        X = random_configuration(model, rng, pin, restarts)
        Y = list(X)
        ok = True
        for v in [free[i] for i in rng.choice(len(free), size=disagree, replace=False)]:
            rest = Pinning([-1 if w == v else Y[w] for w in range(model.n)])
            options = [c for c in support(model, rest, v) if c != X[v]]
            if not options:
                ok = False
                break
            Y[v] = options[int(rng.integers(len(options)))]
        if ok:
            return tuple(X), tuple(Y)
    raise InitError(f"no initial pair after {restarts} restarts")


def _glauber_pairs(model, starts, draws, free, steps):
    """Vectorised coupled Glauber chains over all trials.

    starts: (X, Y) arrays of shape (trials, n); draws: (trials, steps, 4)
    uniforms. Returns mean Hamming distance per step.
    """
    X, Y = starts
    trials, n = X.shape
    q = model.q
    AE, AV = _float_tables(model)
    g = model.graph
    dmax = max(g.max_degree, 1)
    nbr = np.full((n, dmax), n, dtype=np.int64)
    for v in range(n):
        nbr[v, : len(g.adj[v])] = g.adj[v]
    AEx = np.ones((q, q + 1))
    AEx[:, :q] = AE
    pad = np.full((trials, 1), q, dtype=np.int64)
    X = np.hstack([X, pad])
    Y = np.hstack([Y, pad])
    free = np.asarray(free, dtype=np.int64)
    rows = np.arange(trials)
    out = [float(np.mean(np.sum(X[:, :n] != Y[:, :n], axis=1)))]

    def cond(Z, u):
        w = AV[u].copy()
        for k in range(dmax):
            w *= AEx[:, Z[rows, nbr[u, k]]].T
        s = w.sum(axis=1, keepdims=True)
        if np.any(s <= 0):
            raise NonPermissiveError("all conditional weights vanish")
        return w / s

    def pick(w, r):
        cum = np.cumsum(w, axis=1)
        k = np.sum(cum <= (r * cum[:, -1])[:, None], axis=1)
        return np.minimum(k, q - 1)

    for t in range(steps):
        u = free[np.minimum((draws[:, t, 0] * len(free)).astype(np.int64), len(free) - 1)]
        p, r = cond(X, u), cond(Y, u)
        m = np.minimum(p, r)
        s = m.sum(axis=1)
        a, b, c = draws[:, t, 1], draws[:, t, 2], draws[:, t, 3]
        common = a < s
        kc = pick(np.where(s[:, None] > 0, m, p), b)
        kx = pick(np.maximum(p - m, 0.0) + (~(s < 1))[:, None] * p, b)
        ky = pick(np.maximum(r - m, 0.0) + (~(s < 1))[:, None] * r, c)
        X[rows, u] = np.where(common, kc, kx)
        Y[rows, u] = np.where(common, kc, ky)
        out.append(float(np.mean(np.sum(X[:, :n] != Y[:, :n], axis=1))))
    return out, np.sum(X[:, :n] != Y[:, :n], axis=1)


def contraction_estimate(model: SpinModel, chain: str, params: FlipParams | None = None,
                         trials: int = 1000, steps: int | None = None, seed: int = 0,
                         disagree: int = 1, pin: Pinning | None = None) -> ContractionReport:
    """Monte Carlo estimate of the per-step contraction of a coupled chain.

    Each trial starts from a random feasible pair differing on ``disagree``
    free vertices and runs the coupled chain (shared randomness for flip,
    same vertex and TV-optimal local coupling for Glauber). The fitted
    factor is (D_T / D_0)^(1/T) for the mean Hamming distance D_t; the 95%
    upper value uses the trial standard error of D_T.
    """
    if chain not in CHAINS:
        raise UsageError(f"unknown chain {chain!r}")
    if trials < 0:
        raise UsageError("trials must be nonnegative")
    pin = pin or Pinning.empty(model.n)
    free = pin.free()
    steps = 4 * max(len(free), 1) if steps is None else steps
    meta = {"disagree": disagree, "pinned": len(pin.domain)}
    if chain == "flip":
        if params is None:
            raise UsageError("flip chain needs flip parameters")
        if pin.domain:
            raise UsageError("the flip chain is run without pinned vertices")
        meta["preset"] = params.as_record()
    if trials == 0 or steps <= 0 or not free:
        return ContractionReport(chain, trials, max(steps, 0), seed, [], None, None, None, None, meta)
    starts_x, starts_y, draws = [], [], []
    finals = None
    for t in range(trials):
        rng = _rng(seed, t)
        X, Y = initial_pair(model, rng, disagree, pin)
        starts_x.append(X)
        starts_y.append(Y)
        if chain == "glauber":
            draws.append(rng.random((steps, 4)))
        else:
            draws.append((rng.integers(len(free), size=steps), rng.integers(model.q, size=steps),
                          rng.random(steps)))
    if chain == "glauber":
        mean, finals = _glauber_pairs(model, (np.array(starts_x), np.array(starts_y)),
                                      np.array(draws), free, steps)
    else:
        indptr, indices = _csr(model.graph)
        allowed = _allowed(model)
        prob = params.as_array()
        free_arr = np.asarray(free, dtype=np.int64)
        total = np.zeros(steps + 1)
        finals = np.zeros(trials)
        dist = np.zeros(steps + 1, dtype=np.int64)
        for t in range(trials):
            X = np.array(starts_x[t], dtype=np.int64)
            Y = np.array(starts_y[t], dtype=np.int64)
            vs, cs, rs = draws[t]
            _flip_pair_nb(indptr, indices, allowed, X, Y, prob, free_arr[vs], cs, rs, dist)
            total += dist
            finals[t] = dist[-1]
        mean = list(total / trials)
    d0, dT = mean[0], mean[-1]
    if d0 <= 0:
        return ContractionReport(chain, trials, steps, seed, mean, None, None, None, None, meta)
    se = float(np.std(finals, ddof=1) / math.sqrt(trials)) if trials > 1 else float("inf")
    factor = (dT / d0) ** (1.0 / steps)
    stderr = factor * se / (steps * dT) if dT > 0 else (se / d0) ** (1.0 / steps)
    upper = ((dT + Z95 * se) / d0) ** (1.0 / steps)
    return ContractionReport(chain, trials, steps, seed, mean, factor, stderr, Z95 * stderr, upper, meta)


# ---------------------------------------------------------------- coupling independence


@dataclass
class CIEstimate:
    value: object
    method: str
    heuristic: bool
    one_step: object = None
    contraction: ContractionReport | None = None

    def as_record(self) -> dict:
        rec = {"kind": "ci", "method": self.method, "value": _num(self.value), "heuristic": self.heuristic}
        if self.one_step is not None:
            rec["one_step"] = _num(self.one_step)
        if self.contraction is not None:
            rec["contraction"] = self.contraction.as_record()
        return rec


def one_step_disagreement(model: SpinModel, sigma: Pinning, tau: Pinning, X) -> float:
    """Expected Hamming distance after one coupled Glauber step (uniform free
    vertex, TV-optimal coupling) of the chains conditioned on sigma and tau,
    both started from the free part of X."""
    free = sigma.free()
    if not free:
        return 0.0
    total = 0.0
    for u in free:
        xs = list(X)
        xt = list(X)
        for v, c in enumerate(sigma.values):
            if c >= 0:
                xs[v] = c
                xt[v] = tau.values[v]
        p = _normalise([float(a) for a in local_conditional(model, xs, u)])
        r = _normalise([float(a) for a in local_conditional(model, xt, u)])
        if p is None or r is None:
            raise NonPermissiveError("all conditional weights vanish")
        total += _tv(p, r)
    return total / len(free)


def ci_estimate(model: SpinModel, sigma: Pinning, tau: Pinning, method: str = "exact", *,
                trials: int = 2000, steps: int | None = None, seed: int = 0, samples: int = 200,
                cap: int = 200_000) -> CIEstimate:
    """Hamming W1 between the conditional distributions of sigma and tau.

    ``exact``: the oracle value. ``mc``: the bound C / delta where C is the
    largest one-step coupled disagreement seen over sampled states and
    1 - delta the fitted Glauber contraction factor of the sigma chain. The
    mc value is a heuristic estimate.
    """
    if sigma.domain != tau.domain:
        raise UsageError("pinnings must share a domain")
    diff = sigma.differences(tau)
    if len(diff) > 1:
        raise UsageError("pinnings must differ at one vertex at most")
    if method == "exact":
        return CIEstimate(exact_w1_hamming(model, sigma, tau, cap), "exact", False)
    if method != "mc":
        raise UsageError(f"unknown method {method!r}")
    if not diff:
        return CIEstimate(0.0, "mc", True, 0.0)
    rng = _rng(seed, (1 << 32) - 1)
    C = 0.0
    for _ in range(samples):
        X = random_configuration(model, rng, sigma)
        C = max(C, one_step_disagreement(model, sigma, tau, X))
    rep = contraction_estimate(model, "glauber", trials=trials, steps=steps, seed=seed, pin=sigma)
    if rep.factor is None or rep.factor >= 1:
        return CIEstimate(float("inf"), "mc", True, C, rep)
    return CIEstimate(C / (1 - rep.factor), "mc", True, C, rep)
