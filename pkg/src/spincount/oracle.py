"""Exact ground truth: conditional partition functions, marginals, ratios,
TV and Hamming-W1 distances, total influence and marginal lower bounds.

Conditional sums factor over connected components of free vertices, and each
component is summed exactly by variable elimination (greedy min-degree order).
A literal enumerator is kept for cross-checking.
"""
from dataclasses import dataclass
from itertools import product

import numpy as np

from .arith import to_exact
from .errors import InfeasiblePinningError, NonPermissiveError, SizeError, UsageError
from .model import Pinning, SpinModel, pinned_weight, sphere, support
from .transport import transport_cost

DEFAULT_CAP = 2_000_000
# the marginal-bound enumeration is cheap per unit, so it gets a larger budget
BOUND_CAP = 50_000_000


@dataclass(frozen=True)
class MarginalDist:
    vertex: int
    probs: tuple

    def __getitem__(self, c):
        return self.probs[c]

    @property
    def support(self) -> tuple:
        return tuple(c for c, p in enumerate(self.probs) if p > 0)


def free_components(model: SpinModel, pin: Pinning, within=None) -> list:
    """Connected components of the free vertices, each sorted; optionally
    only those meeting ``within``."""
    pv = pin.values
    adj = model.graph.adj
    seen = [False] * model.n
    comps = []
    starts = range(model.n) if within is None else sorted(within)
    for s in starts:
        if pv[s] >= 0 or seen[s]:
            continue
        seen[s] = True
        comp, stack = [s], [s]
        while stack:
            x = stack.pop()
            for y in adj[x]:
                if pv[y] < 0 and not seen[y]:
                    seen[y] = True
                    comp.append(y)
                    stack.append(y)
        comps.append(sorted(comp))
    return comps


def _array(model, values):
    if model.exact:
        arr = np.empty(len(values), dtype=object)
        arr[:] = list(values)
        return arr
    return np.array(values, dtype=float)


def _factors(model: SpinModel, pin: Pinning, comp):
    """Domains and factors for one free component. Colours outside a vertex's
    local support are dropped since they carry zero weight."""
    pv = pin.values
    in_comp = set(comp)
    doms = {}
    factors = []
    for v in comp:
        dom = support(model, pin, v)
        doms[v] = dom
        vals = []
        for c in dom:
            w = model.A_V[v][c]
            for u in model.graph.adj[v]:
                if pv[u] >= 0:
                    w *= model.A_E[c][pv[u]]
            vals.append(w)
        factors.append(((v,), _array(model, vals)))
    for a, b in model.graph.edges:
        if a in in_comp and b in in_comp:
            da, db = doms[a], doms[b]
            mat = np.empty((len(da), len(db)), dtype=object if model.exact else float)
            for i, ca in enumerate(da):
                for j, cb in enumerate(db):
                    mat[i, j] = model.A_E[ca][cb]
            factors.append(((a, b), mat))
    return doms, factors


def _expand(fvars, arr, target):
    order = sorted(range(len(fvars)), key=lambda i: target.index(fvars[i]))
    arr = arr.transpose(order) if len(order) > 1 else arr
    present = set(fvars)
    shape = [arr.shape[order.index(fvars.index(t))] if t in present else 1 for t in target]
    return arr.reshape(shape)


def _multiply(factors, cap):
    target = sorted({v for fv, _ in factors for v in fv})
    sizes = {}
    for fv, arr in factors:
        for v, s in zip(fv, arr.shape):
            sizes[v] = s
    total = 1
    for v in target:
        total *= sizes[v]
    if total > cap:
        raise SizeError(f"intermediate table of {total} entries exceeds cap {cap}")
    out = None
    for fv, arr in factors:
        e = _expand(list(fv), arr, target)
        out = e if out is None else out * e
    return tuple(target), out


def _eliminate(factors, keep, cap):
    """Sum out every variable not in ``keep``; return one factor over ``keep``."""
    factors = list(factors)
    remaining = sorted({v for fv, _ in factors for v in fv} - set(keep))
    while remaining:
        def cost(v):
            nb = set()
            for fv, _ in factors:
                if v in fv:
                    nb.update(fv)
            return (len(nb), v)
        var = min(remaining, key=cost)
        remaining.remove(var)
        inv = [f for f in factors if var in f[0]]
        factors = [f for f in factors if var not in f[0]]
        tv, arr = _multiply(inv, cap)
        ax = tv.index(var)
        factors.append((tv[:ax] + tv[ax + 1:], arr.sum(axis=ax)))
    scalars = [f for f in factors if not f[0]]
    tables = [f for f in factors if f[0]]
    scale = None
    for _, arr in scalars:
        val = arr.item() if hasattr(arr, "item") and arr.shape == () else arr
        scale = val if scale is None else scale * val
    if tables:
        tv, arr = _multiply(tables, cap)
        if scale is not None:
            arr = arr * scale
        order = [tv.index(v) for v in keep]
        return tuple(keep), arr.transpose(order) if len(order) > 1 else arr
    return (), scale


def component_Z(model: SpinModel, pin: Pinning, comp, cap: int = DEFAULT_CAP):
    doms, factors = _factors(model, pin, comp)
    if any(not d for d in doms.values()):
        return model.zero
    _, val = _eliminate(factors, (), cap)
    return val


def exact_conditional_Z(model: SpinModel, pin: Pinning | None = None, cap: int = DEFAULT_CAP):
    """Sum of conditional weights over completions of ``pin`` (Z when empty)."""
    pin = pin or Pinning.empty(model.n)
    total = model.one
    for comp in free_components(model, pin):
        total *= component_Z(model, pin, comp, cap)
        if not total:
            return model.zero
    return total


def enumerate_conditional_Z(model: SpinModel, pin: Pinning | None = None, cap: int = DEFAULT_CAP):
    """Literal sum over all completions; used to cross-check the elimination."""
    from .model import conditional_weight

    pin = pin or Pinning.empty(model.n)
    free = pin.free()
    if model.q ** len(free) > cap:
        raise SizeError("enumeration exceeds cap")
    x = list(pin.values)
    total = model.zero
    for cols in product(range(model.q), repeat=len(free)):
        for v, c in zip(free, cols):
            x[v] = c
        total += conditional_weight(model, pin, x)
    return total


def unnormalized_marginal(model: SpinModel, pin: Pinning, v: int, cap: int = DEFAULT_CAP) -> list:
    """Length-q vector proportional to the conditional marginal at free v."""
    if pin.values[v] >= 0:
        raise UsageError(f"vertex {v} is pinned")
    comp = free_components(model, pin, within=[v])[0]
    doms, factors = _factors(model, pin, comp)
    out = [model.zero] * model.q
    if any(not d for d in doms.values()):
        return out
    _, arr = _eliminate(factors, (v,), cap)
    for i, c in enumerate(doms[v]):
        out[c] = arr[i]
    return out


def exact_marginal(model: SpinModel, pin: Pinning, v: int, cap: int = DEFAULT_CAP,
                   check_all: bool = False) -> MarginalDist:
    vec = unnormalized_marginal(model, pin, v, cap)
    z = sum(vec, model.zero)
    if not z:
        raise NonPermissiveError(f"zero conditional partition function around vertex {v}")
    if check_all and not exact_conditional_Z(model, pin, cap):
        raise NonPermissiveError("zero conditional partition function")
    return MarginalDist(v, tuple(x / z for x in vec))


def pinning_mass_ratio(model: SpinModel, sigma: Pinning, tau: Pinning, cap: int = DEFAULT_CAP):
    """mu_Lambda(sigma) / mu_Lambda(tau) for two pinnings of the same domain.

    Only factors touching the vertices where they differ and the free
    components next to those vertices can differ, so only those are computed.
    """
    if sigma.domain != tau.domain:
        raise UsageError("pinnings must share a domain")
    diff = sigma.differences(tau)
    if not diff:
        if not pinned_weight(model, tau) or not exact_conditional_Z(model, tau, cap):
            raise InfeasiblePinningError("pinning has zero mass")
        return model.one
    g = model.graph
    num, den = model.one, model.one
    dset = set(diff)
    for v in diff:
        num *= model.A_V[v][sigma.values[v]]
        den *= model.A_V[v][tau.values[v]]
    for a, b in g.edges:
        if (a in dset or b in dset) and sigma.values[a] >= 0 and sigma.values[b] >= 0:
            num *= model.A_E[sigma.values[a]][sigma.values[b]]
            den *= model.A_E[tau.values[a]][tau.values[b]]
    near = {y for v in diff for y in g.adj[v] if sigma.values[y] < 0}
    for comp in free_components(model, sigma, within=near):
        num *= component_Z(model, sigma, comp, cap)
        den *= component_Z(model, tau, comp, cap)
    if not den or not pinned_weight(model, tau):
        raise InfeasiblePinningError("denominator pinning has zero mass")
    return num / den


def exact_ratio(model: SpinModel, sigma: Pinning, tau: Pinning, cap: int = DEFAULT_CAP):
    return pinning_mass_ratio(model, sigma, tau, cap)


def exact_tv(p, r):
    pp = p.probs if isinstance(p, MarginalDist) else p
    rr = r.probs if isinstance(r, MarginalDist) else r
    if len(pp) != len(rr):
        raise UsageError("distributions over different numbers of colours")
    return sum((abs(a - b) for a, b in zip(pp, rr)), 0 * pp[0]) / 2


def joint_table(model: SpinModel, pin: Pinning, comp, cap: int = DEFAULT_CAP):
    """Unnormalized joint weights of one free component as (domains, array)."""
    doms, factors = _factors(model, pin, comp)
    if any(not d for d in doms.values()):
        return doms, None
    _, arr = _eliminate(factors, tuple(comp), cap)
    return doms, arr


def _component_distribution(model, pin, comp, cap):
    doms, arr = joint_table(model, pin, comp, cap)
    if arr is None:
        raise NonPermissiveError("zero conditional partition function")
    states, probs = [], []
    total = arr.sum()
    if not total:
        raise NonPermissiveError("zero conditional partition function")
    for idx in np.ndindex(arr.shape):
        w = arr[idx]
        if w:
            states.append(tuple(doms[v][i] for v, i in zip(comp, idx)))
            probs.append(w / total)
    return states, probs


def exact_w1_hamming(model: SpinModel, sigma: Pinning, tau: Pinning, cap: int = 200_000):
    """1-Wasserstein distance under Hamming distance between the two conditional
    distributions, over the free vertices.

    The distributions are products over free components, and for a product
    with an additive metric the distance is the sum over components; only
    components next to a discrepancy contribute.
    """
    if sigma.domain != tau.domain:
        raise UsageError("pinnings must share a domain")
    diff = sigma.differences(tau)
    if not diff:
        return model.zero
    near = {y for v in diff for y in model.graph.adj[v] if sigma.values[y] < 0}
    total = model.zero
    for comp in free_components(model, sigma, within=near):
        if model.q ** len(comp) > cap:
            raise SizeError(f"W1 over {len(comp)} free vertices exceeds cap")
        sa, pa = _component_distribution(model, sigma, comp, cap)
        sb, pb = _component_distribution(model, tau, comp, cap)
        cost = [[sum(1 for a, b in zip(x, y) if a != b) for y in sb] for x in sa]
        total += transport_cost(pa, pb, cost)
    return total


def total_influence(model: SpinModel, sigma: Pinning, tau: Pinning, v: int, ell: int,
                    cap: int = DEFAULT_CAP):
    """Sum over free u at distance ell from v of TV between the marginals at u."""
    diff = sigma.differences(tau)
    if sigma.domain != tau.domain or any(x != v for x in diff):
        raise UsageError("pinnings must differ only at the given vertex")
    if not diff:
        return model.zero
    total = model.zero
    for u in sorted(sphere(model.graph, v, ell)):
        if sigma.values[u] >= 0:
            continue
        total += exact_tv(exact_marginal(model, sigma, u, cap), exact_marginal(model, tau, u, cap))
    return total


def measured_marginal_bound(model: SpinModel, cap: int = BOUND_CAP):
    """Certified lower bound on every positive conditional single-site marginal.

    Any conditional marginal at v is an average of marginals in which the
    vertices at distance two are pinned as well, leaving v and its free
    neighbours as the only free vertices. Those are enumerated: a subset P of
    neighbours is pinned, and for each free neighbour w the colours of its
    other pinned neighbours only enter through w's effective weight vector.
    Values of distance-two vertices shared by several neighbours are chosen
    independently, which can only lower the minimum, so the result stays a
    lower bound. When a local enumeration is larger than ``LOCAL_EXACT`` the
    choices are relaxed further, component by component (see
    ``_local_relaxed``).
    """
    g, q = model.graph, model.q
    AE = model.A_E
    best = None
    budget = [0]

    def charge(k):
        budget[0] += k
        if budget[0] > cap:
            raise SizeError("marginal bound enumeration exceeds cap")

    for v in range(g.n):
        nbrs = g.adj[v]
        dist2 = set(sphere(g, v, 2))
        for mask in range(1 << len(nbrs)):
            P = [w for i, w in enumerate(nbrs) if mask >> i & 1]
            Fr = [w for w in nbrs if w not in P]
            fr_edges = [(a, b) for a, b in g.edges if a in Fr and b in Fr]
            for pcols in product(range(q), repeat=len(P)):
                pval = dict(zip(P, pcols))
                h = []
                for c in range(q):
                    w = model.A_V[v][c]
                    for x, cx in pval.items():
                        w *= AE[c][cx]
                    h.append(w)
                options = []
                for w in Fr:
                    ext = [y for y in g.adj[w] if y in dist2]
                    base = []
                    for c in range(q):
                        val = model.A_V[w][c]
                        for y in g.adj[w]:
                            if y in pval:
                                val *= AE[c][pval[y]]
                        base.append(val)
                    vecs = set()
                    for ecols in product(range(q), repeat=len(ext)):
                        vec = list(base)
                        for cy in ecols:
                            vec = [vec[c] * AE[c][cy] for c in range(q)]
                        vecs.add(tuple(vec))
                    options.append(sorted(vecs))
                count = 1
                for o in options:
                    count *= len(o)
                comps = _components(Fr, fr_edges)
                exact_cost = count * sum(q ** (len(comp) + 1) for comp in comps)
                if exact_cost <= LOCAL_EXACT:
                    charge(exact_cost)
                    p = _local_exact(model, h, Fr, fr_edges, options)
                else:
                    cost = 0
                    for comp in comps:
                        k = 1
                        for i in comp:
                            k *= len(options[i])
                        cost += k * q ** (len(comp) + 1)
                    charge(cost)
                    p = _local_relaxed(model, h, Fr, fr_edges, options, comps)
                if p is not None and (best is None or p < best):
                    best = p
    if best is None:
        raise NonPermissiveError("no positive marginal found")
    return best


def brute_marginal_bound(model: SpinModel, cap: int = 200_000):
    """Minimum positive conditional marginal over every pinning of every subset.
    Exponential; for tiny models and tests only."""
    g, q = model.graph, model.q
    if (q + 1) ** g.n * g.n > cap:
        raise SizeError("brute marginal bound too large")
    best = None
    for vals in product(range(-1, q), repeat=g.n):
        pin = Pinning(vals)
        for v in pin.free():
            vec = unnormalized_marginal(model, pin, v)
            z = sum(vec, model.zero)
            if not z:
                continue
            for m in vec:
                if m and (best is None or m / z < best):
                    best = m / z
    return best


def as_number(model: SpinModel, x):
    return to_exact(x) if model.exact else float(x)


def pinning_probability(model: SpinModel, pin: Pinning, cap: int = DEFAULT_CAP):
    """Probability under the Gibbs distribution that the pinned vertices take
    the pinned values."""
    Z = exact_conditional_Z(model, None, cap)
    if not Z:
        raise NonPermissiveError("zero partition function")
    return pinned_weight(model, pin) * exact_conditional_Z(model, pin, cap) / Z


LOCAL_EXACT = 20_000


def _components(Fr, fr_edges):
    """Index sets of the connected pieces of the free neighbourhood."""
    pos = {w: i for i, w in enumerate(Fr)}
    parent = list(range(len(Fr)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for a, b in fr_edges:
        parent[find(pos[a])] = find(pos[b])
    groups = {}
    for i in range(len(Fr)):
        groups.setdefault(find(i), []).append(i)
    return list(groups.values())


def _piece_weights(model, Fr, fr_edges, comp, vecs):
    """Unnormalised weight of each colour of v contributed by one piece."""
    q, AE = model.q, model.A_E
    ws = [Fr[i] for i in comp]
    edges = [(a, b) for a, b in fr_edges if a in ws]
    out = []
    for c in range(q):
        if len(ws) == 1:
            vec = vecs[0]
            out.append(sum((AE[c][d] * vec[d] for d in range(q)), model.zero))
            continue
        acc = model.zero
        for cols in product(range(q), repeat=len(ws)):
            val = model.one
            for d, vec in zip(cols, vecs):
                val *= AE[c][d] * vec[d]
            if val:
                idx = dict(zip(ws, cols))
                for a, b in edges:
                    val *= AE[idx[a]][idx[b]]
            acc += val
        out.append(acc)
    return out


def _local_exact(model, h, Fr, fr_edges, options):
    q = model.q
    comps = _components(Fr, fr_edges)
    best = None
    for choice in product(*options):
        marg = list(h)
        for comp in comps:
            if not any(marg):
                break
            part = _piece_weights(model, Fr, fr_edges, comp, [choice[i] for i in comp])
            marg = [marg[c] * part[c] for c in range(q)]
        z = sum(marg, model.zero)
        if not z:
            continue
        for m in marg:
            if m:
                p = m / z
                if best is None or p < best:
                    best = p
    return best


def _local_relaxed(model, h, Fr, fr_edges, options, comps):
    """Lower bound on the smallest positive local marginal.

    With weights N_K(c) per piece K, 1/p(c) = sum over c' of
    (h(c')/h(c)) prod_K N_K(c')/N_K(c). Each ratio is bounded by its maximum
    over the choices of that piece alone, which can only raise 1/p(c).
    """
    q = model.q
    ratio_max = []
    positive = []
    for comp in comps:
        M = [[None] * q for _ in range(q)]
        pos = [False] * q
        for choice in product(*(options[i] for i in comp)):
            part = _piece_weights(model, Fr, fr_edges, comp, list(choice))
            for c in range(q):
                if not part[c]:
                    continue
                pos[c] = True
                for c2 in range(q):
                    r = part[c2] / part[c]
                    if M[c2][c] is None or r > M[c2][c]:
                        M[c2][c] = r
        ratio_max.append(M)
        positive.append(pos)
    best = None
    for c in range(q):
        if not h[c] or not all(pos[c] for pos in positive):
            continue
        inv = model.one
        for c2 in range(q):
            if c2 == c or not h[c2]:
                continue
            term = h[c2] / h[c]
            for M in ratio_max:
                term *= M[c2][c]
            inv += term
        p = model.one / inv
        if best is None or p < best:
            best = p
    return best
