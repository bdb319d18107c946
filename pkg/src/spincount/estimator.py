"""Recursive ratio estimator, parameter selection, marginals from ratios and
partition-function estimation by self-reduction."""
import math
from dataclasses import asdict, dataclass, field
from itertools import product

from gmpy2 import mpq

from .arith import format_number, harmonic_upper, to_exact
from .couptree import BAD, GOOD, build_tree
from .errors import InfeasiblePinningError, NonPermissiveError, SizeError, UsageError
from .lpcert import eps_hat, marginal_estimator, search_needed
from .model import Pinning, SpinModel, greedy_configuration, pinned_weight, sphere, support, weight
from .oracle import BOUND_CAP, DEFAULT_CAP, MarginalDist, exact_ratio, measured_marginal_bound

MODES = ("theoretical", "measured", "manual")


@dataclass
class ParamSet:
    R: int
    eta: object
    b: object
    k_max: int = 5
    mode: str = "manual"
    C: object = None
    delta: object = None
    rule: str = "lemma"
    guarantee_valid: bool = False
    source: str = ""

    def __post_init__(self):
        if self.mode not in MODES:
            raise UsageError(f"unknown mode {self.mode!r}")
        if self.R < 1:
            raise UsageError("R must be at least 1")
        if not 0 < self.b < 1:
            raise UsageError("b must lie in (0, 1)")
        if self.eta < 0:
            raise UsageError("eta must be nonnegative")

    def as_record(self) -> dict:
        out = {}
        for k, v in asdict(self).items():
            out[k] = v if v is None or isinstance(v, (int, str, bool)) else format_number(v)
        return out


class ErrorSchedule:
    """eps(0) = 1/b and eps(k) = 2^(1-k) for k >= 1."""

    def __init__(self, b):
        self.b = b

    def __call__(self, k: int):
        if k < 0:
            raise UsageError("depth must be nonnegative")
        if k == 0:
            return 1 / self.b
        return mpq(1, 2 ** (k - 1)) if isinstance(self.b, type(mpq(1))) else 2.0 ** (1 - k)

    def margin(self, k: int):
        """Error margin handed to the binary search at depth k."""
        e = self(k - 1)
        return 2 * e + e * e


def delta_rate(C, R: int):
    """2C * 2^(-ceil(R / 2C)); exact for rational C."""
    C = to_exact(C)
    if C <= 0:
        raise UsageError("C must be positive")
    e = math.ceil(mpq(R) / (2 * C))
    return 2 * C / mpq(2) ** e


def _select(delta_fn, b, max_degree: int, R_max: int):
    b4 = b ** 4
    for R in range(1, R_max + 1):
        d = delta_fn(R)
        H = harmonic_upper(max_degree ** R)
        if 30 * d * H < b4:
            return R, d
    return None, None


def select_R(C, b, max_degree: int, R_max: int = 100000):
    """Smallest R with 30 delta(R) H(Delta^R) < b^4, and eta = delta(R) / b.

    For large Delta^R an upper bound on H is used, so the inequality stays
    sound.
    """
    b = to_exact(b)
    if not 0 < b < 1:
        raise UsageError("b must lie in (0, 1)")
    if max_degree < 1:
        raise UsageError("max degree must be positive")
    R, d = _select(lambda r: delta_rate(C, r), b, max_degree, R_max)
    if R is None:
        raise SizeError(f"no R up to {R_max} satisfies the selection rule")
    return R, d / b


# measurement ---------------------------------------------------------------

class RegionMeasure:
    """Exact conditional marginals for every pinning of a small vertex region
    on top of a fixed base pinning of everything else.

    Gives the least positive marginal (``b``) and, per radius, the largest
    sum of TV distances on a sphere caused by changing one region vertex
    (``delta``). Both are exact maxima/minima over the pinnings that extend
    the base pinning inside the region.
    """

    def __init__(self, model: SpinModel, base: Pinning, region, cap: int = DEFAULT_CAP):
        self.model = model
        self.base = base
        self.region = tuple(sorted(region))
        if any(base.values[v] >= 0 for v in self.region):
            raise UsageError("region vertices must be free in the base pinning")
        if any(base.values[v] < 0 for v in range(model.n) if v not in self.region):
            raise UsageError("base pinning must fix every vertex outside the region")
        q, t = model.q, len(self.region)
        if (2 * q) ** t > cap:
            raise SizeError(f"region of {t} vertices too large to measure")
        self.marg = {}
        self._compute()
        self._delta = {}

    def _compute(self):
        model, q = self.model, self.model.q
        g = model.graph
        reg = self.region
        AE = model.A_E
        zero = model.zero
        for rho in product(range(-1, q), repeat=len(reg)):
            vals = list(self.base.values)
            for v, c in zip(reg, rho):
                vals[v] = c
            free = [v for v, c in zip(reg, rho) if c < 0]
            if not free:
                continue
            pos = {v: i for i, v in enumerate(free)}
            unary = []
            for v in free:
                vec = []
                for c in range(q):
                    w = model.A_V[v][c]
                    for y in g.adj[v]:
                        if vals[y] >= 0:
                            w *= AE[c][vals[y]]
                    vec.append(w)
                unary.append(vec)
            ff = [(pos[a], pos[b]) for a, b in g.edges if a in pos and b in pos]
            acc = [[zero] * q for _ in free]
            total = zero
            doms = [[c for c in range(q) if unary[i][c]] for i in range(len(free))]
            for xs in product(*doms):
                w = model.one
                for i, c in enumerate(xs):
                    w *= unary[i][c]
                for i, j in ff:
                    w *= AE[xs[i]][xs[j]]
                if not w:
                    continue
                total += w
                for i, c in enumerate(xs):
                    acc[i][c] += w
            if not total:
                raise NonPermissiveError("zero conditional partition function in region")
            self.marg[rho] = {v: tuple(a / total for a in acc[i]) for i, v in enumerate(free)}

    @property
    def b(self):
        best = None
        for m in self.marg.values():
            for vec in m.values():
                for p in vec:
                    if p and (best is None or p < best):
                        best = p
        return best

    def delta(self, R: int):
        if R in self._delta:
            return self._delta[R]
        model, q = self.model, self.model.q
        best = model.zero
        reg = self.region
        for zi, z in enumerate(reg):
            sph = sphere(model.graph, z, R)
            targets = [v for v in reg if v in sph]
            if not targets:
                continue
            for rho, m in self.marg.items():
                c1 = rho[zi]
                if c1 < 0:
                    continue
                for c2 in range(c1 + 1, q):
                    other = self.marg[rho[:zi] + (c2,) + rho[zi + 1:]]
                    s = model.zero
                    for v in targets:
                        if v in m:
                            s += sum((abs(a - b) for a, b in zip(m[v], other[v])), model.zero) / 2
                    if s > best:
                        best = s
        self._delta[R] = best
        return best


def measure_delta_global(model: SpinModel, R: int, cap: int = DEFAULT_CAP):
    """Certified upper bound on the sphere influence at radius R over all
    pinnings: exact when the whole graph is small enough to enumerate,
    otherwise the number of vertices on the largest sphere (each TV is at
    most 1); zero once every sphere is empty."""
    g = model.graph
    largest = max(len(sphere(g, z, R)) for z in range(g.n))
    if largest == 0:
        return model.zero
    try:
        rm = RegionMeasure(model, Pinning.empty(model.n), range(model.n), cap)
    except SizeError:
        return model.one * largest
    return rm.delta(R)


def _measured(delta_fn, b, max_degree, R_max, source, k_max, rule, exact):
    """Select R from measured quantities; fall back to the smallest R with an
    empty sphere everywhere (delta = 0) or report an invalid selection."""
    R, d = _select(delta_fn, b, max(max_degree, 1), R_max)
    valid = R is not None
    if not valid:
        R, d = 1, delta_fn(1)
    if d == 0:
        # zero influence: any smaller positive value is still an upper bound;
        # take one that keeps the selection inequality strict
        d = b ** 4 / (60 * to_exact(harmonic_upper(max(max_degree, 1) ** R)))
    eta = d / b
    if not exact:
        eta, b, d = float(eta), float(b), float(d)
    return ParamSet(R=R, eta=eta, b=b, k_max=k_max, mode="measured", delta=d, rule=rule,
                    guarantee_valid=valid, source=source)


def measured_params(model: SpinModel, *, k_max: int = 5, rule: str = "lemma", R_max: int | None = None,
                    cap: int = DEFAULT_CAP, bound_cap: int = BOUND_CAP) -> ParamSet:
    """Parameters from certified measurements over the whole model.

    ``bound_cap`` limits the marginal-bound enumeration and ``cap`` the
    influence enumeration, which falls back to a sphere-size bound."""
    g = model.graph
    b = to_exact(measured_marginal_bound(model, bound_cap))
    if b >= 1:
        b = mpq(1, 2) if model.exact else 0.5
        b = to_exact(b)
    R_max = R_max if R_max is not None else max(g.diameter() if g.is_connected() else g.n, 1) + 1
    return _measured(lambda r: to_exact(measure_delta_global(model, r, cap)), b, g.max_degree,
                     R_max, "global", k_max, rule, model.exact)


def region_params(model: SpinModel, base: Pinning, region, R: int, *, k_max: int = 5,
                  rule: str = "lemma", cap: int = DEFAULT_CAP) -> ParamSet:
    """Parameters measured over the pinnings reachable by the recursion when
    only ``region`` is left free by ``base``; R is fixed by the caller and
    the guarantee flag records whether the selection inequality holds."""
    rm = RegionMeasure(model, base, region, cap)
    b = to_exact(rm.b)
    if b >= 1:
        b = mpq(1, 2)
    d = to_exact(rm.delta(R))
    H = to_exact(harmonic_upper(max(model.graph.max_degree, 1) ** R))
    valid = 30 * d * H < b ** 4
    if d == 0:
        d = b ** 4 / (60 * H)
    eta = d / b
    if not model.exact:
        eta, b, d = float(eta), float(b), float(d)
    return ParamSet(R=R, eta=eta, b=b, k_max=k_max, mode="measured", delta=d, rule=rule,
                    guarantee_valid=bool(valid), source="region")


def theoretical_params(C, b, max_degree: int, *, k_max: int = 5, rule: str = "lemma") -> ParamSet:
    R, eta = select_R(C, b, max_degree)
    return ParamSet(R=R, eta=eta, b=to_exact(b), k_max=k_max, mode="theoretical", C=to_exact(C),
                    delta=delta_rate(C, R), rule=rule, guarantee_valid=True, source="select_R")


# recursion -----------------------------------------------------------------

@dataclass
class Stats:
    calls: int = 0
    memo_hits: int = 0
    max_tree: int = 0
    lp_calls: int = 0
    brute_force: int = 0
    skipped_search: int = 0

    def as_record(self) -> dict:
        return asdict(self)


@dataclass
class Estimator:
    """Holds the model, parameters, memo table and statistics of one run."""
    model: SpinModel
    params: ParamSet
    memo_enabled: bool = True
    lp_method: str = "auto"
    cap: int = DEFAULT_CAP
    stats: Stats = field(default_factory=Stats)
    memo: dict = field(default_factory=dict)

    def __post_init__(self):
        p = self.params
        conv = to_exact if self.model.exact else float
        self.b, self.eta = conv(p.b), conv(p.eta)
        self.schedule = ErrorSchedule(self.b)
        self.max_degree = max(self.model.graph.max_degree, 1)

    def exact(self, sigma, tau):
        self.stats.brute_force += 1
        return exact_ratio(self.model, sigma, tau, self.cap)

    def ratio(self, sigma: Pinning, tau: Pinning, k: int, u: int):
        """Estimate mu(sigma) / mu(tau) for pinnings differing only at u."""
        self.stats.calls += 1
        if k == 0:
            return self.model.one
        key = (sigma, tau, k, u)
        if self.memo_enabled and key in self.memo:
            self.stats.memo_hits += 1
            return self.memo[key]
        val = self._ratio(sigma, tau, k, u)
        if self.memo_enabled:
            self.memo[key] = val
        return val

    def _ratio(self, sigma, tau, k, u):
        model, p = self.model, self.params
        diff = sigma.differences(tau)
        if diff != [u] or sigma.domain != tau.domain:
            raise UsageError("pinnings must differ exactly at the discrepancy vertex")
        if not pinned_weight(model, tau):
            raise InfeasiblePinningError("denominator pinning has zero mass")
        sph = sphere(model.graph, u, p.R)
        if all(sigma.values[v] >= 0 for v in sph):
            return self.exact(sigma, tau)
        margin = self.schedule.margin(k)
        ehat = eps_hat(margin, self.b, self.eta, p.R, self.max_degree, p.rule, model.exact)
        if not search_needed(self.b, ehat):
            # the search would return sqrt(b / b) = 1 without looking at the leaves
            self.stats.skipped_search += 1
            return model.one
        tree = build_tree(model, sigma, tau, u, p.R, share=True)
        self.stats.max_tree = max(self.stats.max_tree, tree.size)
        ratios = {}
        for w in tree.nodes:
            if w.kind == GOOD:
                ratios[w.index] = self.exact(w.sigma, w.tau)
            elif w.kind == BAD:
                ratios[w.index] = self._bad_leaf(w, k, u)
        res = marginal_estimator(tree, ratios, margin, self.b, self.eta, p.R, self.max_degree,
                                 rule=p.rule, exact=model.exact, method=self.lp_method, details=True)
        self.stats.lp_calls += res.lp_calls
        return res.value

    def _bad_leaf(self, w, k, u):
        """R_w = X * Y through an intermediate pinning that differs from each
        end in one vertex. The default intermediate moves u first; when it has
        zero mass the other order is used, and when both do the ratio is
        computed exactly."""
        model = self.model
        v = w.D
        gamma = w.sigma.assign(u, w.tau.values[u])
        if pinned_weight(model, gamma):
            return self.ratio(w.sigma, gamma, k - 1, u) * self.ratio(gamma, w.tau, k - 1, v)
        gamma = w.sigma.assign(v, w.tau.values[v])
        if pinned_weight(model, gamma):
            return self.ratio(w.sigma, gamma, k - 1, v) * self.ratio(gamma, w.tau, k - 1, u)
        return self.exact(w.sigma, w.tau)

    def marginal(self, pin: Pinning, v: int, k: int) -> MarginalDist:
        sup = support(self.model, pin, v)
        if not sup:
            raise InfeasiblePinningError(f"empty support at vertex {v}")
        one, zero = self.model.one, self.model.zero
        probs = [zero] * self.model.q
        if len(sup) == 1:
            probs[sup[0]] = one
            return MarginalDist(v, tuple(probs))
        c0 = sup[0]
        ref = pin.extend(v, c0)
        rho = {c0: one}
        for c in sup[1:]:
            rho[c] = self.ratio(pin.extend(v, c), ref, k, v)
        total = sum(rho.values(), zero)
        for c, r in rho.items():
            probs[c] = r / total
        return MarginalDist(v, tuple(probs))


@dataclass
class Result:
    value: object
    params: dict
    mode: str
    guarantee_valid: bool
    stats: dict
    k: int | None = None

    def as_record(self) -> dict:
        return {"value": format_number(self.value), "params": self.params, "mode": self.mode,
                "guarantee_valid": self.guarantee_valid, "k": self.k, "stats": self.stats}


def recursive_estimator(model: SpinModel, sigma: Pinning, tau: Pinning, k: int, u: int,
                        params: ParamSet, *, memo: bool = True, details: bool = False, **kw):
    if k < 0:
        raise UsageError("k must be nonnegative")
    est = Estimator(model, params, memo_enabled=memo, **kw)
    val = est.ratio(sigma, tau, k, u)
    if not details:
        return val
    return Result(val, params.as_record(), params.mode, params.guarantee_valid,
                  est.stats.as_record(), k)


def marginal_from_ratios(model: SpinModel, pin: Pinning, v: int, k: int, params: ParamSet,
                         *, memo: bool = True, **kw) -> MarginalDist:
    if pin.values[v] >= 0:
        raise UsageError(f"vertex {v} is pinned")
    return Estimator(model, params, memo_enabled=memo, **kw).marginal(pin, v, k)


def depth_for(n: int, eps) -> int:
    """ceil(log2(n / eps)) + 1, exact."""
    x = mpq(n) / to_exact(eps)
    k = 0
    while mpq(2) ** k < x:
        k += 1
    return k + 1


def estimate_partition(model: SpinModel, eps, params: ParamSet, *, k: int | None = None,
                       memo: bool = True, details: bool = False, **kw):
    """Z estimate as weight(x*) over the product of estimated marginals along
    a greedy reference configuration x*."""
    eps = to_exact(eps)
    if not 0 < eps < 1:
        raise UsageError("eps must lie in (0, 1)")
    x = greedy_configuration(model)
    k = depth_for(model.n, eps) if k is None else k
    est = Estimator(model, params, memo_enabled=memo, **kw)
    denom = model.one
    pin = Pinning.empty(model.n)
    for v in range(model.n):
        mu = est.marginal(pin, v, k)
        if not mu[x[v]]:
            raise NonPermissiveError("reference configuration has zero estimated marginal")
        denom *= mu[x[v]]
        pin = pin.extend(v, x[v])
    val = weight(model, x) / denom
    if not details:
        return val
    return Result(val, params.as_record(), params.mode, params.guarantee_valid,
                  est.stats.as_record(), k)
