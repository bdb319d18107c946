"""The feasibility LP over a coupling tree and the binary-search ratio
estimator built on it.

Two exact solvers decide feasibility:

* ``"simplex"`` builds the LP literally (two variables per node) and runs the
  two-phase simplex.
* ``"tree"`` uses the tree structure. Variables of a subtree meet the rest of
  the LP only through the subtree root's pair (x_w, y_w), so the feasible pairs
  form a cone {alpha*y <= x <= beta*y}. Cones are computed bottom-up; an
  internal node needs two small LPs (min and max of x_w with y_w = 1) over its
  children, each child written through the two extreme rays of its cone.

``"auto"`` uses the literal LP for small unshared trees and the tree solver
otherwise. Both return the same verdict (tested).
"""
from dataclasses import dataclass, field

from gmpy2 import mpq

from .arith import exact_sqrt, harmonic, harmonic_upper, to_exact
from .couptree import BAD, GOOD, INTERNAL, CouplingTree
from .errors import BracketingError, SolverError, UsageError
from .model import support
from .simplex import solve, solve_range

__all__ = ["LPInstance", "build_lp", "feasible", "marginal_estimator", "harmonic", "root_cone",
           "eps_hat", "dump_lp", "witness_solution", "gamma_sums", "search_iteration_bound"]

AUTO_LITERAL_LIMIT = 40
FLOAT_TOL = 1e-9


@dataclass
class Constraint:
    family: str  # validity, recursive, leaf, overflow
    coeffs: dict  # variable index -> coefficient
    sense: str  # "==", "<=", ">="
    rhs: object
    name: str = ""


@dataclass
class LPInstance:
    tree: CouplingTree
    ratios: dict
    r_minus: object
    r_plus: object
    eps: object
    eta: object
    exact: bool
    names: list = field(default_factory=list)
    constraints: list = field(default_factory=list)

    @property
    def num_vars(self) -> int:
        return len(self.names)

    def x(self, node) -> int:
        return 2 * node.index

    def y(self, node) -> int:
        return 2 * node.index + 1


def _num(x, exact):
    return to_exact(x) if exact else float(x)


def _leaf_bounds(kind, R_w, r_minus, r_plus, eps):
    """Cone of a leaf: lower and upper multipliers of y_w bounding x_w."""
    if kind == GOOD:
        return r_minus / R_w, r_plus / R_w
    return r_minus / ((1 + eps) * R_w), r_plus * (1 + eps) / R_w


def build_lp(tree: CouplingTree, ratios: dict, r_minus, r_plus, eps, eta, exact: bool | None = None) -> LPInstance:
    """Write out the LP literally. ``ratios`` maps leaf node index to R_w."""
    if exact is None:
        exact = tree.model.exact
    r_minus, r_plus = _num(r_minus, exact), _num(r_plus, exact)
    eps, eta = _num(eps, exact), _num(eta, exact)
    if not 0 < r_minus <= r_plus:
        raise UsageError("need 0 < r_minus <= r_plus")
    if eps < 0 or eta <= 0:
        raise UsageError("need eps >= 0 and eta > 0")
    lp = LPInstance(tree, ratios, r_minus, r_plus, eps, eta, exact)
    one = _num(1, exact)
    for w in tree.nodes:
        lp.names += [f"x{w.index}", f"y{w.index}"]
    rt = tree.root
    lp.constraints.append(Constraint("validity", {lp.x(rt): one}, "==", one, "x_root"))
    lp.constraints.append(Constraint("validity", {lp.y(rt): one}, "==", one, "y_root"))
    model = tree.model
    for w in tree.nodes:
        if w.kind == INTERNAL:
            inv = one / w.ell
            for v in tree.remaining(w):
                for c in support(model, w.sigma, v):
                    co = {lp.x(ch): one for ch, e in zip(w.children, w.edges) if e[0] == v and e[1] == c}
                    co[lp.x(w)] = co.get(lp.x(w), 0 * one) - inv
                    lp.constraints.append(Constraint("recursive", co, "==", 0 * one, f"rx{w.index}_{v}_{c}"))
                for c in support(model, w.tau, v):
                    co = {lp.y(ch): one for ch, e in zip(w.children, w.edges) if e[0] == v and e[2] == c}
                    co[lp.y(w)] = co.get(lp.y(w), 0 * one) - inv
                    lp.constraints.append(Constraint("recursive", co, "==", 0 * one, f"ry{w.index}_{v}_{c}"))
            bad = [ch for ch in w.children if ch.kind == BAD]
            cx = {lp.x(ch): one for ch in bad}
            cx[lp.x(w)] = -eta / w.ell
            cy = {lp.y(ch): one for ch in bad}
            cy[lp.y(w)] = -eta / w.ell
            lp.constraints.append(Constraint("overflow", cx, "<=", 0 * one, f"ox{w.index}"))
            lp.constraints.append(Constraint("overflow", cy, "<=", 0 * one, f"oy{w.index}"))
        else:
            if w.index not in ratios:
                raise UsageError(f"no ratio given for leaf {w.index}")
            R_w = _num(ratios[w.index], exact)
            if R_w <= 0:
                raise UsageError("leaf ratios must be positive")
            lo, hi = _leaf_bounds(w.kind, R_w, r_minus, r_plus, eps)
            lp.constraints.append(Constraint("leaf", {lp.x(w): one, lp.y(w): -lo}, ">=", 0 * one, f"ll{w.index}"))
            lp.constraints.append(Constraint("leaf", {lp.x(w): one, lp.y(w): -hi}, "<=", 0 * one, f"lu{w.index}"))
    return lp


def _solve_literal(lp: LPInstance, tol: float) -> bool:
    rows = [c.coeffs for c in lp.constraints]
    senses = [c.sense for c in lp.constraints]
    rhs = [c.rhs for c in lp.constraints]
    res = solve(lp.num_vars, rows, senses, rhs, exact=lp.exact, tol=tol)
    return res.status == "optimal"


def _highs_range(ncols, rows, senses, rhs):
    """Float (status, min, max) of column 0 with scipy's HiGHS."""
    import numpy as np
    from scipy.optimize import linprog

    A_eq, b_eq, A_ub, b_ub = [], [], [], []
    for row, sense, b in zip(rows, senses, rhs):
        dense = np.zeros(ncols)
        for j, a in row.items():
            dense[j] = float(a)
        if sense == "==":
            A_eq.append(dense), b_eq.append(float(b))
        elif sense == "<=":
            A_ub.append(dense), b_ub.append(float(b))
        else:
            A_ub.append(-dense), b_ub.append(-float(b))
    kw = dict(A_ub=np.array(A_ub) if A_ub else None, b_ub=b_ub or None,
              A_eq=np.array(A_eq) if A_eq else None, b_eq=b_eq or None,
              bounds=(0, None), method="highs")
    out = []
    for sign in (1.0, -1.0):
        c = np.zeros(ncols)
        c[0] = sign
        res = linprog(c, **kw)
        if res.status == 2:
            return "infeasible", None, None
        if res.status == 3:
            out.append(None)
        elif res.status != 0:
            raise SolverError(f"HiGHS failed: {res.message}")
        else:
            out.append(float(res.x[0]))
    return "optimal", out[0], out[1]


def _node_cone(tree, w, ratios, r_minus, r_plus, eps, eta, exact, tol, memo, backend="simplex"):
    """(alpha, beta) with feasible (x_w, y_w) = {alpha*y <= x <= beta*y},
    or None when only x_w = y_w = 0 is feasible."""
    key = w.index
    if key in memo:
        return memo[key]
    if w.kind != INTERNAL:
        if w.index not in ratios:
            raise UsageError(f"no ratio given for leaf {w.index}")
        R_w = _num(ratios[w.index], exact)
        if R_w <= 0:
            raise UsageError("leaf ratios must be positive")
        cone = _leaf_bounds(w.kind, R_w, r_minus, r_plus, eps)
        memo[key] = cone
        return cone
    cones = [_node_cone(tree, ch, ratios, r_minus, r_plus, eps, eta, exact, tol, memo, backend)
             for ch in w.children]
    ncols, rows, senses, rhs = _local_rows(tree, w, cones, eta, exact)
    if backend == "highs":
        status, lo, hi = _highs_range(ncols, rows, senses, rhs)
    else:
        status, lo, hi = solve_range(ncols, rows, senses, rhs, {0: 1}, exact=exact, tol=tol)
    if status == "infeasible":
        memo[key] = None
        return None
    if lo is None or hi is None:
        raise SolverError(f"local LP at node {w.index} is unbounded")
    memo[key] = (lo, hi)
    return lo, hi


def _local_rows(tree, w, cones, eta, exact, fixed_rho=None):
    """Rows of the LP coupling node w to its children.

    Column 0 is rho = x_w / y_w (absent when ``fixed_rho`` is given); each child
    with a nonzero cone gets one column per extreme ray (alpha, 1), (beta, 1).
    """
    one = _num(1, exact)
    zero = 0 * one
    inv = one / w.ell
    col = 0 if fixed_rho is not None else 1
    cols = []  # per child: list of (column, x-coefficient)
    for cone in cones:
        if cone is None:
            cols.append([])
            continue
        a, b = cone
        if a == b:
            cols.append([(col, a)])
            col += 1
        else:
            cols.append([(col, a), (col + 1, b)])
            col += 2
    rows, senses, rhs = [], [], []
    model = tree.model
    for v in tree.remaining(w):
        for c in support(model, w.sigma, v):
            row = {}
            for e, cc in zip(w.edges, cols):
                if e[0] == v and e[1] == c:
                    for j, xa in cc:
                        row[j] = xa
            if fixed_rho is None:
                row[0] = -inv
                rows.append(row), senses.append("=="), rhs.append(zero)
            else:
                rows.append(row), senses.append("=="), rhs.append(fixed_rho * inv)
        for c in support(model, w.tau, v):
            row = {}
            for e, cc in zip(w.edges, cols):
                if e[0] == v and e[2] == c:
                    for j, _ in cc:
                        row[j] = one
            rows.append(row), senses.append("=="), rhs.append(inv)
    ox, oy = {}, {}
    for ch, cc in zip(w.children, cols):
        if ch.kind == BAD:
            for j, xa in cc:
                ox[j] = xa
                oy[j] = one
    if fixed_rho is None:
        ox[0] = -eta * inv
        rows.append(ox), senses.append("<="), rhs.append(zero)
    else:
        rows.append(ox), senses.append("<="), rhs.append(eta * inv * fixed_rho)
    rows.append(oy), senses.append("<="), rhs.append(eta * inv)
    return col, rows, senses, rhs


def _solve_tree(lp_tree, ratios, r_minus, r_plus, eps, eta, exact, tol) -> bool:
    root = lp_tree.root
    if root.kind != INTERNAL:
        lo, hi = _node_cone(lp_tree, root, ratios, r_minus, r_plus, eps, eta, exact, tol, {})
        return lo <= 1 <= hi if exact else lo <= 1 + tol and 1 - tol <= hi
    memo = {}
    cones = [_node_cone(lp_tree, ch, ratios, r_minus, r_plus, eps, eta, exact, tol, memo)
             for ch in root.children]
    ncols, rows, senses, rhs = _local_rows(lp_tree, root, cones, eta, exact,
                                           fixed_rho=_num(1, exact))
    return solve(ncols, rows, senses, rhs, exact=exact, tol=tol).status == "optimal"


def root_cone(tree: CouplingTree, ratios: dict, r_minus, r_plus, eps, eta, exact: bool | None = None,
              tol: float = FLOAT_TOL, backend: str = "simplex"):
    """(alpha, beta) such that the LP without the root equalities admits
    x_rt / y_rt exactly in [alpha, beta] (None: only the zero solution).

    The LP is feasible iff alpha <= 1 <= beta. Scaling r_minus and r_plus by
    the same factor scales the cone by that factor, so one cone answers a
    whole family of brackets with a fixed ratio r_plus / r_minus.

    ``backend="highs"`` solves the local LPs with scipy's HiGHS in floating
    point (fast, not exact); it requires ``exact=False``.
    """
    if exact is None:
        exact = tree.model.exact
    if backend not in ("simplex", "highs"):
        raise UsageError(f"unknown backend {backend!r}")
    if backend == "highs" and exact:
        raise UsageError("the HiGHS backend works in floating point only")
    return _node_cone(tree, tree.root, ratios, _num(r_minus, exact), _num(r_plus, exact),
                      _num(eps, exact), _num(eta, exact), exact, tol, {}, backend)


def feasible(lp: LPInstance, method: str = "auto", tol: float = FLOAT_TOL) -> bool:
    """Exact feasibility verdict (float mode: up to the pivot tolerance)."""
    if method == "auto":
        method = "simplex" if (not lp.tree.shared and lp.tree.size <= AUTO_LITERAL_LIMIT) else "tree"
    if method == "simplex":
        if lp.tree.shared:
            raise UsageError("the literal LP needs an unshared tree")
        if not lp.constraints:
            lp = build_lp(lp.tree, lp.ratios, lp.r_minus, lp.r_plus, lp.eps, lp.eta, lp.exact)
        return _solve_literal(lp, tol)
    if method == "tree":
        return _solve_tree(lp.tree, lp.ratios, lp.r_minus, lp.r_plus, lp.eps, lp.eta, lp.exact, tol)
    raise UsageError(f"unknown LP method {method!r}")


def check(tree, ratios, r_minus, r_plus, eps, eta, exact=None, method="auto", tol=FLOAT_TOL) -> bool:
    """Feasibility of LP(r_minus, r_plus) without materialising constraints
    unless the literal solver is used."""
    if exact is None:
        exact = tree.model.exact
    if method == "auto":
        method = "simplex" if (not tree.shared and tree.size <= AUTO_LITERAL_LIMIT) else "tree"
    if method == "simplex":
        return feasible(build_lp(tree, ratios, r_minus, r_plus, eps, eta, exact), "simplex", tol)
    lp = LPInstance(tree, ratios, _num(r_minus, exact), _num(r_plus, exact), _num(eps, exact),
                    _num(eta, exact), exact)
    return feasible(lp, "tree", tol)


def eps_hat(eps, b, eta, R: int, max_degree: int, rule: str = "lemma", exact: bool = True):
    """Guaranteed relative error of the binary search for leaf error eps.

    ``rule="lemma"`` gives 5 b^-2 eta H(Delta^R) eps; ``rule="loop"`` drops the
    5 b^-2 factor (compatibility with the loop threshold written without it).
    """
    H = harmonic_upper(max_degree ** R)
    if exact:
        H = to_exact(H)
        eps, b, eta = to_exact(eps), to_exact(b), to_exact(eta)
    else:
        H, eps, b, eta = float(H), float(eps), float(b), float(eta)
    if rule == "lemma":
        return 5 * eta * H * eps / (b * b)
    if rule == "loop":
        return eta * H * eps
    raise UsageError(f"unknown rule {rule!r}")


def search_iteration_bound(b, ehat) -> int:
    """ceil(log2((1/b - b) / (b * ehat^2))) + 2, computed exactly."""
    b, ehat = to_exact(b), to_exact(ehat)
    x = (1 / b - b) / (b * ehat * ehat)
    k = 0
    while mpq(2) ** k < x:
        k += 1
    return k + 2


@dataclass
class SearchResult:
    value: object
    iterations: int
    lp_calls: int
    eps_hat: object
    early: bool


def marginal_estimator(tree: CouplingTree, ratios: dict, eps, b, eta, R: int | None = None,
                       max_degree: int | None = None, *, rule: str = "lemma", exact: bool | None = None,
                       method: str = "auto", tol: float = FLOAT_TOL, details: bool = False):
    """Binary search on [b, 1/b] for the ratio certified by the LP."""
    if exact is None:
        exact = tree.model.exact
    R = tree.R if R is None else R
    max_degree = tree.model.graph.max_degree if max_degree is None else max_degree
    b, eps, eta = _num(b, exact), _num(eps, exact), _num(eta, exact)
    if not 0 < b < 1:
        raise UsageError("b must lie in (0, 1)")
    if eps > 3 / (b * b):
        raise UsageError("eps must be at most 3 b^-2")
    ehat = eps_hat(eps, b, eta, R, max(max_degree, 1), rule, exact)
    if ehat <= 0:
        raise UsageError("eps must be positive, otherwise the search never stops")
    if not exact:
        return _float_search(tree, ratios, eps, b, eta, ehat, R, max_degree, rule, method, tol, details)
    r_low, r_upp = b, 1 / b
    its = calls = 0
    limit = (1 + ehat) ** 2
    while r_upp > limit * r_low:
        its += 1
        m = (r_low + r_upp) / 2
        left = check(tree, ratios, r_low, m, eps, eta, exact, method, tol)
        right = check(tree, ratios, m, r_upp, eps, eta, exact, method, tol)
        calls += 2
        if left and right:
            out = SearchResult(m, its, calls, ehat, True)
            return out if details else m
        if left:
            r_upp = m
        elif right:
            r_low = m
        else:
            raise BracketingError(f"both halves infeasible at midpoint {m}")
    out = SearchResult(exact_sqrt(r_low * r_upp), its, calls, ehat, False)
    return out if details else out.value


def _float_search(tree, ratios, eps, b, eta, ehat, R, max_degree, rule, method, tol, details):
    tol_now = tol
    while True:
        r_low, r_upp = b, 1 / b
        its = calls = 0
        try:
            while r_upp > (1 + ehat) ** 2 * r_low:
                its += 1
                m = (r_low + r_upp) / 2
                left = check(tree, ratios, r_low, m, eps, eta, False, method, tol_now)
                right = check(tree, ratios, m, r_upp, eps, eta, False, method, tol_now)
                calls += 2
                if left and right:
                    out = SearchResult(m, its, calls, ehat, True)
                    return out if details else m
                if left:
                    r_upp = m
                elif right:
                    r_low = m
                else:
                    raise BracketingError(f"both halves infeasible at midpoint {m}")
            out = SearchResult((r_low * r_upp) ** 0.5, its, calls, ehat, False)
            return out if details else out.value
        except (BracketingError, SolverError):
            if tol_now * 10 <= 1e-6:
                tol_now *= 10
                continue
            break
    exact_ratios = {k: to_exact(v) for k, v in ratios.items()}
    res = marginal_estimator(tree, exact_ratios, to_exact(eps), to_exact(b), to_exact(eta),
                             R, max_degree, exact=True, method=method, details=True, rule=rule)
    res.value = float(res.value)
    return res if details else res.value


def search_needed(b, ehat) -> bool:
    """Whether the binary search runs at least once; if not, the estimator
    returns sqrt(b * 1/b) = 1 whatever the leaf ratios are."""
    return 1 / b > (1 + ehat) ** 2 * b


def _maximal_coupling(p, r):
    """Optimal coupling of two distributions on [q] as {(c1, c2): mass}."""
    q = len(p)
    diag = [min(p[c], r[c]) for c in range(q)]
    tv = sum(p) - sum(diag)
    out = {(c, c): diag[c] for c in range(q) if diag[c]}
    if tv:
        for c1 in range(q):
            a = p[c1] - diag[c1]
            if not a:
                continue
            for c2 in range(q):
                bb = r[c2] - diag[c2]
                if bb:
                    out[(c1, c2)] = a * bb / tv
    return out


def witness_solution(tree: CouplingTree, cap: int | None = None) -> tuple:
    """The feasible point built from the reach probabilities of the partial
    coupling that reveals a uniformly random remaining sphere vertex and
    couples its two conditional marginals optimally.

    Returns (z, x, y) as dicts over node index: z is the reach probability,
    x_w = z_w * mu(sigma) / mu(sigma^w) and y_w likewise for tau.
    """
    from .oracle import DEFAULT_CAP, exact_marginal

    if tree.shared:
        raise UsageError("witness needs an unshared tree")
    cap = DEFAULT_CAP if cap is None else cap
    model = tree.model
    one = model.one
    z, x, y = {tree.root.index: one}, {tree.root.index: one}, {tree.root.index: one}
    for w in tree.nodes:  # parents precede children
        if w.kind != INTERNAL:
            continue
        marg = {}
        for v in tree.remaining(w):
            p = exact_marginal(model, w.sigma, v, cap).probs
            r = exact_marginal(model, w.tau, v, cap).probs
            marg[v] = (p, r, _maximal_coupling(p, r))
        for ch, (v, c1, c2) in zip(w.children, w.edges):
            p, r, pi = marg[v]
            m = pi.get((c1, c2), 0 * one)
            z[ch.index] = z[w.index] * m / w.ell
            x[ch.index] = x[w.index] * m / (w.ell * p[c1])
            y[ch.index] = y[w.index] * m / (w.ell * r[c2])
    return z, x, y


def gamma_sums(tree: CouplingTree, x: dict, y: dict, cap: int | None = None) -> tuple:
    """Depth-class sums (Gx, Gy) of mu(sigma^w) x_w over leaves.

    Index 0 collects the good leaves; index i >= 1 the bad leaves with i - 1
    sphere vertices still free.
    """
    from .oracle import DEFAULT_CAP, pinning_probability

    cap = DEFAULT_CAP if cap is None else cap
    model = tree.model
    ell = tree.root.ell
    gx = [model.zero] * (ell + 1)
    gy = [model.zero] * (ell + 1)
    for w in tree.nodes:
        if w.kind == INTERNAL:
            continue
        i = 0 if w.kind == GOOD else w.ell + 1
        gx[i] += pinning_probability(model, w.sigma, cap) * x[w.index]
        gy[i] += pinning_probability(model, w.tau, cap) * y[w.index]
    return gx, gy


def dump_lp(lp: LPInstance) -> str:
    """CPLEX LP text format with a zero objective."""
    if not lp.constraints:
        raise UsageError("LP has no materialised constraints")

    def term(coef, name):
        val = float(coef) if not lp.exact else coef
        s = repr(val) if isinstance(val, float) else f"{float(val)!r}"
        return f"{'+' if val >= 0 else '-'} {s.lstrip('-')} {name}"

    out = ["\\ coupling-tree feasibility LP", "\\ exact coefficients are written as decimals",
           "Minimize", " obj: 0 x0", "Subject To"]
    for k, c in enumerate(lp.constraints):
        lhs = " ".join(term(a, lp.names[j]) for j, a in sorted(c.coeffs.items()))
        sense = {"==": "=", "<=": "<=", ">=": ">="}[c.sense]
        out.append(f" {c.name or 'c' + str(k)}: {lhs} {sense} {float(c.rhs)!r}")
    out.append("Bounds")
    for name in lp.names:
        out.append(f" {name} >= 0")
    out.append("End")
    return "\n".join(out) + "\n"
