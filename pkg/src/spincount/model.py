"""Graphs, pairwise spin systems, pinnings, weights and local supports.

Colours are 0-indexed here; the command-line formats shift them by one.
"""
from collections import deque
from functools import cached_property
from itertools import combinations, product
from typing import Iterable, Mapping, Sequence

from .arith import convert, is_exact, to_exact
from .errors import NonPermissiveError, SizeError, UsageError, ValidationError


class Graph:
    """A finite simple undirected graph on vertices 0..n-1."""

    __slots__ = ("n", "edges", "adj", "__dict__")

    def __init__(self, n: int, edges: Iterable[tuple[int, int]] = ()):
        if n < 0:
            raise ValidationError("vertex count must be nonnegative")
        seen = set()
        adj = [[] for _ in range(n)]
        for u, v in edges:
            u, v = int(u), int(v)
            if not (0 <= u < n and 0 <= v < n):
                raise ValidationError(f"edge ({u}, {v}) outside 0..{n - 1}")
            if u == v:
                raise ValidationError(f"self-loop at {u}")
            e = (min(u, v), max(u, v))
            if e in seen:
                raise ValidationError(f"duplicate edge {e}")
            seen.add(e)
            adj[u].append(v)
            adj[v].append(u)
        self.n = n
        self.edges = tuple(sorted(seen))
        self.adj = tuple(tuple(sorted(a)) for a in adj)

    def __eq__(self, other):
        return isinstance(other, Graph) and self.n == other.n and self.edges == other.edges

    def __hash__(self):
        return hash((self.n, self.edges))

    def __repr__(self):
        return f"Graph(n={self.n}, edges={list(self.edges)})"

    @property
    def max_degree(self) -> int:
        return max((len(a) for a in self.adj), default=0)

    def degree(self, v: int) -> int:
        return len(self.adj[v])

    def has_edge(self, u: int, v: int) -> bool:
        return v in self._adjsets[u]

    @cached_property
    def _adjsets(self):
        return tuple(frozenset(a) for a in self.adj)

    @cached_property
    def _dist(self):
        return tuple(self._bfs(v) for v in range(self.n))

    def _bfs(self, s: int) -> tuple:
        dist = [-1] * self.n
        dist[s] = 0
        queue = deque([s])
        while queue:
            x = queue.popleft()
            for y in self.adj[x]:
                if dist[y] < 0:
                    dist[y] = dist[x] + 1
                    queue.append(y)
        return tuple(dist)

    def distance(self, u: int, v: int) -> int:
        """Graph distance, or -1 when u and v are disconnected."""
        return self._dist[u][v]

    def is_connected(self) -> bool:
        return self.n == 0 or all(d >= 0 for d in self._dist[0])

    def diameter(self) -> int:
        """Largest finite distance between two vertices."""
        return max((d for row in self._dist for d in row), default=0)


def sphere(g: Graph, v: int, ell: int) -> frozenset:
    """Vertices at distance exactly ell from v."""
    if not 0 <= v < g.n:
        raise UsageError(f"vertex {v} not in graph")
    return frozenset(x for x, d in enumerate(g._dist[v]) if d == ell)


def ball(g: Graph, v: int, ell: int) -> frozenset:
    """Vertices at distance at most ell from v."""
    if not 0 <= v < g.n:
        raise UsageError(f"vertex {v} not in graph")
    return frozenset(x for x, d in enumerate(g._dist[v]) if 0 <= d <= ell)


class Pinning:
    """A partial assignment, stored as a tuple with -1 marking free vertices.

    Pinnings may be locally infeasible. Instances are immutable and hashable.
    """

    __slots__ = ("values", "_hash")

    def __init__(self, values: Sequence[int]):
        self.values = tuple(int(c) for c in values)
        self._hash = hash(self.values)

    @classmethod
    def empty(cls, n: int) -> "Pinning":
        return cls((-1,) * n)

    @classmethod
    def from_dict(cls, n: int, mapping: Mapping[int, int]) -> "Pinning":
        vals = [-1] * n
        for v, c in mapping.items():
            if not 0 <= v < n:
                raise UsageError(f"vertex {v} outside 0..{n - 1}")
            if c < 0:
                raise UsageError(f"negative colour {c}")
            vals[v] = c
        return cls(vals)

    def __eq__(self, other):
        return isinstance(other, Pinning) and self.values == other.values

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"Pinning({self.as_dict()})"

    def __len__(self):
        return len(self.values)

    def __contains__(self, v: int) -> bool:
        return self.values[v] >= 0

    def __getitem__(self, v: int) -> int:
        c = self.values[v]
        if c < 0:
            raise KeyError(v)
        return c

    @property
    def n(self) -> int:
        return len(self.values)

    @property
    def domain(self) -> frozenset:
        return frozenset(v for v, c in enumerate(self.values) if c >= 0)

    def free(self) -> list:
        return [v for v, c in enumerate(self.values) if c < 0]

    def as_dict(self) -> dict:
        return {v: c for v, c in enumerate(self.values) if c >= 0}

    def extend(self, v: int, c: int) -> "Pinning":
        if self.values[v] >= 0:
            raise UsageError(f"vertex {v} is already pinned")
        return self.assign(v, c)

    def assign(self, v: int, c: int) -> "Pinning":
        """Set v to c whether or not v is already pinned."""
        vals = list(self.values)
        vals[v] = c
        return Pinning(vals)

    def unpin(self, v: int) -> "Pinning":
        vals = list(self.values)
        vals[v] = -1
        return Pinning(vals)

    def differences(self, other: "Pinning") -> list:
        """Vertices where the two pinnings disagree (including domain mismatch)."""
        return [v for v, (a, b) in enumerate(zip(self.values, other.values)) if a != b]


def extend(pin: Pinning, v: int, c: int) -> Pinning:
    return pin.extend(v, c)


class SpinModel:
    """A pairwise spin system (G, q, A_E, A_V) with per-vertex vertex weights.

    ``exact`` is True when every entry is rational; entries are then mpq.
    """

    def __init__(self, graph: Graph, q: int, A_E, A_V, *, kind: str = "general",
                 spec: dict | None = None, exact: bool | None = None):
        if q < 2:
            raise ValidationError("q must be at least 2")
        A_E = [list(row) for row in A_E]
        if len(A_E) != q or any(len(row) != q for row in A_E):
            raise ValidationError("A_E must be q x q")
        if len(A_V) == q and not isinstance(A_V[0], (list, tuple)):
            A_V = [list(A_V)] * graph.n
        A_V = [list(vec) for vec in A_V]
        if len(A_V) != graph.n or any(len(vec) != q for vec in A_V):
            raise ValidationError("A_V must give a q-vector for every vertex")
        flat = [x for row in A_E for x in row] + [x for vec in A_V for x in vec]
        if exact is None:
            exact = all(is_exact(x) or isinstance(x, str) for x in flat)
        try:
            A_E = [[convert(x, exact) for x in row] for row in A_E]
            A_V = [[convert(x, exact) for x in vec] for vec in A_V]
        except (TypeError, ValueError) as exc:
            raise ValidationError(str(exc)) from exc
        for x in [x for row in A_E for x in row] + [x for vec in A_V for x in vec]:
            if x < 0:
                raise ValidationError("negative weight entry")
        for i in range(q):
            for j in range(i):
                if A_E[i][j] != A_E[j][i]:
                    raise ValidationError("A_E must be symmetric")
        self.graph = graph
        self.q = q
        self.A_E = tuple(tuple(row) for row in A_E)
        self.A_V = tuple(tuple(vec) for vec in A_V)
        self.exact = exact
        self.kind = kind
        self.spec = dict(spec or {})
        self.one = to_exact(1) if exact else 1.0
        self.zero = to_exact(0) if exact else 0.0

    @property
    def n(self) -> int:
        return self.graph.n

    def __eq__(self, other):
        return (isinstance(other, SpinModel) and self.graph == other.graph and self.q == other.q
                and self.A_E == other.A_E and self.A_V == other.A_V)

    def __hash__(self):
        return hash((self.graph, self.q, self.A_E, self.A_V))

    def __repr__(self):
        return f"SpinModel(kind={self.kind!r}, n={self.n}, q={self.q}, exact={self.exact})"

    def with_graph(self, graph: Graph) -> "SpinModel":
        return SpinModel(graph, self.q, self.A_E, self.A_V, kind=self.kind, spec=self.spec,
                         exact=self.exact)

    def is_colouring_like(self) -> bool:
        """True when A_E has a zero diagonal and ones elsewhere."""
        return all(self.A_E[i][j] == (0 if i == j else 1)
                   for i in range(self.q) for j in range(self.q))


def coloring(graph: Graph, q: int) -> SpinModel:
    A_E = [[0 if i == j else 1 for j in range(q)] for i in range(q)]
    return SpinModel(graph, q, A_E, [[1] * q] * graph.n, kind="coloring", spec={"q": q})


def list_coloring(graph: Graph, q: int, lists: Sequence[Iterable[int]]) -> SpinModel:
    if len(lists) != graph.n:
        raise ValidationError("one list per vertex required")
    A_V = []
    for L in lists:
        L = set(L)
        if any(not 0 <= c < q for c in L):
            raise ValidationError("list colour out of range")
        A_V.append([1 if c in L else 0 for c in range(q)])
    A_E = [[0 if i == j else 1 for j in range(q)] for i in range(q)]
    spec = {"q": q, "lists": [sorted(set(L)) for L in lists]}
    return SpinModel(graph, q, A_E, A_V, kind="list-coloring", spec=spec)


def hardcore(graph: Graph, lam) -> SpinModel:
    """Colour 0 is unoccupied, colour 1 occupied with fugacity lam."""
    exact = is_exact(lam) or isinstance(lam, str)
    lam = convert(lam, exact)
    return SpinModel(graph, 2, [[1, 1], [1, 0]], [[1, lam]] * graph.n, kind="hardcore",
                     spec={"lambda": lam}, exact=exact)


def ising(graph: Graph, beta=None, field=0.0, *, coupling=None, field_weight=None) -> SpinModel:
    """Two-state model with A_E = [[a, 1], [1, a]] and A_V = [h, 1/h].

    Give ``beta``/``field`` (a = exp(2 beta), h = exp(field), floats) or the
    weights ``coupling``/``field_weight`` directly (kept exact if rational).
    """
    import math

    if coupling is None:
        if beta is None:
            raise ValidationError("ising needs beta or coupling")
        a = math.exp(2 * float(beta))
        h = math.exp(float(field))
        return SpinModel(graph, 2, [[a, 1.0], [1.0, a]], [[h, 1 / h]] * graph.n, kind="ising",
                         spec={"beta": float(beta), "field": float(field)}, exact=False)
    exact = (is_exact(coupling) or isinstance(coupling, str)) and (
        field_weight is None or is_exact(field_weight) or isinstance(field_weight, str))
    a = convert(coupling, exact)
    h = convert(1 if field_weight is None else field_weight, exact)
    if h <= 0:
        raise ValidationError("field weight must be positive")
    return SpinModel(graph, 2, [[a, 1], [1, a]], [[h, 1 / h]] * graph.n, kind="ising",
                     spec={"coupling": a, "field_weight": h}, exact=exact)


def weight(model: SpinModel, x: Sequence[int]):
    """Product of edge and vertex weights of a total configuration."""
    if len(x) != model.n:
        raise UsageError("configuration must assign every vertex")
    w = model.one
    for v in range(model.n):
        w *= model.A_V[v][x[v]]
        if not w:
            return model.zero
    for u, v in model.graph.edges:
        w *= model.A_E[x[u]][x[v]]
        if not w:
            return model.zero
    return w


def conditional_weight(model: SpinModel, pin: Pinning, x: Sequence[int]):
    """Weight seen by the free vertices: zero unless x extends pin.

    Factors internal to the pinned set are left out.
    """
    pv = pin.values
    for v, c in enumerate(pv):
        if c >= 0 and x[v] != c:
            return model.zero
    w = model.one
    for v in range(model.n):
        if pv[v] < 0:
            w *= model.A_V[v][x[v]]
    for u, v in model.graph.edges:
        if pv[u] < 0 or pv[v] < 0:
            w *= model.A_E[x[u]][x[v]]
    return w


def pinned_weight(model: SpinModel, pin: Pinning):
    """Product of the factors internal to the pinned set."""
    pv = pin.values
    w = model.one
    for v, c in enumerate(pv):
        if c >= 0:
            w *= model.A_V[v][c]
    for u, v in model.graph.edges:
        if pv[u] >= 0 and pv[v] >= 0:
            w *= model.A_E[pv[u]][pv[v]]
    return w


def support(model: SpinModel, pin: Pinning, v: int) -> tuple:
    """Colours allowed at free vertex v by its own weight and its pinned neighbours."""
    pv = pin.values
    if pv[v] >= 0:
        raise UsageError(f"vertex {v} is pinned")
    AE = model.A_E
    nbr_cols = [pv[u] for u in model.graph.adj[v] if pv[u] >= 0]
    return tuple(c for c in range(model.q)
                 if model.A_V[v][c] and all(AE[c][d] for d in nbr_cols))


def is_locally_feasible(model: SpinModel, pin: Pinning) -> bool:
    """True when every factor inside the pinned set is positive."""
    return bool(pinned_weight(model, pin))


def is_permissive_exhaustive(model: SpinModel, literal: bool = False, max_states: int = 10 ** 6) -> bool:
    """Decide permissiveness.

    Default: every vertex keeps a nonempty support under every assignment of
    its neighbours. Empty support under some neighbour assignment gives a
    pinning with zero conditional partition function; conversely nonempty
    supports let any pinning be completed greedily, so the check is exact.
    ``literal=True`` enumerates every pinning on every subset instead.
    """
    g, q = model.graph, model.q
    if not literal:
        if sum(q ** g.degree(v) for v in range(g.n)) > max_states:
            raise SizeError("too many neighbourhood assignments")
        for v in range(g.n):
            nbrs = g.adj[v]
            for cols in product(range(q), repeat=len(nbrs)):
                pin = Pinning.from_dict(g.n, dict(zip(nbrs, cols)))
                if not support(model, pin, v):
                    return False
        return True
    from .oracle import exact_conditional_Z

    if (q + 1) ** g.n > max_states:
        raise SizeError("literal permissiveness check too large")
    for vals in product(range(-1, q), repeat=g.n):
        if not exact_conditional_Z(model, Pinning(vals)):
            return False
    return True


def greedy_configuration(model: SpinModel, pin: Pinning | None = None, order=None) -> tuple:
    """Complete pin greedily: each free vertex takes its lowest supported colour."""
    pin = pin or Pinning.empty(model.n)
    order = range(model.n) if order is None else order
    cur = pin
    for v in order:
        if cur.values[v] >= 0:
            continue
        sup = support(model, cur, v)
        if not sup:
            raise NonPermissiveError(f"greedy completion failed at vertex {v}")
        cur = cur.assign(v, sup[0])
    return cur.values


def all_pinnings_on(q: int, n: int, domain: Sequence[int]):
    """Iterate over every assignment of colours to ``domain``."""
    for cols in product(range(q), repeat=len(domain)):
        yield Pinning.from_dict(n, dict(zip(domain, cols)))


def subsets(items: Sequence[int]):
    for k in range(len(items) + 1):
        yield from combinations(items, k)
