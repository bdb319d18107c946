"""Small test-instance generators."""
import numpy as np

from .errors import UsageError
from .model import Graph


def path(n: int) -> Graph:
    return Graph(n, [(i, i + 1) for i in range(n - 1)])


def cycle(n: int) -> Graph:
    if n < 3:
        raise UsageError("a cycle needs at least 3 vertices")
    return Graph(n, [(i, (i + 1) % n) for i in range(n)])


def star(leaves: int) -> Graph:
    return Graph(leaves + 1, [(0, i) for i in range(1, leaves + 1)])


def complete(n: int) -> Graph:
    return Graph(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def empty(n: int) -> Graph:
    return Graph(n, [])


def random_tree(n: int, seed: int) -> Graph:
    """Uniform random labelled tree from a Pruefer sequence."""
    if n <= 2:
        return path(n)
    rng = np.random.default_rng(seed)
    seq = [int(x) for x in rng.integers(0, n, size=n - 2)]
    degree = [1] * n
    for x in seq:
        degree[x] += 1
    edges = []
    for x in seq:
        leaf = min(i for i in range(n) if degree[i] == 1)
        edges.append((leaf, x))
        degree[leaf] -= 1
        degree[x] -= 1
    u, v = [i for i in range(n) if degree[i] == 1]
    edges.append((u, v))
    return Graph(n, edges)


def random_bounded_degree(n: int, max_degree: int, seed: int, *, extra_edges: int | None = None,
                          connected: bool = True) -> Graph:
    """Random graph with maximum degree at most ``max_degree``.

    A random spanning tree respecting the degree bound is grown first (when
    ``connected``), then up to ``extra_edges`` further random edges are added
    where both endpoints still have spare degree.
    """
    if max_degree < 1 and n > 1:
        raise UsageError("max_degree must be positive")
    rng = np.random.default_rng(seed)
    deg = [0] * n
    edges = set()
    if connected and n > 1:
        order = [int(x) for x in rng.permutation(n)]
        placed = [order[0]]
        for v in order[1:]:
            open_ = [u for u in placed if deg[u] < max_degree]
            if not open_:
                raise UsageError("degree bound too small for a connected graph")
            u = open_[int(rng.integers(len(open_)))]
            edges.add((min(u, v), max(u, v)))
            deg[u] += 1
            deg[v] += 1
            placed.append(v)
    if extra_edges is None:
        extra_edges = int(rng.integers(0, n + 1))
    for _ in range(extra_edges):
        cand = [(u, v) for u in range(n) for v in range(u + 1, n)
                if (u, v) not in edges and deg[u] < max_degree and deg[v] < max_degree]
        if not cand:
            break
        u, v = cand[int(rng.integers(len(cand)))]
        edges.add((u, v))
        deg[u] += 1
        deg[v] += 1
    return Graph(n, edges)
