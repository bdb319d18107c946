"""Coupling trees: every intermediate state of the vertex-by-vertex optimal
coupling of two pinnings that differ at one vertex u, revealed over the
sphere of radius R around u.

Children of a node are ordered by sphere vertex id, then by colour pair.
"""
from dataclasses import dataclass, field

from .errors import NonPermissiveError, UsageError
from .model import Pinning, SpinModel, sphere, support

INTERNAL, GOOD, BAD = "internal", "good", "bad"


@dataclass(eq=False)
class TreeNode:
    index: int
    sigma: Pinning
    tau: Pinning
    D: int | None
    kind: str
    ell: int
    branch: tuple | None = None  # (v, c1, c2) chosen at the parent
    parent: int = -1
    children: list = field(default_factory=list)
    edges: list = field(default_factory=list)  # (v, c1, c2) per child, parallel to children

    @property
    def domain(self) -> frozenset:
        return self.sigma.domain

    @property
    def label(self) -> tuple:
        return (self.sigma, self.tau, self.domain, self.D)

    @property
    def is_leaf(self) -> bool:
        return self.kind != INTERNAL


@dataclass(eq=False)
class CouplingTree:
    model: SpinModel
    u: int
    R: int
    sphere: tuple
    root: TreeNode
    nodes: list
    shared: bool = False

    @property
    def size(self) -> int:
        return len(self.nodes)

    def remaining(self, node: TreeNode) -> list:
        """Sphere vertices still free at ``node``, ascending."""
        pv = node.sigma.values
        return [v for v in self.sphere if pv[v] < 0]


def _check_pair(sigma: Pinning, tau: Pinning, u: int):
    if sigma.n != tau.n:
        raise UsageError("pinnings over different vertex sets")
    if sigma.domain != tau.domain:
        raise UsageError("pinnings must share a domain")
    diff = sigma.differences(tau)
    if diff != [u]:
        raise UsageError(f"pinnings must differ exactly at vertex {u}, they differ at {diff}")


def build_tree(model: SpinModel, sigma: Pinning, tau: Pinning, u: int, R: int,
               share: bool = False) -> CouplingTree:
    """Build the coupling tree for the pair (sigma, tau) differing at u.

    With ``share=True`` nodes with identical labels are built once and reused,
    so the result is a DAG; each node then records its first parent only.
    """
    _check_pair(sigma, tau, u)
    if R < 1:
        raise UsageError("R must be at least 1")
    sph = tuple(sorted(sphere(model.graph, u, R)))
    nodes: list = []
    cache: dict = {}

    def new(sig, ta, D, kind, ell, branch, parent):
        node = TreeNode(len(nodes), sig, ta, D, kind, ell, branch, parent)
        nodes.append(node)
        return node

    def build(sig, ta, branch, parent):
        if share:
            hit = cache.get((sig, ta))
            if hit is not None:
                return hit
        pv = sig.values
        rem = [v for v in sph if pv[v] < 0]
        node = new(sig, ta, None, INTERNAL if rem else GOOD, len(rem), branch, parent)
        if share:
            cache[(sig, ta)] = node
        for v in rem:
            A = support(model, sig, v)
            B = support(model, ta, v)
            if not A or not B:
                raise NonPermissiveError(f"empty support at vertex {v}")
            for c1 in A:
                for c2 in B:
                    if c1 == c2:
                        child = build(sig.assign(v, c1), ta.assign(v, c1), (v, c1, c2), node.index)
                    else:
                        child = new(sig.assign(v, c1), ta.assign(v, c2), v, BAD, len(rem) - 1,
                                    (v, c1, c2), node.index)
                    node.children.append(child)
                    node.edges.append((v, c1, c2))
        return node

    root = build(sigma, tau, None, -1)
    return CouplingTree(model, u, R, sph, root, nodes, shared=share)


def leaves(tree: CouplingTree) -> tuple:
    """(good leaves, bad leaves) in node order."""
    good = [w for w in tree.nodes if w.kind == GOOD]
    bad = [w for w in tree.nodes if w.kind == BAD]
    return good, bad


def depth_class(node: TreeNode) -> int:
    return node.ell


def node_bound(q: int, max_degree: int, R: int) -> int:
    """Upper bound 2 (q^2 Delta^R)^(Delta^R) on the node count."""
    m = max_degree ** R
    return 2 * (q * q * m) ** m


def count_nodes(model: SpinModel, sigma: Pinning, tau: Pinning, u: int, R: int) -> int:
    """Node count of the (unshared) tree without building it."""
    sph = sorted(sphere(model.graph, u, R))
    memo = {}

    def count(sig, ta):
        key = (sig, ta)
        if key in memo:
            return memo[key]
        total = 1
        for v in sph:
            if sig.values[v] >= 0:
                continue
            A, B = support(model, sig, v), support(model, ta, v)
            for c1 in A:
                for c2 in B:
                    total += count(sig.assign(v, c1), ta.assign(v, c1)) if c1 == c2 else 1
        memo[key] = total
        return total

    return count(sigma, tau)


def _fmt_pin(pin: Pinning) -> str:
    return ",".join(f"{v + 1}:{c + 1}" for v, c in sorted(pin.as_dict().items())) or "-"


def serialize_tree(tree: CouplingTree) -> str:
    """Canonical text form: a header, then one line per node with its index,
    parent index, kind, ell, discrepancy D and both pinnings (1-indexed)."""
    lines = [f"tree u={tree.u + 1} R={tree.R} nodes={tree.size} shared={int(tree.shared)}"]
    for w in tree.nodes:
        D = "-" if w.D is None else str(w.D + 1)
        br = "-" if w.branch is None else "{}:{}/{}".format(w.branch[0] + 1, w.branch[1] + 1, w.branch[2] + 1)
        lines.append(f"{w.index} {w.parent} {w.kind} {w.ell} {D} {br} {_fmt_pin(w.sigma)} {_fmt_pin(w.tau)}")
    return "\n".join(lines) + "\n"


def tree_stats(tree: CouplingTree) -> dict:
    good, bad = leaves(tree)
    return {"nodes": tree.size, "good_leaves": len(good), "bad_leaves": len(bad),
            "internal": tree.size - len(good) - len(bad), "sphere": [v + 1 for v in tree.sphere],
            "u": tree.u + 1, "R": tree.R}
