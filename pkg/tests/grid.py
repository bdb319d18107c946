"""Seed-fixed instance grid shared by the LP and estimator acceptance tests.

Every instance is a random connected graph (5..9 vertices, max degree 3) with
q = 7, a centre u and a small free region: u plus at most two vertices on the
sphere of radius R around u. All other vertices are pinned to a feasible
reference configuration. Two model families alternate: proper 7-colourings
and a soft list model (lists of size 3, monochromatic edges penalised by a
small factor) whose measured parameters satisfy the selection rule.
"""
import random
from dataclasses import dataclass
from functools import lru_cache

from gmpy2 import mpq

from spincount.generators import random_bounded_degree
from spincount.model import Pinning, SpinModel, coloring, greedy_configuration, sphere, support

Q = 7
SOFT_PENALTY = mpq(1, 1000)
GRAPHS = 50
SEED = 20240611


def soft_list_model(graph, q, lists, penalty=SOFT_PENALTY):
    A_E = [[1 - penalty if i == j else 1 for j in range(q)] for i in range(q)]
    A_V = [[1 if c in L else 0 for c in range(q)] for L in lists]
    return SpinModel(graph, q, A_E, A_V, kind="general", spec={"lists": lists})


@dataclass(frozen=True)
class Instance:
    name: str
    model: SpinModel
    u: int
    R: int
    region: tuple  # free vertices of the base pinning, u included
    base: Pinning  # pins everything outside the region

    def pairs(self):
        """All ordered pairs of distinct supported values at u."""
        sup = support(self.model, self.base, self.u)
        return [(self.base.extend(self.u, a), self.base.extend(self.u, b))
                for a in sup for b in sup if a != b]


def _graph_instances(i):
    rng = random.Random(SEED + i)
    n = rng.randint(5, 9)
    g = random_bounded_degree(n, 3, SEED + i)
    if i % 2 == 0:
        model, fam = coloring(g, Q), "col"
    else:
        lists = [sorted(rng.sample(range(Q), 3)) for _ in range(n)]
        model, fam = soft_list_model(g, Q, lists), "soft"
    order = list(range(n))
    rng.shuffle(order)
    ref = greedy_configuration(model, order=order)
    u = rng.randrange(n)
    out = []
    for R in (1, 2):
        sph = sorted(sphere(g, u, R))
        F = sorted(rng.sample(sph, min(2, len(sph)))) if sph else []
        region = tuple(sorted(F + [u]))
        base = Pinning([-1 if v in region else ref[v] for v in range(n)])
        out.append(Instance(f"{fam}{i}-n{n}-u{u}-R{R}", model, u, R, region, base))
    return out


@lru_cache(maxsize=None)
def grid():
    out = []
    for i in range(GRAPHS):
        out.extend(_graph_instances(i))
    return tuple(out)
