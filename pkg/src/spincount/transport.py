"""Exact minimum-cost transport between two discrete distributions with
small nonnegative integer costs.

Primal-dual method: integer potentials u_i + v_j <= c_ij are maintained, a
maximum flow is pushed along tight arcs, and potentials of the nodes reachable
in the residual network are raised when the flow stalls. Masses may be exact
rationals; arithmetic follows their type.
"""
from collections import deque


def transport_cost(supply, demand, cost) -> object:
    """Minimal sum of cost * flow moving ``supply`` onto ``demand``.

    ``cost[i][j]`` must be a nonnegative integer; the totals must match.
    """
    plan = transport_plan(supply, demand, cost)
    zero = 0 * (supply[0] if supply else 0)
    return sum((f * cost[i][j] for (i, j), f in plan.items()), zero)


def transport_plan(supply, demand, cost) -> dict:
    m, n = len(supply), len(demand)
    if m == 0 or n == 0:
        return {}
    total_s = sum(supply)
    total_d = sum(demand)
    if isinstance(total_s, float):
        if abs(total_s - total_d) > 1e-9 * max(1.0, abs(total_s)):
            raise ValueError("supply and demand totals differ")
    elif total_s != total_d:
        raise ValueError("supply and demand totals differ")
    u = [min(row) for row in cost]
    v = [min(cost[i][j] - u[i] for i in range(m)) for j in range(n)]
    flow = {}
    out_s = [0 * supply[0]] * m
    in_d = [0 * demand[0]] * n
    by_sink = [set() for _ in range(n)]

    def tight(i, j):
        return u[i] + v[j] == cost[i][j]

    eps = 1e-12 if isinstance(total_s, float) else 0

    while True:
        # augment along tight arcs until no augmenting path remains
        while True:
            par_src = [None] * m
            par_snk = [None] * n
            queue = deque()
            for i in range(m):
                if supply[i] - out_s[i] > eps:
                    par_src[i] = -1
                    queue.append(("s", i))
            end = None
            while queue and end is None:
                side, x = queue.popleft()
                if side == "s":
                    for j in range(n):
                        if par_snk[j] is None and tight(x, j):
                            par_snk[j] = x
                            if demand[j] - in_d[j] > eps:
                                end = j
                                break
                            queue.append(("t", j))
                else:
                    for i in by_sink[x]:
                        if par_src[i] is None and flow[(i, x)] > eps:
                            par_src[i] = x
                            queue.append(("s", i))
            if end is None:
                break
            # collect the path sink <- source <- sink ... <- source
            path = []
            j = end
            while True:
                i = par_snk[j]
                path.append((i, j, +1))
                back = par_src[i]
                if back == -1:
                    break
                path.append((i, back, -1))
                j = back
            start = path[-1][0]
            delta = min(supply[start] - out_s[start], demand[end] - in_d[end])
            for i, j, sgn in path:
                if sgn < 0:
                    delta = min(delta, flow[(i, j)])
            for i, j, sgn in path:
                if sgn > 0:
                    flow[(i, j)] = flow.get((i, j), 0 * delta) + delta
                    by_sink[j].add(i)
                else:
                    flow[(i, j)] -= delta
                    if flow[(i, j)] <= eps:
                        del flow[(i, j)]
                        by_sink[j].discard(i)
            out_s[start] += delta
            in_d[end] += delta
        remaining = total_s - sum(out_s)
        if remaining <= (1e-12 * max(1.0, abs(total_s)) if eps else 0):
            return flow
        lab_s = [par_src[i] is not None for i in range(m)]
        lab_t = [par_snk[j] is not None for j in range(n)]
        theta = None
        for i in range(m):
            if lab_s[i]:
                for j in range(n):
                    if not lab_t[j]:
                        slack = cost[i][j] - u[i] - v[j]
                        if theta is None or slack < theta:
                            theta = slack
        if theta is None or theta <= 0:
            raise RuntimeError("transport dual update failed")
        for i in range(m):
            if lab_s[i]:
                u[i] += theta
        for j in range(n):
            if lab_t[j]:
                v[j] -= theta
