"""Two-phase primal simplex on a sparse tableau.

Works over exact rationals (gmpy2 ``mpq``) or floats with a pivot tolerance.
Problems are given as: optimise c.x subject to rows  a.x (<=, ==, >=) b,
x >= 0. Rows are sparse dicts {column: coefficient}.

Pricing is Dantzig's most-negative reduced cost; after a run of degenerate
pivots the solver switches to Bland's smallest-index rule for the rest of
the phase, which rules out cycling. ``rule="bland"`` uses Bland throughout.

Float problems run on a dense numpy tableau with the same pivoting rules;
the sparse dict tableau is kept for exact arithmetic.
"""
from dataclasses import dataclass

import numpy as np

from .arith import to_exact
from .errors import SolverError

DEGENERATE_RUN = 20


@dataclass
class LPResult:
    status: str  # "optimal", "infeasible" or "unbounded"
    x: list | None = None
    value: object = None
    pivots: int = 0


class _Tableau:
    def __init__(self, rows, rhs, basis, exact, tol, rule):
        self.rows = rows
        self.rhs = rhs
        self.basis = basis
        self.exact = exact
        self.tol = tol
        self.rule = rule
        self.pivots = 0

    def is_zero(self, x):
        return x == 0 if self.exact else abs(x) <= self.tol

    def pivot(self, r, c, objs):
        row = self.rows[r]
        piv = row[c]
        for j in list(row):
            row[j] = row[j] / piv
        self.rhs[r] = self.rhs[r] / piv
        row[c] = 1 + 0 * piv
        items = list(row.items())
        b = self.rhs[r]
        for i, other in enumerate(self.rows):
            if i == r:
                continue
            f = other.get(c)
            if f is None:
                continue
            self._axpy(other, f, items)
            self.rhs[i] = self.rhs[i] - f * b
            if not self.exact and -self.tol < self.rhs[i] < 0:
                self.rhs[i] = 0.0
        for obj in objs:
            f = obj[0].get(c)
            if f is None:
                continue
            self._axpy(obj[0], f, items)
            obj[1] = obj[1] - f * b
        self.basis[r] = c
        self.pivots += 1

    def _axpy(self, target, f, items):
        """target -= f * pivot row, dropping entries that become zero."""
        get, pop = target.get, target.pop
        if self.exact:
            for j, a in items:
                val = get(j, 0) - f * a
                if val:
                    target[j] = val
                else:
                    pop(j, None)
        else:
            tol = self.tol
            for j, a in items:
                val = get(j, 0.0) - f * a
                if -tol <= val <= tol:
                    pop(j, None)
                else:
                    target[j] = val

    def price(self, objective: dict, zero):
        """Reduced-cost row [d, -value] of ``objective`` for the current basis."""
        d = dict(objective)
        val = zero
        for i, bcol in enumerate(self.basis):
            f = objective.get(bcol)
            if not f:
                continue
            for j, a in self.rows[i].items():
                d[j] = d.get(j, zero) - f * a
            val = val - f * self.rhs[i]
        for bcol in self.basis:
            d.pop(bcol, None)
        return [{j: a for j, a in d.items() if not self.is_zero(a)}, val]

    def run(self, obj, limit, max_pivots):
        """Minimise; columns >= ``limit`` may not enter."""
        bland = self.rule == "bland"
        degenerate = 0
        while True:
            enter = None
            if bland:
                for j in sorted(obj[0]):
                    a = obj[0][j]
                    if j < limit and a < 0 and not self.is_zero(a):
                        enter = j
                        break
            else:
                best = None
                for j, a in obj[0].items():
                    if j < limit and a < 0 and not self.is_zero(a) and (
                            best is None or a < best or (a == best and j < enter)):
                        best, enter = a, j
            if enter is None:
                return "optimal"
            best, leave = None, None
            for i, row in enumerate(self.rows):
                a = row.get(enter)
                if a is None or a <= 0 or self.is_zero(a):
                    continue
                ratio = self.rhs[i] / a
                if best is None or ratio < best or (ratio == best and self.basis[i] < self.basis[leave]):
                    best, leave = ratio, i
            if leave is None:
                return "unbounded"
            if self.is_zero(best):
                degenerate += 1
                if degenerate >= DEGENERATE_RUN:
                    bland = True
            else:
                degenerate = 0
            self.pivot(leave, enter, [obj])
            if self.pivots > max_pivots:
                raise SolverError(f"simplex exceeded {max_pivots} pivots")


def _prepare(nvars, rows, senses, rhs, exact, tol, rule):
    if rule not in ("dantzig", "bland"):
        raise ValueError(f"unknown pricing rule {rule!r}")
    conv = to_exact if exact else float
    one = conv(1)
    m = len(rows)
    trows, trhs = [], []
    ncols = nvars
    slack_of = {}
    for i in range(m):
        row = {j: conv(a) for j, a in rows[i].items() if a != 0}
        b = conv(rhs[i])
        sense = senses[i]
        if sense == "<=":
            row[ncols] = one
            slack_of[i] = ncols
            ncols += 1
        elif sense == ">=":
            row[ncols] = -one
            slack_of[i] = ncols
            ncols += 1
        elif sense != "==":
            raise ValueError(f"unknown sense {sense}")
        if b < 0:
            row = {j: -a for j, a in row.items()}
            b = -b
        trows.append(row)
        trhs.append(b)
    basis = [None] * m
    art_start = ncols
    for i in range(m):
        s = slack_of.get(i)
        if s is not None and trows[i][s] == one:
            basis[i] = s
        else:
            trows[i][ncols] = one
            basis[i] = ncols
            ncols += 1
    return _Tableau(trows, trhs, basis, exact, tol, rule), art_start, ncols, one * 0


def _phase_one(tab, art_start, ncols, zero, max_pivots) -> bool:
    art = {j: 1 + zero for j in tab.basis if j >= art_start}
    if not art:
        return True
    obj = tab.price(art, zero)
    tab.run(obj, ncols, max_pivots)
    if not tab.is_zero(obj[1]):
        return False
    # drive artificials out of the basis where possible
    for i in range(len(tab.rows)):
        if tab.basis[i] >= art_start:
            for j in sorted(tab.rows[i]):
                if j < art_start and not tab.is_zero(tab.rows[i][j]):
                    tab.pivot(i, j, [])
                    break
    return True


def _point(tab, nvars, zero):
    x = [zero] * nvars
    for i, bcol in enumerate(tab.basis):
        if bcol < nvars:
            x[bcol] = tab.rhs[i]
    return x


class _Dense:
    """Float tableau: T x = rhs over slack and artificial columns."""

    def __init__(self, nvars, rows, senses, rhs, tol, rule):
        if rule not in ("dantzig", "bland"):
            raise ValueError(f"unknown pricing rule {rule!r}")
        m = len(rows)
        nslack = 0
        for sense in senses:
            if sense in ("<=", ">="):
                nslack += 1
            elif sense != "==":
                raise ValueError(f"unknown sense {sense}")
        self.art_start = nvars + nslack
        T = np.zeros((m, self.art_start + m))
        b = np.array([float(x) for x in rhs], dtype=float).reshape(m)
        basis = [0] * m
        k = nvars
        for i, (row, sense) in enumerate(zip(rows, senses)):
            for j, a in row.items():
                T[i, j] = float(a)
            if sense != "==":
                T[i, k] = 1.0 if sense == "<=" else -1.0
                slack = k
                k += 1
            else:
                slack = None
            if b[i] < 0:
                T[i] = -T[i]
                b[i] = -b[i]
            if slack is not None and T[i, slack] == 1.0:
                basis[i] = slack
            else:
                basis[i] = self.art_start + i
                T[i, basis[i]] = 1.0
        self.T, self.b, self.basis = T, b, basis
        self.tol, self.rule, self.pivots = tol, rule, 0

    def pivot(self, r, c, objs):
        T, b = self.T, self.b
        piv = T[r, c]
        T[r] /= piv
        b[r] /= piv
        col = T[:, c].copy()
        col[r] = 0.0
        T -= np.outer(col, T[r])
        b -= col * b[r]
        b[np.abs(b) <= self.tol] = 0.0
        for obj in objs:
            f = obj[0][c]
            if f:
                obj[0] -= f * T[r]
                obj[1] -= f * b[r]
        self.basis[r] = c
        self.pivots += 1

    def price(self, cost):
        cb = cost[self.basis]
        d = cost - cb @ self.T
        d[self.basis] = 0.0
        return [d, -float(cb @ self.b)]

    def run(self, obj, limit, max_pivots):
        tol = self.tol
        bland = self.rule == "bland"
        degenerate = 0
        while True:
            d = obj[0][:limit]
            cand = np.nonzero(d < -tol)[0]
            if not cand.size:
                return "optimal"
            enter = int(cand[0]) if bland else int(cand[np.argmin(d[cand])])
            col = self.T[:, enter]
            rows = np.nonzero(col > tol * max(1.0, float(np.abs(col).max())))[0]
            if not rows.size:
                return "unbounded"
            # two-pass (Harris) ratio test: among rows whose ratio is within
            # the tolerance of the minimum, take the largest pivot element
            bound = ((self.b[rows] + tol) / col[rows]).min()
            ok = rows[self.b[rows] / col[rows] <= bound]
            leave = int(ok[np.argmax(col[ok])])
            best = self.b[leave] / col[leave]
            if best <= tol:
                degenerate += 1
                if degenerate >= DEGENERATE_RUN:
                    bland = True
            else:
                degenerate = 0
            self.pivot(leave, enter, [obj])
            if self.pivots > max_pivots:
                raise SolverError(f"simplex exceeded {max_pivots} pivots")

    def phase_one(self, max_pivots) -> bool:
        ncols = self.T.shape[1]
        cost = np.zeros(ncols)
        cost[self.art_start:] = 1.0
        if all(j < self.art_start for j in self.basis):
            return True
        obj = self.price(cost)
        self.run(obj, ncols, max_pivots)
        # the running objective drifts with rounding; recompute from the basis
        left = sum(self.b[i] for i, j in enumerate(self.basis) if j >= self.art_start)
        if left > self.tol * max(1.0, float(self.b.max(initial=0.0))):
            return False
        for i in range(len(self.basis)):
            if self.basis[i] >= self.art_start:
                nz = np.nonzero(np.abs(self.T[i, :self.art_start]) > self.tol)[0]
                if nz.size:
                    self.pivot(i, int(nz[0]), [])
        return True

    def point(self, nvars):
        x = np.zeros(nvars)
        for i, bcol in enumerate(self.basis):
            if bcol < nvars:
                x[bcol] = self.b[i]
        return x

    def optimise(self, objective, sign, nvars, max_pivots):
        cost = np.zeros(self.T.shape[1])
        for j, a in objective.items():
            cost[j] = sign * float(a)
        obj = self.price(cost)
        if self.run(obj, self.art_start, max_pivots) == "unbounded":
            return None
        x = self.point(nvars)
        return sum(float(a) * x[j] for j, a in objective.items())


def _dense_solve(nvars, rows, senses, rhs, objective, maximize, tol, max_pivots, rule):
    tab = _Dense(nvars, rows, senses, rhs, tol, rule)
    if not tab.phase_one(max_pivots):
        return LPResult("infeasible", pivots=tab.pivots)
    if not objective:
        return LPResult("optimal", [float(v) for v in tab.point(nvars)], None, tab.pivots)
    value = tab.optimise(objective, -1 if maximize else 1, nvars, max_pivots)
    if value is None:
        return LPResult("unbounded", pivots=tab.pivots)
    return LPResult("optimal", [float(v) for v in tab.point(nvars)], value, tab.pivots)


def solve(nvars: int, rows: list, senses: list, rhs: list, objective: dict | None = None,
          maximize: bool = False, exact: bool = True, tol: float = 1e-9,
          max_pivots: int = 200000, rule: str = "dantzig") -> LPResult:
    """Solve the LP; ``objective`` None means pure feasibility."""
    if not exact:
        return _dense_solve(nvars, rows, senses, rhs, objective, maximize, tol, max_pivots, rule)
    tab, art_start, ncols, zero = _prepare(nvars, rows, senses, rhs, exact, tol, rule)
    if not _phase_one(tab, art_start, ncols, zero, max_pivots):
        return LPResult("infeasible", pivots=tab.pivots)
    if not objective:
        return LPResult("optimal", _point(tab, nvars, zero), None, tab.pivots)
    conv = to_exact if exact else float
    sign = -1 if maximize else 1
    obj = tab.price({j: sign * conv(a) for j, a in objective.items() if a != 0}, zero)
    if tab.run(obj, art_start, max_pivots) == "unbounded":
        return LPResult("unbounded", pivots=tab.pivots)
    x = _point(tab, nvars, zero)
    value = sum((conv(objective.get(j, 0)) * x[j] for j in range(nvars)), zero)
    return LPResult("optimal", x, value, tab.pivots)


def solve_range(nvars: int, rows: list, senses: list, rhs: list, objective: dict,
                exact: bool = True, tol: float = 1e-9, max_pivots: int = 200000,
                rule: str = "dantzig"):
    """(status, min, max) of the objective over the feasible set, sharing one
    phase one between both optimisations. A bound is None when unbounded."""
    if not exact:
        tab = _Dense(nvars, rows, senses, rhs, tol, rule)
        if not tab.phase_one(max_pivots):
            return "infeasible", None, None
        lo = tab.optimise(objective, 1, nvars, max_pivots)
        return "optimal", lo, tab.optimise(objective, -1, nvars, max_pivots)
    tab, art_start, ncols, zero = _prepare(nvars, rows, senses, rhs, exact, tol, rule)
    if not _phase_one(tab, art_start, ncols, zero, max_pivots):
        return "infeasible", None, None
    conv = to_exact if exact else float
    c = {j: conv(a) for j, a in objective.items() if a != 0}
    out = []
    for sign in (1, -1):
        obj = tab.price({j: sign * a for j, a in c.items()}, zero)
        if tab.run(obj, art_start, max_pivots) == "unbounded":
            out.append(None)
            continue
        x = _point(tab, nvars, zero)
        out.append(sum((c.get(j, zero) * x[j] for j in range(nvars)), zero))
    return "optimal", out[0], out[1]
