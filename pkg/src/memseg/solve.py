"""Exact 0-1 solver: LP-relaxation branch-and-bound plus a tiny-model oracle.

The LP relaxation is solved by a self-contained bounded-variable primal
simplex (dense numpy, artificial-variable phase 1, Dantzig pricing with a
Bland fallback once degeneracy stalls). Instances here are desk scale, so no
sparse machinery or warm starts are attempted.

Branch-and-bound is best-first on the LP bound with depth-first plunging:
after branching, the child on the rounded side of the fractional variable is
processed immediately, the sibling queued. The incumbent is seeded with the
all-background assignment whenever that is feasible, so time-limited runs
always have something to return.
"""
from __future__ import annotations

import heapq
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import LpNumericalError
from .ilpmodel import IlpModel, background_assignment, check_feasible

FEAS_TOL = 1e-7       # LP feasibility
INT_TOL = 1e-6        # integrality detection
PRUNE_TOL = 1e-9      # incumbent pruning (absolute)
_PIV_TOL = 1e-9


@dataclass(frozen=True)
class IlpSolution:
    assignment: np.ndarray | None
    objective: float | None
    status: str                   # proven_optimal | feasible | infeasible | timed_out
    gap: float = 0.0
    stats: dict = field(default_factory=dict)


@dataclass(frozen=True)
class LpResult:
    status: str                   # optimal | infeasible
    value: float | None
    x: np.ndarray | None          # model variables only
    iterations: int


# --------------------------------------------------------------------------
# bounded-variable primal simplex


class _Simplex:
    """min c z  s.t.  A z = b,  lb <= z <= ub (all bounds finite)."""

    def __init__(self, A, b, c, lb, ub):
        self.A = np.asarray(A, dtype=np.float64)
        self.b = np.asarray(b, dtype=np.float64)
        self.c = np.asarray(c, dtype=np.float64)
        self.lb = np.asarray(lb, dtype=np.float64)
        self.ub = np.asarray(ub, dtype=np.float64)
        self.m, self.n = self.A.shape
        self.iterations = 0

    def solve(self):
        m, n = self.m, self.n
        x = self.lb.copy()
        resid = self.b - self.A @ x
        # artificial start: one artificial per row absorbs the residual
        signs = np.where(resid >= 0, 1.0, -1.0)
        A = np.hstack([self.A, np.diag(signs)])
        lb = np.concatenate([self.lb, np.zeros(m)])
        ub = np.concatenate([self.ub, np.abs(resid) + 1.0])
        x = np.concatenate([x, np.abs(resid)])
        basis = np.arange(n, n + m)
        at_upper = np.zeros(n + m, dtype=bool)
        in_basis = np.zeros(n + m, dtype=bool)
        in_basis[basis] = True
        Binv = np.diag(1.0 / signs)

        c1 = np.concatenate([np.zeros(n), np.ones(m)])
        state = [A, lb, ub, x, basis, at_upper, in_basis, Binv]
        self._iterate(state, c1)
        if x[n:].sum() > FEAS_TOL * max(1.0, np.abs(self.b).sum()):
            return "infeasible", None, None
        # freeze artificials at zero; basic ones stay pinned by their bounds
        lb[n:] = 0.0
        ub[n:] = 0.0
        x[n:] = np.where(np.abs(x[n:]) < FEAS_TOL, 0.0, x[n:])
        if np.any(x[n:] != 0.0):
            return "infeasible", None, None
        c2 = np.concatenate([self.c, np.zeros(m)])
        self._iterate(state, c2)
        z = x[:n]
        z = np.clip(z, self.lb, self.ub)
        if np.max(np.abs(self.A @ z - self.b)) > 1e-5:
            raise LpNumericalError("simplex left an infeasible point")
        return "optimal", float(self.c @ z), z

    def _iterate(self, state, c):
        A, lb, ub, x, basis, at_upper, in_basis, Binv = state
        m = self.m
        bland = False
        stalled = 0
        last_obj = np.inf
        max_iter = 500 * (self.n + m) + 20000
        for _ in range(max_iter):
            self.iterations += 1
            y = c[basis] @ Binv
            d = c - y @ A
            free = (~in_basis) & (ub - lb > _PIV_TOL)
            up = free & ~at_upper & (d < -1e-9)
            down = free & at_upper & (d > 1e-9)
            cand = np.flatnonzero(up | down)
            if len(cand) == 0:
                return
            if bland:
                j = int(cand[0])
            else:
                j = int(cand[np.argmax(np.abs(d[cand]))])
            dirn = 1.0 if not at_upper[j] else -1.0
            w = Binv @ A[:, j]
            # ratio test: basics move by -dirn * w * t
            t_best = ub[j] - lb[j]
            leave = -1
            delta = -dirn * w
            for i in range(m):
                if delta[i] > _PIV_TOL:
                    room = ub[basis[i]] - x[basis[i]]
                    t_i = max(room, 0.0) / delta[i]
                elif delta[i] < -_PIV_TOL:
                    room = x[basis[i]] - lb[basis[i]]
                    t_i = max(room, 0.0) / (-delta[i])
                else:
                    continue
                if t_i < t_best - 1e-12 or (leave >= 0 and t_i < t_best + 1e-12
                                            and abs(w[i]) > abs(w[leave])):
                    t_best = t_i
                    leave = i
            if t_best <= 1e-12:
                stalled += 1
            else:
                stalled = 0
            if stalled > 100 + 2 * m:
                bland = True
            t = max(t_best, 0.0)
            x[basis] += delta * t
            if leave < 0:
                x[j] = (ub[j] if dirn > 0 else lb[j])
                at_upper[j] = not at_upper[j]
                continue
            lv = basis[leave]
            x[j] = (lb[j] if dirn > 0 else ub[j]) + dirn * t
            # snap the leaver to the bound it hit
            x[lv] = ub[lv] if delta[leave] > 0 else lb[lv]
            at_upper[lv] = delta[leave] > 0
            in_basis[lv] = False
            in_basis[j] = True
            basis[leave] = j
            wl = w[leave]
            if abs(wl) < _PIV_TOL:
                raise LpNumericalError("vanishing pivot element")
            row = Binv[leave, :] / wl
            Binv -= np.outer(w, row)
            Binv[leave, :] = row
            if self.iterations % 200 == 0:
                self._refactor(state)
            _ = last_obj, obj_now
        raise LpNumericalError("simplex iteration limit exceeded")

    def _refactor(self, state):
        A, lb, ub, x, basis, at_upper, in_basis, Binv = state
        try:
            fresh = np.linalg.inv(A[:, basis])
        except np.linalg.LinAlgError as exc:
            raise LpNumericalError("singular basis") from exc
        Binv[:, :] = fresh
        xn = x.copy()
        xn[basis] = 0.0
        x[basis] = Binv @ (self.b - A @ xn)


# --------------------------------------------------------------------------
# model -> standard form


class _LpData:
    """Cached standard form of a model: A z = 0 with slack variables."""

    def __init__(self, model: IlpModel):
        n = model.num_vars
        m = len(model.constraints)
        A = np.zeros((m, n + m))
        slack_lo = np.zeros(m)
        slack_hi = np.zeros(m)
        for r, con in enumerate(model.constraints):
            for idx, coeff in con.terms:
                A[r, idx] += coeff
            A[r, n + r] = -1.0
            slack_lo[r] = con.lo
            slack_hi[r] = con.hi
        self.model = model
        self.A = A
        self.n = n
        self.m = m
        self.slack_lo = slack_lo
        self.slack_hi = slack_hi

    def solve(self, fixings: dict[int, int] | None = None) -> LpResult:
        n, m = self.n, self.m
        lb = np.zeros(n + m)
        ub = np.ones(n + m)
        lb[n:] = self.slack_lo
        ub[n:] = self.slack_hi
        if fixings:
            for idx, val in fixings.items():
                lb[idx] = ub[idx] = float(val)
        c = np.concatenate([self.model.objective, np.zeros(m)])
        sx = _Simplex(self.A, np.zeros(m), c, lb, ub)
        status, value, z = sx.solve()
        if status == "infeasible":
            return LpResult(status="infeasible", value=None, x=None,
                            iterations=sx.iterations)
        return LpResult(status="optimal", value=value, x=z[:n],
                        iterations=sx.iterations)


def solve_lp_relaxation(model: IlpModel,
                        fixings: dict[int, int] | None = None) -> LpResult:
    """LP over [0, 1] boxes with optional 0/1 fixings.

    The value is a valid lower bound for every integer completion of the
    fixings. Numerical failures raise :class:`LpNumericalError`; infeasibility
    is reported in the result status.
    """
    return _LpData(model).solve(fixings)


# --------------------------------------------------------------------------
# exhaustive oracle


def solve_exhaustive(model: IlpModel) -> IlpSolution:
    """Enumerate all assignments with early constraint pruning (<= 30 vars)."""
    n = model.num_vars
    if n > 30:
        raise ValueError(f"exhaustive oracle limited to 30 variables, got {n}")
    cons = model.constraints
    by_var: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    for ci, con in enumerate(cons):
        for idx, coeff in con.terms:
            by_var[idx].append((ci, coeff))
    cur = np.zeros(len(cons))
    # most-negative / most-positive possible remaining contribution per row
    rem_neg = np.zeros(len(cons))
    rem_pos = np.zeros(len(cons))
    for ci, con in enumerate(cons):
        for _, coeff in con.terms:
            if coeff > 0:
                rem_pos[ci] += coeff
            else:
                rem_neg[ci] += coeff
    lo = np.array([c.lo for c in cons], dtype=float)
    hi = np.array([c.hi for c in cons], dtype=float)
    obj = model.objective
    obj_tail_min = np.concatenate([np.minimum(obj, 0.0)[::-1].cumsum()[::-1],
                                   [0.0]])

    best_obj = np.inf
    best_x: np.ndarray | None = None
    x = np.zeros(n, dtype=np.int8)
    explored = 0

    def feasible_window() -> bool:
        return bool(np.all(cur + rem_pos >= lo) and np.all(cur + rem_neg <= hi))

    def rec(v: int, partial: float):
        nonlocal best_obj, best_x, explored
        explored += 1
        if partial + obj_tail_min[v] >= best_obj:
            return
        if v == n:
            if best_x is None or partial < best_obj:
                best_obj = partial
                best_x = x.copy()
            return
        for val in (0, 1):
            x[v] = val
            for ci, coeff in by_var[v]:
                cur[ci] += coeff * val
                if coeff > 0:
                    rem_pos[ci] -= coeff
                else:
                    rem_neg[ci] -= coeff
            if feasible_window():
                rec(v + 1, partial + obj[v] * val)
            for ci, coeff in by_var[v]:
                cur[ci] -= coeff * val
                if coeff > 0:
                    rem_pos[ci] += coeff
                else:
                    rem_neg[ci] += coeff
        x[v] = 0

    rec(0, 0.0)
    if best_x is None:
        return IlpSolution(assignment=None, objective=None, status="infeasible",
                           stats={"nodes_explored": explored})
    return IlpSolution(assignment=best_x, objective=float(obj @ best_x),
                       status="proven_optimal",
                       stats={"nodes_explored": explored})


# --------------------------------------------------------------------------
# branch and bound


def _branch_variable(x: np.ndarray, objective: np.ndarray) -> int | None:
    frac = np.minimum(x - np.floor(x), np.ceil(x) - x)
    frac = np.where(np.abs(x - np.rint(x)) <= INT_TOL, -1.0, np.minimum(x, 1 - x))
    best = None
    for j in np.flatnonzero(frac > 0):
        key = (frac[j], abs(objective[j]), -j)
        if best is None or key > best[0]:
            best = (key, j)
    return None if best is None else int(best[1])


def solve_bnb(model: IlpModel, time_limit: float = 60.0,
              log=None, log_period: int = 0) -> IlpSolution:
    """Best-first branch-and-bound with depth-first plunging.

    Returns proven_optimal when the tree is exhausted, timed_out with the
    best incumbent otherwise. Identical models yield identical objective
    values and statuses (ties in branching and pricing are broken by index).
    """
    if time_limit <= 0:
        raise ValueError(f"time limit must be positive, got {time_limit}")
    t0 = time.monotonic()
    lp = _LpData(model)
    stats = {"nodes_explored": 0, "lp_iterations": 0}

    incumbent: np.ndarray | None = None
    inc_obj = np.inf
    bg = background_assignment(model)
    if check_feasible(model, bg).feasible:
        incumbent = bg
        inc_obj = float(model.objective @ bg)

    heap: list[tuple[float, int, dict]] = []
    seq = 0
    heapq.heappush(heap, (-np.inf, seq, {}))
    global_lb = -np.inf

    def timeout() -> bool:
        return time.monotonic() - t0 > time_limit

    timed_out = False
    while heap:
        bound, _, fixings = heapq.heappop(heap)
        global_lb = bound
        if bound >= inc_obj - PRUNE_TOL:
            break  # best-first: everything left is at least as bad
        if timeout():
            timed_out = True
            break
        # plunge from this node
        cur: dict | None = fixings
        while cur is not None:
            if timeout():
                timed_out = True
                break
            res = lp.solve(cur)
            stats["nodes_explored"] += 1
            stats["lp_iterations"] += res.iterations
            if log and log_period and stats["nodes_explored"] % log_period == 0:
                log(f"node={stats['nodes_explored']} bound="
                    f"{res.value if res.status == 'optimal' else 'inf'} "
                    f"incumbent={inc_obj}")
            if res.status == "infeasible" or res.value >= inc_obj - PRUNE_TOL:
                cur = None
                continue
            j = _branch_variable(res.x, model.objective)
            if j is None:
                cand = np.rint(res.x).astype(np.int8)
                report = check_feasible(model, cand)
                if not report.feasible:
                    raise LpNumericalError(
                        "integral LP point fails the exact checker")
                if report.objective < inc_obj - PRUNE_TOL:
                    incumbent = cand
                    inc_obj = report.objective
                cur = None
                continue
            prefer = int(np.rint(res.x[j]))
            sibling = dict(cur)
            sibling[j] = 1 - prefer
            seq += 1
            heapq.heappush(heap, (res.value, seq, sibling))
            nxt = dict(cur)
            nxt[j] = prefer
            cur = nxt
        if timed_out:
            break

    stats["wall_time"] = time.monotonic() - t0
    if timed_out:
        gap = float(inc_obj - global_lb) if incumbent is not None else np.inf
        return IlpSolution(assignment=incumbent,
                           objective=None if incumbent is None else inc_obj,
                           status="timed_out", gap=gap, stats=stats)
    if incumbent is None:
        return IlpSolution(assignment=None, objective=None,
                           status="infeasible", stats=stats)
    return IlpSolution(assignment=incumbent, objective=inc_obj,
                       status="proven_optimal", gap=0.0, stats=stats)


def solve_model(model: IlpModel, method: str = "bnb", time_limit: float = 60.0,
                log=None, log_period: int = 0) -> IlpSolution:
    if method == "bnb":
        return solve_bnb(model, time_limit=time_limit, log=log,
                         log_period=log_period)
    if method == "exhaustive":
        return solve_exhaustive(model)
    raise ValueError(f"unknown solver method {method!r}")
