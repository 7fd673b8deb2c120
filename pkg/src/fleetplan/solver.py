"""Integer-program solver abstraction with a self-contained exact backend.

Models are built through a tiny add-variable / add-linear-constraint /
minimize interface.  Two backends solve them:

* ``builtin``  -- depth-first branch-and-bound over the binary variables with
  interval bound propagation on every linear constraint.  No LP relaxation is
  used anywhere: integer (time) variables are resolved by propagation, and at
  a leaf the all-at-lower-bound assignment is verified, which is optimal for
  the leaf whenever it is feasible because it attains the leaf's activity
  bound.  The incumbent objective is posted as a constraint, so propagation
  prunes dominated subtrees.  Exact on models up to a few hundred binaries;
  larger structured models (flows with hints and cost lower bounds) remain
  practical.

* ``external`` -- scipy's HiGHS mixed-integer solver, for instances beyond
  the builtin solver's comfortable range.

Value-ordering hints may be attached to variables; the builtin backend tries
the hinted value first, which lets flow-structured models dive straight to a
good incumbent.
"""

from __future__ import annotations

import math
import time as _time
from collections import deque
from dataclasses import dataclass, field

INF = math.inf
_EPS = 1e-9        # feasibility tolerance (model data is exactly representable)
_IMPROVE = 1e-6    # minimum objective improvement; must exceed _EPS


@dataclass
class SolverConfig:
    backend: str = "builtin"
    m_max: int = 100_000          # big-M constant shared by model builders
    time_limit: float | None = None
    node_limit: int | None = None
    alpha: float = 0.5            # travel-cost vs completion-time weight
    beta: float = 0.5             # prefix vs suffix cost weight
    eps_gap: float = 0.0
    seed: int = 0


@dataclass
class Solution:
    status: str                   # "optimal" | "infeasible" | "timelimit"
    objective: float | None = None
    values: list[int] | None = None
    nodes: int = 0
    gap: float = INF

    @property
    def feasible(self) -> bool:
        return self.values is not None

    def value(self, var: int) -> int:
        return self.values[var]


class Model:
    """A pure integer linear program (binaries plus bounded integers)."""

    def __init__(self, name: str = "model"):
        self.name = name
        self.lb: list[int] = []
        self.ub: list[int] = []
        self.is_binary: list[bool] = []
        self.hint: list[int | None] = []
        self.var_name: list[str | None] = []
        # rows: parallel lists (var indices, coefficients, lower, upper)
        self.rows: list[tuple[list[int], list[float], float, float]] = []
        self.row_tag: list[str] = []
        self.obj: dict[int, float] = {}
        self.branch_priority: list[int] = []   # optional explicit order

    # -- building ------------------------------------------------------------

    def add_var(self, lb: int, ub: int, name: str | None = None,
                hint: int | None = None) -> int:
        idx = len(self.lb)
        self.lb.append(lb)
        self.ub.append(ub)
        self.is_binary.append(lb >= 0 and ub <= 1)
        self.hint.append(hint)
        self.var_name.append(name)
        return idx

    def add_binary(self, name: str | None = None, hint: int | None = None) -> int:
        return self.add_var(0, 1, name, hint)

    def add_constr(self, terms: list[tuple[int, float]], sense: str, rhs: float,
                   tag: str = "") -> None:
        merged: dict[int, float] = {}
        for v, a in terms:
            if a:
                merged[v] = merged.get(v, 0.0) + a
        idxs = sorted(merged)
        coefs = [merged[v] for v in idxs]
        if sense == "<=":
            lo, hi = -INF, rhs
        elif sense == ">=":
            lo, hi = rhs, INF
        elif sense == "==":
            lo, hi = rhs, rhs
        else:
            raise ValueError(sense)
        self.rows.append((idxs, coefs, lo, hi))
        self.row_tag.append(tag)

    def set_objective(self, terms: list[tuple[int, float]]) -> None:
        self.obj = {}
        for v, a in terms:
            if a:
                self.obj[v] = self.obj.get(v, 0.0) + a

    def add_objective_term(self, var: int, coef: float) -> None:
        if coef:
            self.obj[var] = self.obj.get(var, 0.0) + coef

    @property
    def num_vars(self) -> int:
        return len(self.lb)

    @property
    def num_constrs(self) -> int:
        return len(self.rows)

    def stats(self) -> dict:
        return {"variables": self.num_vars, "constraints": self.num_constrs,
                "binaries": sum(self.is_binary)}

    # -- export ---------------------------------------------------------------

    def to_lp_text(self) -> str:
        """LP-format-style text dump for external solvers and debugging."""

        def vname(i):
            return self.var_name[i] or f"x{i}"

        def expr(idxs, coefs):
            parts = []
            for v, a in zip(idxs, coefs):
                sign = "+" if a >= 0 else "-"
                parts.append(f"{sign} {abs(a):g} {vname(v)}")
            return " ".join(parts) if parts else "0"

        out = ["Minimize", " obj: " + expr(sorted(self.obj), [self.obj[v] for v in sorted(self.obj)]),
               "Subject To"]
        for n, (idxs, coefs, lo, hi) in enumerate(self.rows):
            e = expr(idxs, coefs)
            if lo == hi:
                out.append(f" c{n}: {e} = {lo:g}")
            else:
                if hi < INF:
                    out.append(f" c{n}: {e} <= {hi:g}")
                if lo > -INF:
                    out.append(f" c{n}l: {e} >= {lo:g}")
        out.append("Bounds")
        for i in range(self.num_vars):
            out.append(f" {self.lb[i]} <= {vname(i)} <= {self.ub[i]}")
        out.append("Generals")
        out.append(" " + " ".join(vname(i) for i in range(self.num_vars)))
        out.append("End")
        return "\n".join(out)


def solve(model: Model, cfg: SolverConfig | None = None) -> Solution:
    cfg = cfg or SolverConfig()
    if cfg.backend == "external":
        return _solve_external(model, cfg)
    return _BranchAndBound(model, cfg).run()


# ---------------------------------------------------------------------------
# Builtin backend


class _BranchAndBound:
    def __init__(self, model: Model, cfg: SolverConfig):
        self.m = model
        self.cfg = cfg
        n = model.num_vars
        self.lb = list(model.lb)
        self.ub = list(model.ub)

        # objective posted as a row so the incumbent bound propagates
        obj_idxs = sorted(model.obj)
        obj_coefs = [model.obj[v] for v in obj_idxs]
        self.rows = [(list(i), list(c), lo, hi) for (i, c, lo, hi) in model.rows]
        self.obj_row = len(self.rows)
        self.rows.append((obj_idxs, obj_coefs, -INF, INF))

        self.cols: list[list[tuple[int, float]]] = [[] for _ in range(n)]
        for r, (idxs, coefs, _, _) in enumerate(self.rows):
            for v, a in zip(idxs, coefs):
                self.cols[v].append((r, a))

        self.min_act = [0.0] * len(self.rows)
        self.max_act = [0.0] * len(self.rows)
        for r, (idxs, coefs, _, _) in enumerate(self.rows):
            lo = hi = 0.0
            for v, a in zip(idxs, coefs):
                if a > 0:
                    lo += a * self.lb[v]
                    hi += a * self.ub[v]
                else:
                    lo += a * self.ub[v]
                    hi += a * self.lb[v]
            self.min_act[r] = lo
            self.max_act[r] = hi

        self.trail: list[tuple[int, bool, int]] = []   # (var, is_lb, old value)
        self.queue: deque[int] = deque()
        self.in_queue = [False] * len(self.rows)
        self.row_lo = [lo for (_, _, lo, _) in self.rows]
        self.demand_set: set[int] = set()
        for r, lo in enumerate(self.row_lo):
            if lo > -INF and self.min_act[r] < lo - _EPS:
                self.demand_set.add(r)

        order = model.branch_priority or [
            i for i in range(n) if model.is_binary[i]
        ]
        self.order = order
        self.best: list[int] | None = None
        self.best_obj = INF
        self.nodes = 0
        self.scan_row = 0
        self.deadline = None
        if cfg.time_limit is not None:
            self.deadline = _time.monotonic() + cfg.time_limit

    def _demanding_decision(self) -> tuple[int, int] | None:
        """A binary from a row whose lower side is not yet reachable from the
        current minimum activity, set toward satisfying it (demand-driven
        dive: one-of and flow rows get completed instead of zeroed out)."""
        for r in sorted(self.demand_set):
            idxs, coefs, _, _ = self.rows[r]
            for v, a in zip(idxs, coefs):
                if self.lb[v] < self.ub[v] and self.m.is_binary[v]:
                    return v, (1 if a > 0 else 0)
        return None

    # -- bound updates with trail ---------------------------------------------

    def _refresh_demand(self, r: int):
        lo = self.row_lo[r]
        if lo > -INF and self.min_act[r] < lo - _EPS:
            self.demand_set.add(r)
        else:
            self.demand_set.discard(r)

    def _set_lb(self, v: int, val: int) -> bool:
        if val <= self.lb[v]:
            return True
        if val > self.ub[v]:
            return False
        delta = val - self.lb[v]
        self.trail.append((v, True, self.lb[v]))
        self.lb[v] = val
        for r, a in self.cols[v]:
            if a > 0:
                self.min_act[r] += a * delta
                self._refresh_demand(r)
            else:
                self.max_act[r] += a * delta
            if not self.in_queue[r]:
                self.in_queue[r] = True
                self.queue.append(r)
        return True

    def _set_ub(self, v: int, val: int) -> bool:
        if val >= self.ub[v]:
            return True
        if val < self.lb[v]:
            return False
        delta = val - self.ub[v]
        self.trail.append((v, False, self.ub[v]))
        self.ub[v] = val
        for r, a in self.cols[v]:
            if a > 0:
                self.max_act[r] += a * delta
            else:
                self.min_act[r] += a * delta
                self._refresh_demand(r)
            if not self.in_queue[r]:
                self.in_queue[r] = True
                self.queue.append(r)
        return True

    def _undo_to(self, mark: int):
        while len(self.trail) > mark:
            v, is_lb, old = self.trail.pop()
            if is_lb:
                delta = old - self.lb[v]
                self.lb[v] = old
                for r, a in self.cols[v]:
                    if a > 0:
                        self.min_act[r] += a * delta
                        self._refresh_demand(r)
                    else:
                        self.max_act[r] += a * delta
            else:
                delta = old - self.ub[v]
                self.ub[v] = old
                for r, a in self.cols[v]:
                    if a > 0:
                        self.max_act[r] += a * delta
                    else:
                        self.min_act[r] += a * delta
                        self._refresh_demand(r)
        while self.queue:
            self.in_queue[self.queue.popleft()] = False

    # -- propagation ------------------------------------------------------------

    def _propagate(self) -> bool:
        rows = self.rows
        while self.queue:
            r = self.queue.popleft()
            self.in_queue[r] = False
            idxs, coefs, lo, hi = rows[r]
            if r == self.obj_row:
                hi = self.best_obj - _IMPROVE if self.best_obj < INF else INF
            mn, mx = self.min_act[r], self.max_act[r]
            if mn > hi + _EPS or mx < lo - _EPS:
                return False
            if mn >= lo - _EPS and mx <= hi + _EPS:
                continue  # entailed
            for v, a in zip(idxs, coefs):
                lv, uv = self.lb[v], self.ub[v]
                if lv == uv:
                    continue
                if a > 0:
                    if hi < INF:
                        room = (hi - (mn - a * lv)) / a
                        new_ub = math.floor(room + _EPS)
                        if new_ub < uv:
                            if not self._set_ub(v, new_ub):
                                return False
                            uv = new_ub
                    if lo > -INF:
                        need = (lo - (mx - a * uv)) / a
                        new_lb = math.ceil(need - _EPS)
                        if new_lb > lv:
                            if not self._set_lb(v, new_lb):
                                return False
                else:
                    if hi < INF:
                        room = (hi - (mn - a * uv)) / a
                        new_lb = math.ceil(room - _EPS)
                        if new_lb > lv:
                            if not self._set_lb(v, new_lb):
                                return False
                            lv = new_lb
                    if lo > -INF:
                        need = (lo - (mx - a * lv)) / a
                        new_ub = math.floor(need + _EPS)
                        if new_ub < uv:
                            if not self._set_ub(v, new_ub):
                                return False
                mn, mx = self.min_act[r], self.max_act[r]
                if mn > hi + _EPS or mx < lo - _EPS:
                    return False
        return True

    def _enqueue_all(self):
        for r in range(len(self.rows)):
            if not self.in_queue[r]:
                self.in_queue[r] = True
                self.queue.append(r)

    # -- leaf handling ---------------------------------------------------------

    def _leaf_check(self) -> tuple[bool, int | None]:
        """Verify the all-at-lower-bound assignment; return (ok, violated row)."""
        for r, (idxs, coefs, lo, hi) in enumerate(self.rows):
            if r == self.obj_row:
                hi = self.best_obj - _IMPROVE if self.best_obj < INF else INF
            val = 0.0
            for v, a in zip(idxs, coefs):
                val += a * self.lb[v]
            if val > hi + _EPS or val < lo - _EPS:
                return False, r
        return True, None

    def _record_incumbent(self):
        self.best = list(self.lb)
        self.best_obj = sum(a * self.lb[v] for v, a in self.m.obj.items())
        # re-tighten the objective row everywhere
        if not self.in_queue[self.obj_row]:
            self.in_queue[self.obj_row] = True
            self.queue.append(self.obj_row)

    # -- search ------------------------------------------------------------------

    def run(self) -> Solution:
        self._enqueue_all()
        if not self._propagate():
            return Solution("infeasible", nodes=1)

        # frames: (trail mark, var, values left to try, order pointer)
        stack: list[list] = []
        ptr = 0
        limit_hit = False

        def next_branch_var(start: int) -> tuple[int | None, int]:
            i = start
            order = self.order
            while i < len(order):
                v = order[i]
                if self.lb[v] < self.ub[v]:
                    return v, i
                i += 1
            return None, i

        def values_for(v: int, preferred: int | None = None) -> list[int]:
            h = self.m.hint[v]
            if h is None:
                h = preferred
            lo, hi = self.lb[v], self.ub[v]
            if h is not None and lo <= h <= hi:
                other = lo if h != lo else hi
                return [h, other] if other != h else [h]
            return [lo, hi] if hi != lo else [lo]

        while True:
            self.nodes += 1
            if self.cfg.node_limit is not None and self.nodes > self.cfg.node_limit:
                limit_hit = True
                break
            if self.deadline is not None and self.nodes % 64 == 0:
                if _time.monotonic() > self.deadline:
                    limit_hit = True
                    break

            preferred = None
            demand = self._demanding_decision()
            if demand is not None:
                var, preferred = demand
            else:
                var, ptr = next_branch_var(ptr)
            if var is None:
                ok, bad_row = self._leaf_check()
                if ok:
                    self._record_incumbent()
                elif bad_row is not None:
                    # fall back to bisection on an unfixed integer in the row
                    idxs, _, _, _ = self.rows[bad_row]
                    free = [v for v in idxs if self.lb[v] < self.ub[v]]
                    if free:
                        v = free[0]
                        mid = (self.lb[v] + self.ub[v]) // 2
                        stack.append([len(self.trail), v,
                                      [("ub", mid), ("lb", mid + 1)], ptr])
            else:
                stack.append([len(self.trail), var,
                              [("fix", val) for val in values_for(var, preferred)],
                              ptr])

            # descend into the next untried value, backtracking as needed
            advanced = False
            while stack:
                mark, v, alts, saved_ptr = stack[-1]
                if not alts:
                    stack.pop()
                    self._undo_to(mark)
                    continue
                kind, val = alts.pop(0)
                self._undo_to(mark)
                if kind == "fix":
                    ok = self._set_lb(v, val) and self._set_ub(v, val)
                elif kind == "ub":
                    ok = self._set_ub(v, val)
                else:
                    ok = self._set_lb(v, val)
                if ok and self.best_obj < INF and not self.in_queue[self.obj_row]:
                    self.in_queue[self.obj_row] = True
                    self.queue.append(self.obj_row)
                if ok and self._propagate():
                    ptr = saved_ptr
                    advanced = True
                    break
            if not advanced:
                break  # tree exhausted

        if limit_hit:
            if self.best is not None:
                return Solution("timelimit", self.best_obj, self.best, self.nodes)
            return Solution("timelimit", nodes=self.nodes)
        if self.best is None:
            return Solution("infeasible", nodes=self.nodes)
        return Solution("optimal", self.best_obj, self.best, self.nodes, gap=0.0)


# ---------------------------------------------------------------------------
# External backend (scipy / HiGHS)


def _solve_external(model: Model, cfg: SolverConfig) -> Solution:
    import numpy as np
    from scipy import optimize, sparse

    n = model.num_vars
    c = np.zeros(n)
    for v, a in model.obj.items():
        c[v] = a
    rows_i, rows_j, rows_a = [], [], []
    lo_list, hi_list = [], []
    for r, (idxs, coefs, lo, hi) in enumerate(model.rows):
        for v, a in zip(idxs, coefs):
            rows_i.append(r)
            rows_j.append(v)
            rows_a.append(a)
        lo_list.append(lo if lo > -INF else -np.inf)
        hi_list.append(hi if hi < INF else np.inf)
    if model.rows:
        A = sparse.csr_matrix((rows_a, (rows_i, rows_j)), shape=(len(model.rows), n))
        constraints = optimize.LinearConstraint(A, lo_list, hi_list)
    else:
        constraints = None
    res = optimize.milp(
        c,
        constraints=constraints,
        integrality=np.ones(n),
        bounds=optimize.Bounds(np.array(model.lb, float), np.array(model.ub, float)),
        options={"time_limit": cfg.time_limit} if cfg.time_limit else None,
    )
    if res.status == 2 or res.x is None:
        return Solution("infeasible")
    values = [int(round(x)) for x in res.x]
    obj = float(sum(model.obj.get(v, 0.0) * values[v] for v in range(n)))
    status = "optimal" if res.status == 0 else "timelimit"
    return Solution(status, obj, values, gap=0.0 if res.status == 0 else INF)
