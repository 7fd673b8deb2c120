"""Executable path planning: from a high-level plan to grid paths.

The satisfied simple path is first recovered from the automaton, together
with the clause actually satisfied per label, the robots realizing it, and
the negative conjunction that was relaxed away.  Each subtask then becomes a
point-to-region planning problem on a time-expanded grid graph: essential
robots reach (or hold) their regions, negative literals cap per-region
occupancy en route and at the deadline, and optional collision constraints
forbid shared cells and head-on swaps.  Rounds are solved in sequence with
growing horizons; completed rounds shift all later deadlines by the overrun.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .buchi import Clause, Label, Nba, is_top, relax_clause
from .decompose import Poset
from .ltl import Atom
from .milp import HighLevelPlan, SubtaskRecord
from .solver import Model, SolverConfig, solve
from .workspace import Cell, Metric, Workspace

log = logging.getLogger(__name__)

Robot = tuple[int, int]


class StageFailure(RuntimeError):
    """A planning stage ran out of alternatives; the caller should advance."""


class InternalInconsistency(RuntimeError):
    """The high-level plan does not replay in the automaton (a planner bug)."""


# ---------------------------------------------------------------------------
# Simple path extraction


@dataclass
class PathStep:
    sid: int
    edge: tuple[str, str]
    v_pos: Clause                  # essential clause of the starting vertex label
    v_neg: Clause                  # reinstated negative conjunction
    e_pos: Clause
    e_neg: Clause
    v_robots: dict[Atom, tuple[Robot, ...]]
    e_robots: dict[Atom, tuple[Robot, ...]]
    completion: int
    used_return_clause: bool = False
    exact_targets: dict[Robot, Cell] = field(default_factory=dict)


@dataclass
class SimplePathAnnotated:
    steps: list[PathStep]
    vertices: list[str]


def _clause_sort_key(c: Clause):
    return c.key()


def _neg_candidates(full_label: Label, pos: Clause) -> list[Clause]:
    """Full clauses whose positive part matches the essential clause."""
    if is_top(full_label):
        return [Clause()] if not pos.pos else []
    out = [c for c in full_label if relax_clause(c) == Clause(pos.pos)]
    return sorted(out, key=_clause_sort_key)


def extract_simple_path(
    plan: HighLevelPlan,
    sub: Nba,
    full: Nba,
    poset: Poset,
    alias: dict[str, str] | None = None,
    initial_counts: dict[tuple[int, int], int] | None = None,
) -> SimplePathAnnotated:
    """Recover the vertex sequence the plan drives through the sub-automaton.

    Walks the time axis matching each completed subtask's labels against the
    outgoing edges, backtracking over ties.  For every step the complete
    clause (essential positives plus the relaxed-away negatives) is selected
    from the full automaton; vertex-label negatives are chosen so they are
    implied by the preceding edge's complete clause.
    """
    alias = alias or {}

    def full_edge(e):
        a, b = e
        return full.edge_label[(alias.get(a, a), alias.get(b, b))]

    def full_vertex(v):
        return full.vlabel(alias.get(v, v))

    order = plan.order
    v0, vacc = poset.v0, poset.v_accept

    def matches(v1: str, v2: str, sid: int) -> bool:
        st = poset.subtasks[sid]
        return (sub.edge_label.get((v1, v2)) == st.elabel
                and sub.vlabel(v1) == st.vlabel)

    # depth-first over matching edges, vertices visited at most once
    def search(v1: str, idx: int, seen: frozenset) -> list[str] | None:
        if idx == len(order):
            return [v1] if v1 == vacc else None
        sid = order[idx]
        for v2 in sub.succ(v1):
            if v2 in seen or not matches(v1, v2, sid):
                continue
            rest = search(v2, idx + 1, seen | {v2})
            if rest is not None:
                return [v1] + rest
        return None

    vertices = search(v0, 0, frozenset({v0}))
    if vertices is None:
        raise InternalInconsistency("no automaton edge matches the planned subtask order")

    steps: list[PathStep] = []
    prev_complete = None
    for idx, sid in enumerate(order):
        v1, v2 = vertices[idx], vertices[idx + 1]
        rec: SubtaskRecord = plan.records[sid]

        e_pos = rec.edge_clause if rec.edge_clause is not None else Clause()
        if rec.used_return_clause:
            # the satisfied clause came from the handoff augmentation; in the
            # full automaton the matching clause is the one implied by it
            cands = sorted(
                (c for c in ([] if is_top(full_edge((v1, v2))) else full_edge((v1, v2)))
                 if Clause(c.pos).is_subformula_of(Clause(e_pos.pos))),
                key=_clause_sort_key,
            ) or [Clause()]
            e_neg = Clause(neg=cands[0].neg)
        else:
            cands = _neg_candidates(full_edge((v1, v2)), e_pos)
            if not cands:
                raise InternalInconsistency(
                    f"edge {v1}->{v2}: no full clause matches {e_pos}")
            e_neg = Clause(neg=cands[0].neg)

        v_pos = rec.vertex_clause if rec.vertex_clause is not None else Clause()
        vcands = _neg_candidates(full_vertex(v1), v_pos)
        if not sub.vlabel(v1):
            v_neg = Clause()  # no self-loop in the planning automaton: no dwell
        elif not vcands:
            raise InternalInconsistency(f"vertex {v1}: no full clause matches {v_pos}")
        else:
            if prev_complete is not None:
                implied = [c for c in vcands if c.is_subformula_of(prev_complete)]
                if implied:
                    vcands = implied
            elif initial_counts is not None:
                sat = [c for c in vcands if c.satisfied(initial_counts)]
                if sat:
                    vcands = sat
            v_neg = Clause(neg=vcands[0].neg)

        steps.append(PathStep(
            sid, (v1, v2),
            v_pos, v_neg, e_pos, e_neg,
            dict(rec.vertex_robots), dict(rec.edge_robots),
            rec.completion, rec.used_return_clause,
            dict(rec.exact_targets),
        ))
        prev_complete = Clause(e_pos.pos, e_neg.neg)
    return SimplePathAnnotated(steps, vertices)


# ---------------------------------------------------------------------------
# GMRPP instances


@dataclass
class GmrppInstance:
    horizon: int
    x_init: dict[Robot, Cell]
    r1: dict[Robot, set[Cell]] = field(default_factory=dict)     # hold region
    r12: dict[Robot, set[Cell]] = field(default_factory=dict)    # reach region at T
    goal_exact: dict[Robot, Cell] = field(default_factory=dict)  # reach cell at T
    running_neg: list[Atom] = field(default_factory=list)
    terminal_neg: list[Atom] = field(default_factory=list)
    frozen: set[Robot] = field(default_factory=set)              # treated as obstacles
    confine: dict[Robot, set[Cell]] = field(default_factory=dict)
    collision: bool = True

    def moving(self) -> list[Robot]:
        return sorted(r for r in self.x_init if r not in self.frozen)


@dataclass
class ExecutionState:
    """Progress bookkeeping across sequential planning rounds."""

    paths: dict[Robot, list[Cell]]
    zeta: dict[Robot, int]
    c: int
    time_axis: list[int]
    timelines: dict[Robot, list[int]]

    @classmethod
    def fresh(cls, starts: dict[Robot, Cell], plan: HighLevelPlan) -> "ExecutionState":
        return cls(
            {r: [starts[r]] for r in sorted(starts)},
            {r: 0 for r in starts},
            0,
            list(plan.time_axis),
            {r: list(plan.timelines[r]) for r in plan.timelines},
        )

    def current_cells(self) -> dict[Robot, Cell]:
        return {r: p[-1] for r, p in self.paths.items()}


def build_gmrpp(
    step: PathStep,
    state: ExecutionState,
    w: Workspace,
    horizon: int,
    execution: str = "full",          # "full" | "partial"
    sync: str = "seq",                # "seq" | "sim"
    collision: bool = True,
    plan: HighLevelPlan | None = None,
    metric: Metric | None = None,
) -> GmrppInstance:
    """Instance for one subtask: who must hold, who must arrive, who may move."""
    cells = state.current_cells()
    inst = GmrppInstance(horizon, dict(cells), collision=collision)

    for atom, robots in step.v_robots.items():
        for r in robots:
            inst.r1.setdefault(r, set()).update(w.regions[atom.region])
    for atom, robots in step.e_robots.items():
        region = w.regions.get(atom.region)
        if region is None:
            continue
        for r in robots:
            inst.r12.setdefault(r, set()).update(region)
    inst.goal_exact.update(step.exact_targets)

    running = sorted(step.v_neg.neg)
    terminal = sorted(step.e_neg.neg)

    neg_types = {a.rtype for a in running + terminal}
    r_neg = {r for r in cells if r[1] in neg_types}

    involved = set(inst.r1) | set(inst.r12) | set(inst.goal_exact) | r_neg

    # simultaneous mode: pre-position robots that would otherwise be late
    if sync == "sim" and plan is not None and metric is not None:
        taken: set[Cell] = set()
        forbidden = {c for a in running + terminal for c in w.regions[a.region]}
        for r in sorted(cells):
            if r in inst.r1 or r in inst.r12:
                continue
            z = state.zeta[r]
            if z >= len(plan.waypoints[r]):
                continue
            deadline = state.timelines[r][z]
            gap = deadline - state.time_axis[state.c]
            target = plan.waypoints[r][z]
            dist = metric.t_star(cells[r], target)
            if dist is None or dist <= gap:
                continue
            cell = _intermediate_cell(w, cells[r], target,
                                      min(dist - gap, horizon),
                                      taken, forbidden)
            if cell is not None:
                inst.goal_exact[r] = cell
                taken.add(cell)
                involved.add(r)

    if execution == "partial":
        frozen = {r for r in cells if r not in involved}
        inst.frozen = frozen
        # occupancy by frozen robots discounts the negative literal budgets
        running2, r_neg2 = _shrink_negatives(running, frozen, cells, w)
        terminal2, term_extra = _shrink_negatives(terminal, frozen, cells, w)
        inst.running_neg = running2
        inst.terminal_neg = terminal2
        for r in r_neg2 | term_extra:
            inst.frozen.discard(r)
    else:
        inst.running_neg = running
        inst.terminal_neg = terminal
    return inst


def _intermediate_cell(w: Workspace, src: Cell, region: int, steps_needed: int,
                       taken: set[Cell], forbidden: set[Cell]) -> Cell | None:
    """A cell along a shortest route to the region, `steps_needed` in.

    Falls back to nearby unoccupied cells on the route; None when nothing
    suitable exists (the robot is then left untargeted).
    """
    goal_cells = w.regions[region]
    dist = {c: 0 for c in goal_cells}
    frontier = list(goal_cells)
    while frontier:
        nxt = []
        for c in frontier:
            for n in w.neighbors(c):
                if n not in dist:
                    dist[n] = dist[c] + 1
                    nxt.append(n)
        frontier = nxt
    if src not in dist:
        return None
    route = [src]
    cur = src
    while dist[cur] > 0:
        cur = min((n for n in w.neighbors(cur) if n in dist and dist[n] == dist[cur] - 1),
                  default=None)
        if cur is None:
            return None
        route.append(cur)
    # prefer the furthest cell still reachable this round, falling back toward
    # the robot's current position when cells are claimed or forbidden
    for idx in range(min(steps_needed, len(route) - 1), -1, -1):
        cell = route[idx]
        if cell not in taken and cell not in forbidden:
            return cell
    return None


def _shrink_negatives(literals: list[Atom], frozen: set[Robot],
                      cells: dict[Robot, Cell], w: Workspace):
    """Partial-execution literal update against frozen occupants.

    Occupants below the bound reduce it; at or above the bound, enough
    occupants are released to move and the literal tightens to one robot.
    """
    out: list[Atom] = []
    release: set[Robot] = set()
    for a in literals:
        occupants = [r for r in sorted(frozen)
                     if r[1] == a.rtype and w.region_of(cells[r]) == a.region]
        i2 = a.count - len(occupants)
        if i2 >= 1:
            out.append(Atom(i2, a.rtype, a.region))
        else:
            movers = occupants[: len(occupants) - a.count + 1]
            release.update(movers)
            out.append(Atom(1, a.rtype, a.region))
    return out, release


# ---------------------------------------------------------------------------
# Time-expanded ILP


def solve_gmrpp(inst: GmrppInstance, w: Workspace, cfg: SolverConfig
                ) -> dict[Robot, list[Cell]] | None:
    """Optimal path segments of length T for every moving robot, or None."""
    T = inst.horizon
    blocked = {inst.x_init[r] for r in inst.frozen}
    free = [c for c in w.free_cells() if c not in blocked]
    free_set = set(free)
    movers = inst.moving()

    def allowed(r: Robot, t: int) -> set[Cell]:
        cells = free_set
        if r in inst.confine:
            cells = cells & inst.confine[r]
        if r in inst.r1 and 1 <= t <= T - 1:
            cells = cells & inst.r1[r]
        return cells

    # per-robot reachability cones
    cones: dict[Robot, list[set[Cell]]] = {}
    for r in movers:
        fwd = [set() for _ in range(T + 1)]
        fwd[0] = {inst.x_init[r]} & (free_set | {inst.x_init[r]})
        for t in range(1, T + 1):
            cur = set()
            for c in fwd[t - 1]:
                cur.add(c)
                cur.update(n for n in w.neighbors(c) if n in free_set)
            fwd[t] = cur & allowed(r, t) if t < T else cur & (free_set if r not in inst.confine else allowed(r, t))
        goals = None
        if r in inst.goal_exact:
            goals = {inst.goal_exact[r]}
        elif r in inst.r12:
            goals = inst.r12[r] & free_set
        if goals is not None:
            bwd = [set() for _ in range(T + 1)]
            bwd[T] = set(goals)
            for t in range(T - 1, -1, -1):
                cur = set()
                for c in bwd[t + 1]:
                    cur.add(c)
                    cur.update(n for n in w.neighbors(c) if n in free_set)
                bwd[t] = cur & allowed(r, t) if 0 < t else cur
            cone = [fwd[t] & bwd[t] for t in range(T + 1)]
        else:
            cone = fwd
        if not cone[T] or not cone[0]:
            return None
        cones[r] = cone

    model = Model("gmrpp")
    svar: dict[tuple[Robot, Cell, int, Cell], int] = {}
    in_at: dict[tuple[Robot, Cell, int], list[int]] = {}
    out_at: dict[tuple[Robot, Cell, int], list[int]] = {}

    # distinct-goal-cell assignment: hints aim at distinct cells, and under
    # collision the assignment cost is a valid group lower bound
    assignment, group_bounds = _assign_goal_cells(w, inst, movers, free_set)
    hints = {r: _hint_path(w, inst, r, cones[r], T, free_set,
                           assignment.get(r)) for r in movers}

    # time-major creation: conflicts backtrack locally during the search
    for t in range(T):
        for r in movers:
            cone = cones[r]
            hint = hints[r]
            for u in sorted(cone[t]):
                succs = [u] + [n for n in w.neighbors(u) if n in cone[t + 1]]
                for v in succs:
                    if v not in cone[t + 1]:
                        continue
                    hv = 1 if hint is not None and hint[t] == u and hint[t + 1] == v else 0
                    var = model.add_var(0, 1, hint=hv)
                    svar[(r, u, t, v)] = var
                    out_at.setdefault((r, u, t), []).append(var)
                    in_at.setdefault((r, v, t + 1), []).append(var)

    for r in movers:
        cone = cones[r]
        start = inst.x_init[r]
        outs = out_at.get((r, start, 0), [])
        if not outs:
            return None
        model.add_constr([(v, 1.0) for v in outs], "==", 1, "source")        # (38)
        for t in range(1, T):
            for c in sorted(cone[t]):
                ins = in_at.get((r, c, t), [])
                outs = out_at.get((r, c, t), [])
                if ins or outs:
                    model.add_constr([(v, 1.0) for v in ins]
                                     + [(v, -1.0) for v in outs], "==", 0, "flow")  # (37)
        goals = ({inst.goal_exact[r]} if r in inst.goal_exact
                 else inst.r12[r] & free_set if r in inst.r12 else None)
        if goals is not None:
            terms = [(v, 1.0) for g in sorted(goals) for v in in_at.get((r, g, T), [])]
            if not terms:
                return None
            model.add_constr(terms, "==", 1, "target")                       # (39)
        if r in inst.r1:
            for t in range(1, T):
                terms = [(v, 1.0) for g in sorted(inst.r1[r] & free_set)
                         for v in in_at.get((r, g, t), [])]
                if not terms:
                    return None
                model.add_constr(terms, "==", 1, "hold")                     # (39) t<T

    # running and terminal occupancy caps                                  (40)
    frozen_count: dict[tuple[int, int], int] = {}
    for r in inst.frozen:
        k = w.region_of(inst.x_init[r])
        if k is not None:
            key = (r[1], k)
            frozen_count[key] = frozen_count.get(key, 0) + 1
    for lits, times in ((inst.running_neg, range(1, T)), (inst.terminal_neg, [T])):
        for a in lits:
            budget = a.count - 1 - frozen_count.get((a.rtype, a.region), 0)
            cells_k = [c for c in sorted(w.regions[a.region]) if c in free_set]
            for t in times:
                terms = []
                for r in movers:
                    if r[1] != a.rtype:
                        continue
                    for c in cells_k:
                        for v in in_at.get((r, c, t), []):
                            terms.append((v, 1.0))
                if budget < 0:
                    return None
                if terms:
                    model.add_constr(terms, "<=", budget, "avoid")

    if inst.collision:
        for t in range(1, T + 1):
            arrivals: dict[Cell, list[int]] = {}
            for r in movers:
                for c in cones[r][t]:
                    vs = in_at.get((r, c, t), [])
                    if vs:
                        arrivals.setdefault(c, []).extend(vs)
            for c, vs in arrivals.items():
                if len(vs) > 1:
                    model.add_constr([(v, 1.0) for v in vs], "<=", 1, "meet")  # (42)
        for t in range(T):
            swaps: dict[tuple[Cell, Cell], list[int]] = {}
            for (r, u, tt, v), var in svar.items():
                if tt == t and u != v:
                    key = (min(u, v), max(u, v))
                    swaps.setdefault(key, []).append(var)
            for key, vs in swaps.items():
                if len(vs) > 1:
                    model.add_constr([(v, 1.0) for v in vs], "<=", 1, "headon")  # (43)

    # objective with per-robot cost bounds                                  (41)
    obj_terms = []
    cost_of: dict[Robot, int] = {}
    for r in movers:
        cost_terms = []
        for (rr, u, t, v), var in svar.items():
            if rr == r and u != v:
                cost_terms.append((var, float(w.move_cost(u, v))))
        lb = _distance_lb(w, inst, r, free_set)
        cost_var = model.add_var(lb, 4 * (w.width * w.height) * (T + 1))
        model.add_constr(cost_terms + [(cost_var, -1.0)], "==", 0, "cost")
        cost_of[r] = cost_var
        obj_terms.append((cost_var, 1.0))
    if inst.collision:
        # end cells are pairwise distinct, so each goal-sharing group's total
        # cost is at least its minimum-cost assignment
        for group, bound in group_bounds:
            if len(group) > 1 and bound > 0:
                model.add_constr([(cost_of[r], 1.0) for r in group], ">=",
                                 bound, "assign-lb")
    model.set_objective(obj_terms)

    sol = solve(model, cfg)
    if not sol.feasible:
        return None

    segments: dict[Robot, list[Cell]] = {}
    for r in movers:
        path = [inst.x_init[r]]
        for t in range(T):
            cur = path[-1]
            nxt = None
            for v in [cur] + w.neighbors(cur):
                var = svar.get((r, cur, t, v))
                if var is not None and sol.value(var) == 1:
                    nxt = v
                    break
            if nxt is None:
                return None
            path.append(nxt)
        segments[r] = path
    for r in inst.frozen:
        segments[r] = [inst.x_init[r]] * (T + 1)
    return segments


def _assign_goal_cells(w: Workspace, inst: GmrppInstance, movers: list[Robot],
                       free_set: set[Cell]):
    """Distinct end cells for robots with goals, greedily by distance, plus
    the exact minimum assignment cost per goal-sharing group (a valid lower
    bound on the group's travel cost when end cells must be distinct)."""
    from itertools import permutations

    goal_sets: dict[Robot, frozenset[Cell]] = {}
    for r in movers:
        if r in inst.goal_exact:
            goal_sets[r] = frozenset({inst.goal_exact[r]})
        elif r in inst.r12:
            goal_sets[r] = frozenset(inst.r12[r] & free_set)
    # group robots whose goal sets overlap
    groups: list[set[Robot]] = []
    for r in sorted(goal_sets):
        merged = {r}
        rest = []
        for grp in groups:
            if any(goal_sets[r] & goal_sets[r2] for r2 in grp):
                merged |= grp
            else:
                rest.append(grp)
        groups = rest + [merged]

    dist_tables: dict[Robot, dict[Cell, int]] = {}
    for r in goal_sets:
        dist_tables[r] = _bfs_from(w, inst.x_init[r], free_set)

    assignment: dict[Robot, Cell] = {}
    bounds: list[tuple[tuple[Robot, ...], int]] = []
    for grp in groups:
        robots = sorted(grp)
        cells = sorted(set().union(*(goal_sets[r] for r in robots)))
        best = None
        if len(cells) <= 7 and len(robots) <= len(cells):
            for perm in permutations(cells, len(robots)):
                total = 0
                ok = True
                for r, c in zip(robots, perm):
                    d = dist_tables[r].get(c) if c in goal_sets[r] else None
                    if d is None:
                        ok = False
                        break
                    total += d
                if ok and (best is None or total < best[0]):
                    best = (total, perm)
        if best is not None:
            for r, c in zip(robots, best[1]):
                assignment[r] = c
            bounds.append((tuple(robots), best[0]))
        else:
            # fall back to greedy distinct cells; bound stays additive
            taken: set[Cell] = set()
            for r in robots:
                options = [(dist_tables[r][c], c) for c in sorted(goal_sets[r])
                           if c in dist_tables[r] and c not in taken]
                if options:
                    _, c = min(options)
                    assignment[r] = c
                    taken.add(c)
    return assignment, bounds


def _bfs_from(w: Workspace, start: Cell, free_set: set[Cell]) -> dict[Cell, int]:
    dist = {start: 0}
    frontier = [start]
    while frontier:
        nxt = []
        for c in frontier:
            for n in w.neighbors(c):
                if n in free_set and n not in dist:
                    dist[n] = dist[c] + 1
                    nxt.append(n)
        frontier = nxt
    return dist


def _hint_path(w: Workspace, inst: GmrppInstance, r: Robot,
               cone: list[set[Cell]], T: int, free_set: set[Cell],
               assigned: Cell | None = None) -> list[Cell] | None:
    """Greedy route guess used for value ordering: move out immediately, then
    wait at the goal (early arrivals keep re-satisfying region targets)."""
    start = inst.x_init[r]
    if assigned is not None:
        goals = {assigned}
    elif r in inst.goal_exact:
        goals = {inst.goal_exact[r]}
    elif r in inst.r12:
        goals = inst.r12[r] & free_set
    elif r not in inst.r1:
        return [start] * (T + 1)
    else:
        return [start] * (T + 1)  # hold robots stay inside their region
    dist = {g: 0 for g in goals if g in free_set}
    frontier = list(dist)
    while frontier:
        nxt = []
        for c in frontier:
            for n in w.neighbors(c):
                if n in free_set and n not in dist:
                    dist[n] = dist[c] + 1
                    nxt.append(n)
        frontier = nxt
    if start not in dist or dist[start] > T:
        return None
    path = [start]
    cur = start
    while dist[cur] > 0:
        cur = min(n for n in w.neighbors(cur) if n in dist and dist[n] == dist[cur] - 1)
        path.append(cur)
    path.extend([cur] * (T + 1 - len(path)))
    return path


def _distance_lb(w: Workspace, inst: GmrppInstance, r: Robot,
                 free_set: set[Cell]) -> int:
    goals = ({inst.goal_exact[r]} if r in inst.goal_exact
             else inst.r12[r] & free_set if r in inst.r12 else None)
    if goals is None:
        return 0
    start = inst.x_init[r]
    if start in goals:
        return 0
    dist = {g: 0 for g in goals}
    frontier = list(dist)
    while frontier:
        nxt = []
        for c in frontier:
            for n in w.neighbors(c):
                if n in free_set and n not in dist:
                    dist[n] = dist[c] + 1
                    if n == start:
                        return dist[n]
                    nxt.append(n)
        frontier = nxt
    return 0


# ---------------------------------------------------------------------------
# Sequential execution (the round loop)


@dataclass
class ExecutableSegmentSet:
    paths: dict[Robot, list[Cell]]
    state: ExecutionState


def run_sequence(
    path: SimplePathAnnotated,
    plan: HighLevelPlan,
    w: Workspace,
    cfg: SolverConfig,
    starts: dict[Robot, Cell] | None = None,
    execution: str = "full",
    sync: str = "seq",
    collision: bool = True,
    metric: Metric | None = None,
    horizon_step: int = 10,
    horizon_extra: int = 100,
    capture: list | None = None,
) -> ExecutableSegmentSet:
    """Solve one planning round per subtask, concatenating the segments.

    Horizons start at the high-level gap, growing by `horizon_step` up to
    `horizon_extra` beyond the initial guess; each solved round shifts all
    future deadlines by its overrun.
    """
    starts = dict(starts) if starts is not None else dict(w.robots)
    state = ExecutionState.fresh(starts, plan)

    for step in path.steps:
        prev_t = state.time_axis[state.c - 1] if state.c > 0 else 0
        gap = state.time_axis[state.c] - prev_t
        if gap == 0:
            # the subtask is already satisfied (completion pinned at time 0)
            for atom, robots in step.e_robots.items():
                for r in robots:
                    state.zeta[r] += 1
            state.c += 1
            continue
        base = max(1, gap)
        solved = None
        horizon = base
        while horizon <= base + horizon_extra:
            inst = build_gmrpp(step, state, w, horizon, execution, sync,
                               collision, plan, metric)
            solved = solve_gmrpp(inst, w, cfg)
            if solved is not None:
                break
            horizon += horizon_step
        if solved is None:
            raise StageFailure(f"no executable segment for subtask {step.sid}")
        if capture is not None:
            capture.append((inst, solved))
        t_e = horizon
        shift = t_e - gap
        for r, seg in solved.items():
            state.paths[r].extend(seg[1:])
        for r in state.paths:
            if r not in solved:
                state.paths[r].extend([state.paths[r][-1]] * t_e)
        if shift:
            state.time_axis = [
                t + shift if i >= state.c else t
                for i, t in enumerate(state.time_axis)
            ]
            for r, tl in state.timelines.items():
                z = state.zeta[r]
                state.timelines[r] = [
                    t + shift if i >= z else t for i, t in enumerate(tl)
                ]
        for atom, robots in step.e_robots.items():
            for r in robots:
                state.zeta[r] += 1
        state.c += 1

    return ExecutableSegmentSet({r: list(p) for r, p in state.paths.items()}, state)


# ---------------------------------------------------------------------------
# Suffix loop closing


def close_suffix(
    suffix_exec: ExecutableSegmentSet,
    home_cells: dict[Robot, Cell],
    essential_regions: dict[Robot, int],
    running_neg: list[Atom],
    w: Workspace,
    cfg: SolverConfig,
    collision: bool = True,
    horizon_step: int = 10,
    horizon_extra: int = 100,
) -> dict[Robot, list[Cell]]:
    """Second closing step: drive every robot to its suffix-initial cell.

    Essential robots of the handoff clause travel inside their regions (so
    the re-enabled transition stays enabled); the rest routes freely subject
    to the running negatives.  Returns the homing segments (possibly empty
    when everyone is already home).
    """
    current = {r: p[-1] for r, p in suffix_exec.paths.items()}
    if current == home_cells:
        return {r: [current[r]] for r in current}
    dists = []
    for r, cell in current.items():
        if cell != home_cells[r]:
            d = _bfs_dist(w, cell, home_cells[r],
                          w.regions[essential_regions[r]] if r in essential_regions else None)
            if d is None:
                raise StageFailure(f"robot {r} cannot reach its start cell")
            dists.append(d)
    base = max(1, max(dists, default=1))
    horizon = base
    while horizon <= base + horizon_extra:
        inst = GmrppInstance(horizon, dict(current), collision=collision)
        for r, cell in home_cells.items():
            if current[r] != cell:
                inst.goal_exact[r] = cell
            else:
                inst.goal_exact[r] = cell
        for r, k in essential_regions.items():
            inst.confine[r] = set(w.regions[k])
        inst.running_neg = list(running_neg)
        inst.terminal_neg = list(running_neg)
        solved = solve_gmrpp(inst, w, cfg)
        if solved is not None:
            return solved
        horizon += horizon_step
    raise StageFailure("homing stage infeasible at every horizon")


def _bfs_dist(w: Workspace, src: Cell, dst: Cell,
              confine: set[Cell] | None) -> int | None:
    allowed = confine if confine is not None else set(w.free_cells())
    if src == dst:
        return 0
    dist = {src: 0}
    frontier = [src]
    while frontier:
        nxt = []
        for c in frontier:
            for n in w.neighbors(c):
                if n in allowed and n not in dist:
                    dist[n] = dist[c] + 1
                    if n == dst:
                        return dist[n]
                    nxt.append(n)
        frontier = nxt
    return None
