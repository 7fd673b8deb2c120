"""Time-stamped task allocation MILPs over a routing graph.

Variables: routing binaries x[u,v,r] (robot r traverses (u,v)), arrival and
departure times t-/t+ per vertex and robot, one completion time per subtask,
clause-choice binaries per label, and auxiliary order binaries tying the
completion times to a linear extension of the poset.

Constraint families (same grouping as the construction this implements):
routing (at-most-one visit, flow, initial conditions), scheduling (big-M
travel-time coupling), logical (one clause per label, clause-vertex coupling,
synchronized edge-clause visits), temporal (span containment, precedence,
immediate-successor activation, distinct completions, first-subtask
activation and sourcing), same-fleet matching for connector-bound literals,
and the prefix-to-suffix handoff (returning robots, fleet reuse).
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .buchi import Clause, is_bottom, is_top  # noqa: F401
from .decompose import Poset
from .ltl import Atom
from .buchi import clauses as _clauses, pos_literals as _pos_lits
from .routing import RoutingGraph, RVertex
from .solver import Model, Solution, SolverConfig, solve

Robot = tuple[int, int]


@dataclass
class MilpModel:
    model: Model
    g: RoutingGraph
    poset: Poset
    x: dict[tuple[RVertex, RVertex, Robot], int] = field(default_factory=dict)
    t_minus: dict[tuple[RVertex, Robot], int] = field(default_factory=dict)
    t_plus: dict[tuple[RVertex, Robot], int] = field(default_factory=dict)
    t_e: dict[int, int] = field(default_factory=dict)
    b_clause: dict[tuple[int, int, int], int] = field(default_factory=dict)
    b_after: dict[tuple[int, int], int] = field(default_factory=dict)   # e' right after e
    b_gt: dict[tuple[int, int], int] = field(default_factory=dict)      # t_e > t_e'
    b_first: dict[int, int] = field(default_factory=dict)
    b_last: dict[int, int] = field(default_factory=dict)                # suffix only
    suffix: bool = False

    def stats(self) -> dict:
        return self.model.stats()


@dataclass
class SubtaskRecord:
    sid: int
    completion: int
    edge_clause: Clause | None            # essential clause (None = label TOP)
    edge_robots: dict[Atom, tuple[Robot, ...]]
    vertex_clause: Clause | None
    vertex_robots: dict[Atom, tuple[Robot, ...]]
    used_return_clause: bool = False
    exact_targets: dict[Robot, object] = field(default_factory=dict)


@dataclass
class HighLevelPlan:
    waypoints: dict[Robot, list] = field(default_factory=dict)      # region id or cell
    timelines: dict[Robot, list[int]] = field(default_factory=dict)
    time_axis: list[int] = field(default_factory=list)
    order: list[int] = field(default_factory=list)                  # sids by completion
    records: dict[int, SubtaskRecord] = field(default_factory=dict)
    objective: float = 0.0

    def to_dict(self) -> dict:
        return {
            "robots": {
                f"{r},{j}": {"waypoints": list(map(_wp, self.waypoints[(r, j)])),
                             "times": self.timelines[(r, j)]}
                for (r, j) in sorted(self.waypoints)
            },
            "time_axis": self.time_axis,
            "subtask_order": self.order,
        }


def _wp(w):
    return list(w) if isinstance(w, tuple) else w


# ---------------------------------------------------------------------------
# Model construction


class _MilpBuilder:
    def __init__(self, g: RoutingGraph, poset: Poset, cfg: SolverConfig):
        self.g = g
        self.poset = poset
        self.cfg = cfg
        self.M = cfg.m_max
        self.mm = MilpModel(Model("allocation"), g, poset)

    # -- variables ---------------------------------------------------------

    def make_vars(self):
        g, m = self.g, self.mm.model
        poset = self.poset
        for key in sorted(g.cls_map, key=lambda k: (k[0], k[1], k[2])):
            sid, kind, p = key
            self.mm.b_clause[key] = m.add_binary(f"b[{sid},{kind},{p}]")
        # location-sourced edges first: the demand-driven dive then grows
        # robot chains from their start locations outward
        for (u, v) in sorted(g.edges,
                             key=lambda e: (e[0].kind != "loc", str(e[0]), str(e[1]))):
            for r in g.robots[u]:
                if r in g.robots[v]:
                    self.mm.x[(u, v, r)] = m.add_binary(f"x[{u},{v},{r}]")
        for v in g.vertices:
            for r in g.robots[v]:
                if v.kind == "loc":
                    self.mm.t_minus[(v, r)] = m.add_var(0, 0, f"t-[{v},{r}]")
                    self.mm.t_plus[(v, r)] = m.add_var(0, 0, f"t+[{v},{r}]")
                else:
                    self.mm.t_minus[(v, r)] = m.add_var(0, self.M, f"t-[{v},{r}]")
                    if v.label_kind == 1:
                        self.mm.t_plus[(v, r)] = self.mm.t_minus[(v, r)]
                    else:
                        self.mm.t_plus[(v, r)] = m.add_var(0, self.M, f"t+[{v},{r}]")
        for sid in sorted(poset.elements):
            self.mm.t_e[sid] = m.add_var(0, self.M, f"te[{sid}]")
        for e in sorted(poset.elements):
            for e2 in sorted(poset.elements):
                if e == e2:
                    continue
                if poset.lt(e2, e):
                    var = m.add_var(1, 1, f"bgt[{e},{e2}]")
                elif poset.lt(e, e2):
                    var = m.add_var(0, 0, f"bgt[{e},{e2}]")
                else:
                    var = m.add_binary(f"bgt[{e},{e2}]")
                self.mm.b_gt[(e, e2)] = var
        for e in sorted(poset.elements):
            s3 = sorted(poset.immediate_after(e) | poset.parallel(e))
            for e2 in s3:
                self.mm.b_after[(e, e2)] = m.add_binary(f"bafter[{e},{e2}]")
        for e in sorted(poset.first_candidates()):
            self.mm.b_first[e] = m.add_binary(f"bfirst[{e}]")

    # -- helpers -------------------------------------------------------------

    def in_x(self, v: RVertex, r: Robot | None = None):
        out = []
        for (u, vv, rr), var in self.mm.x.items():
            if vv == v and (r is None or rr == r):
                out.append(var)
        return out

    def sum_t_minus(self, v: RVertex):
        return [(self.mm.t_minus[(v, r)], 1.0) for r in self.g.robots[v]]

    def sum_t_plus(self, v: RVertex):
        return [(self.mm.t_plus[(v, r)], 1.0) for r in self.g.robots[v]]

    def label_clause_keys(self, sid: int, kind: int) -> list[tuple[int, int, int]]:
        return sorted(k for k in self.g.cls_map if k[0] == sid and k[1] == kind)

    # -- constraint families ---------------------------------------------------

    def routing_constraints(self):
        g, m = self.g, self.mm.model
        in_lists: dict[RVertex, dict[Robot, list[int]]] = {}
        out_lists: dict[RVertex, dict[Robot, list[int]]] = {}
        for (u, v, r), var in self.mm.x.items():
            in_lists.setdefault(v, {}).setdefault(r, []).append(var)
            out_lists.setdefault(u, {}).setdefault(r, []).append(var)
        self._in_lists, self._out_lists = in_lists, out_lists

        for v in g.vertices:
            if v.kind == "loc":
                continue
            terms = [(var, 1.0) for rv in in_lists.get(v, {}).values() for var in rv]
            m.add_constr(terms, "<=", 1, "visit")                        # (1)
            for r in g.robots[v]:
                outs = out_lists.get(v, {}).get(r, [])
                ins = in_lists.get(v, {}).get(r, [])
                if outs:
                    m.add_constr([(var, 1.0) for var in outs]
                                 + [(var, -1.0) for var in ins], "<=", 0, "flow")  # (2)
        for robot, v in g.loc_of.items():
            outs = out_lists.get(v, {}).get(robot, [])
            if outs:
                m.add_constr([(var, 1.0) for var in outs], "<=", 1, "init-out")    # (2.5)

    def scheduling_constraints(self):
        g, m = self.g, self.mm.model
        M = self.M
        for v in g.vertices:
            if v.kind == "loc":
                continue
            for r in g.robots[v]:
                ins = self._in_lists.get(v, {}).get(r, [])
                tm, tp = self.mm.t_minus[(v, r)], self.mm.t_plus[(v, r)]
                m.add_constr([(tm, 1.0)] + [(var, -M) for var in ins], "<=", 0, "t-gate")  # (3)
                if tp != tm:
                    m.add_constr([(tp, 1.0)] + [(var, -M) for var in ins], "<=", 0, "t-gate")
                    m.add_constr([(tm, 1.0), (tp, -1.0)], "<=", 0, "dwell")
        for (u, v), (tstar, _) in g.edges.items():
            u_sid = None if u.kind == "loc" else u.sid
            v_sid = None if v.kind == "loc" else v.sid
            bump = 1 if (
                u_sid is not None and v_sid is not None
                and self.poset.incomparable(u_sid, v_sid)
            ) else 0
            for r in g.robots[v]:
                var = self.mm.x.get((u, v, r))
                if var is None:
                    continue
                tu = self.mm.t_plus[(u, r)]
                tv = self.mm.t_minus[(v, r)]
                # t_u+ + (T* + bump) x <= t_v- + M (1 - x)                  (4)
                m.add_constr(
                    [(tu, 1.0), (tv, -1.0), (var, tstar + bump + M)], "<=", M, "travel"
                )

    def logical_constraints(self):
        g, m = self.g, self.mm.model
        for sid in sorted(self.poset.elements):
            for kind in (1, 0):
                keys = self.label_clause_keys(sid, kind)
                if not keys:
                    continue
                m.add_constr([(self.mm.b_clause[k], 1.0) for k in keys], "==", 1,
                             "one-clause")                               # (5)
                for k in keys:
                    p = k[2]
                    verts = g.cls_map[k]
                    total = len(verts)
                    terms = []
                    for v in verts:
                        for var in self.in_x(v):
                            terms.append((var, 1.0))
                    terms.append((self.mm.b_clause[k], -float(total)))
                    m.add_constr(terms, "==", 0, "clause-visits")        # (6)
                    if kind == 1 and len(verts) > 1:
                        for a, b in zip(verts, verts[1:]):
                            m.add_constr(self.sum_t_minus(a)
                                         + [(t, -c) for t, c in self.sum_t_minus(b)],
                                         "==", 0, "sync")                # (7)

    def temporal_constraints(self):
        g, m, poset = self.g, self.mm.model, self.poset
        M = self.M
        for sid in sorted(poset.elements):
            te = self.mm.t_e[sid]
            keys = self.label_clause_keys(sid, 1)
            if keys:
                terms = [(te, 1.0)]
                for k in keys:
                    rep = g.cls_map[k][0]
                    for t, c in self.sum_t_minus(rep):
                        terms.append((t, -c))
                m.add_constr(terms, "==", 0, "completion")               # (8)
            st = poset.subtasks[sid]
            vkeys = self.label_clause_keys(sid, 0)
            for k in vkeys:
                p = k[2]
                bp = self.mm.b_clause[k]
                for v in g.cls_map[k]:
                    m.add_constr(self.sum_t_minus(v) + [(te, -1.0)], "<=", 0, "span-lo")  # (9)
                    m.add_constr([(te, 1.0)] + [(t, -c) for t, c in self.sum_t_plus(v)]
                                 + [(bp, M)], "<=", 1 + M, "span-hi")
            if is_bottom(st.vlabel):
                m.add_constr([(te, 1.0)], "==", 0, "start-now")          # (10)

            for e2 in sorted(poset.immediate_before(sid)):
                m.add_constr([(self.mm.t_e[e2], 1.0), (te, -1.0)], "<=", -1,
                             "precedence")                               # (12)

        for sid in sorted(poset.elements):
            te = self.mm.t_e[sid]
            succ = sorted(poset.immediate_after(sid))
            par = sorted(poset.parallel(sid))
            s3 = sorted(set(succ) | set(par))
            if succ:
                m.add_constr([(self.mm.b_after[(sid, e2)], 1.0) for e2 in s3],
                             "==", 1, "successor")                       # (13)
            elif par:
                z = float(len(par))
                m.add_constr([(self.mm.b_after[(sid, e2)], 1.0) for e2 in par],
                             "<=", 1, "last-a")                          # (17)
                m.add_constr(
                    [(self.mm.b_gt[(sid, e2)], -1.0) for e2 in par]
                    + [(self.mm.b_after[(sid, e2)], -M) for e2 in par],
                    "<=", -z, "last-b")
                # sum b_after <= M (z - sum b_gt)
                m.add_constr(
                    [(self.mm.b_after[(sid, e2)], 1.0) for e2 in par]
                    + [(self.mm.b_gt[(sid, e2)], M) for e2 in par],
                    "<=", M * z, "last-c")
            for e2 in s3:
                ba = self.mm.b_after.get((sid, e2))
                if ba is None:
                    continue
                m.add_constr([(te, 1.0), (self.mm.t_e[e2], -1.0), (ba, M)],
                             "<=", M - 1, "follow-time")                 # (14)
                for k in self.label_clause_keys(e2, 0):
                    for v in self.g.cls_map[k]:
                        m.add_constr(self.sum_t_minus(v) + [(te, -1.0), (ba, M)],
                                     "<=", 1 + M, "activate")            # (15)

        for e in sorted(poset.elements):
            for e2 in sorted(poset.elements):
                if e2 <= e:
                    continue
                bg = self.mm.b_gt[(e, e2)]
                bg2 = self.mm.b_gt[(e2, e)]
                m.add_constr([(bg, 1.0), (bg2, 1.0)], "==", 1, "order")  # (16)
                te, te2 = self.mm.t_e[e], self.mm.t_e[e2]
                m.add_constr([(te, -1.0), (te2, 1.0), (bg, M)], "<=", M, "order-lo")
                m.add_constr([(te, 1.0), (te2, -1.0), (bg, -M)], "<=", -1, "order-hi")

        firsts = sorted(poset.first_candidates())
        for e in firsts:
            others = [e2 for e2 in firsts if e2 != e]
            for k in self.label_clause_keys(e, 0):
                bp = self.mm.b_clause[k]
                for v in self.g.cls_map[k]:
                    terms = self.sum_t_minus(v)
                    for e2 in others:
                        terms.append((self.mm.b_gt[(e, e2)], -M))
                    terms.append((bp, M))
                    m.add_constr(terms, "<=", M, "activation-zero")      # (21)
            bf = self.mm.b_first[e]
            terms = [(self.mm.b_gt[(e, e2)], 1.0) for e2 in others]
            m.add_constr(terms + [(bf, M)], "<=", M, "first-a")          # (22)
            m.add_constr([(bf, -1.0)] + [(self.mm.b_gt[(e, e2)], -M) for e2 in others],
                         "<=", -1, "first-b")
            for k in self.label_clause_keys(e, 0):
                non_init, from_init = [], []
                for v in self.g.cls_map[k]:
                    for (u, vv, r), var in self.mm.x.items():
                        if vv != v:
                            continue
                        (from_init if u.kind == "loc" else non_init).append(var)
                m.add_constr([(var, 1.0) for var in non_init] + [(bf, M)],
                             "<=", M, "first-src")                       # (23)
                m.add_constr([(var, 1.0) for var in from_init] + [(bf, -M)],
                             "<=", 0, "first-src")

        for e in sorted(poset.elements):
            if not poset.immediate_before(e):
                if poset.parallel(e):
                    par = sorted(poset.parallel(e))
                    m.add_constr([(self.mm.b_after[(e2, e)], 1.0) for e2 in par
                                  if (e2, e) in self.mm.b_after], "<=", 1, "pred-a")  # (20)
                    m.add_constr(
                        [(self.mm.b_gt[(e, e2)], 1.0) for e2 in par]
                        + [(self.mm.b_after[(e2, e)], -M) for e2 in par
                           if (e2, e) in self.mm.b_after],
                        "<=", 0, "pred-b")
                    m.add_constr(
                        [(self.mm.b_after[(e2, e)], 1.0) for e2 in par
                         if (e2, e) in self.mm.b_after]
                        + [(self.mm.b_gt[(e, e2)], -M) for e2 in par],
                        "<=", 0, "pred-c")
            else:
                s2 = sorted(poset.immediate_before(e) | poset.parallel(e))
                terms = [(self.mm.b_after[(e2, e)], 1.0) for e2 in s2
                         if (e2, e) in self.mm.b_after]
                if terms:
                    m.add_constr(terms, "==", 1, "pred-one")             # (19)

    def same_fleet_constraints(self, reuse: dict[int, list[Robot]] | None = None):
        """(24), or the suffix fleet-reuse form (31) when a prefix fleet exists."""
        g, m = self.g, self.mm.model
        M = self.M
        reuse = reuse or {}
        fleet_sizes: dict[int, int] = {}
        for v in g.vertices:
            if v.kind == "lit":
                fleet_sizes[g.rtype[v]] = max(
                    fleet_sizes.get(g.rtype[v], 0), len(g.robots[v]))
        for chi in sorted(g.chi_labels):
            entries = sorted(g.chi_labels[chi])
            lit_keys = []
            for (sid, kind) in entries:
                label_clauses = _clauses(self.poset.subtasks[sid].elabel
                                         if kind == 1 else self.poset.subtasks[sid].vlabel)
                for key in self.label_clause_keys(sid, kind):
                    p = key[2]
                    if p >= len(label_clauses):
                        continue  # handoff augmentation binds robots directly
                    clause = label_clauses[p]
                    for q, atom in enumerate(_pos_lits(clause)):
                        if atom.chi == chi:
                            lit_keys.append(((sid, kind, p, q), atom, key))
            if chi in reuse and reuse[chi]:
                robots = sorted(reuse[chi])
                for (lk, atom, ck) in lit_keys:
                    bp = self.mm.b_clause[ck]
                    verts = g.lits_map[lk]
                    for b, v in enumerate(verts):
                        terms = [(var, 1.0) for var in self.in_x(v, robots[b])]
                        terms.append((bp, -1.0))
                        m.add_constr(terms, "==", 0, "fleet-reuse")      # (31)
                continue
            for i1 in range(len(lit_keys)):
                for i2 in range(i1 + 1, len(lit_keys)):
                    (lk1, atom1, ck1) = lit_keys[i1]
                    (lk2, atom2, ck2) = lit_keys[i2]
                    if lk1[:2] == lk2[:2] and lk1[2] != lk2[2]:
                        continue  # alternative clauses of one label never co-hold
                    v1s, v2s = g.lits_map[lk1], g.lits_map[lk2]
                    b1, b2 = self.mm.b_clause[ck1], self.mm.b_clause[ck2]
                    for b in range(min(len(v1s), len(v2s))):
                        for rr in range(1, fleet_sizes.get(atom1.rtype, 0) + 1):
                            r = (rr, atom1.rtype)
                            in1 = [(var, 1.0) for var in self.in_x(v1s[b], r)]
                            in2 = [(var, -1.0) for var in self.in_x(v2s[b], r)]
                            m.add_constr(in1 + in2 + [(b1, M), (b2, M)],
                                         "<=", 2 * M, "same-fleet")      # (24)
                            m.add_constr([(var, -c) for var, c in in1]
                                         + [(var, -c) for var, c in in2]
                                         + [(b1, M), (b2, M)],
                                         "<=", 2 * M, "same-fleet")
        return

    def suffix_constraints(self):
        """(28)-(30): exactly one last subtask whose return clause is enforced."""
        g, m, poset = self.g, self.mm.model, self.poset
        M = self.M
        lasts = sorted(g.aug_clause)
        if not lasts:
            return
        for e in lasts:
            self.mm.b_last[e] = m.add_binary(f"blast[{e}]")
        m.add_constr([(self.mm.b_last[e], 1.0) for e in lasts], "==", 1, "one-last")  # (28)
        for e in lasts:
            others = [e2 for e2 in lasts if e2 != e]
            z = float(len(others))
            bl = self.mm.b_last[e]
            # 1 + M (sum b_gt - z) <= b_last <= 1 + M (z - sum b_gt)             (29)
            m.add_constr([(bl, -1.0)] + [(self.mm.b_gt[(e, e2)], M) for e2 in others],
                         "<=", M * z - 1, "last-gate")
            m.add_constr([(bl, 1.0)] + [(self.mm.b_gt[(e, e2)], M) for e2 in others],
                         "<=", M * z + 1, "last-gate")
            p_e, clause = g.aug_clause[e]
            for q, atom in enumerate(_pos_lits(clause) or [None]):
                key = (e, 1, p_e, q if atom is not None else 0)
                if key not in g.lits_map:
                    continue
                verts = g.lits_map[key]
                terms = []
                for v in verts:
                    rv = g.robots[v][0]
                    for var in self.in_x(v, rv):
                        terms.append((var, 1.0))
                terms.append((bl, -float(len(verts))))
                m.add_constr(terms, "==", 0, "return")                   # (30)

    def handoff_pins(self, last_subtask: int | None, last_clause: int | None):
        """(25)-(26): pin the last completed subtask and its satisfied clause."""
        if last_subtask is None:
            return
        m = self.mm.model
        for e2 in sorted(self.poset.elements):
            if e2 != last_subtask:
                m.add_constr([(self.mm.b_gt[(last_subtask, e2)], 1.0)], "==", 1,
                             "pin-last")                                 # (25)
        if last_clause is not None:
            key = (last_subtask, 1, last_clause)
            m.add_constr([(self.mm.b_clause[key], 1.0)], "==", 1, "pin-clause")  # (26)

    def bound_cuts(self):
        """Valid lower bounds: any satisfied clause visits all its vertices,
        so each label costs at least its cheapest clause, and an edge label
        completes no earlier than that clause's latest earliest-arrival."""
        g, m = self.g, self.mm.model
        in_min: dict[RVertex, tuple[int, int]] = {}
        x_into: dict[RVertex, list[tuple[int, float]]] = {}
        for (u, v, r), var in self.mm.x.items():
            x_into.setdefault(v, []).append((var, float(g.edges[(u, v)][1])))
            t, d = g.edges[(u, v)]
            cur = in_min.get(v)
            in_min[v] = (min(cur[0], t), min(cur[1], d)) if cur else (t, d)
        for sid in sorted(self.poset.elements):
            for kind in (1, 0):
                keys = self.label_clause_keys(sid, kind)
                if not keys:
                    continue
                best_cost = best_time = None
                for k in keys:
                    verts = g.cls_map[k]
                    if any(v not in in_min for v in verts):
                        continue
                    ccost = sum(in_min[v][1] for v in verts)
                    ctime = max((in_min[v][0] for v in verts), default=0)
                    if best_cost is None or ccost < best_cost:
                        best_cost = ccost
                    if best_time is None or ctime < best_time:
                        best_time = ctime
                if best_cost is None:
                    continue
                if best_cost > 0:
                    terms = []
                    for k in keys:
                        for v in g.cls_map[k]:
                            terms.extend(x_into.get(v, []))
                    m.add_constr(terms, ">=", best_cost, "cost-lb")
                if (kind == 1 and best_time
                        and not is_bottom(self.poset.subtasks[sid].vlabel)):
                    te = self.mm.t_e[sid]
                    if m.lb[te] < best_time:
                        m.lb[te] = best_time

    def objective(self):
        g = self.g
        alpha = self.cfg.alpha
        terms = []
        for (u, v, r), var in self.mm.x.items():
            d = g.edges[(u, v)][1]
            if d:
                terms.append((var, alpha * d))
        for sid, te in self.mm.t_e.items():
            terms.append((te, 1.0 - alpha))
        self.mm.model.set_objective(terms)                               # (27)


def _attach_greedy_hints(mm: MilpModel, w=None) -> None:
    """Seed the solver with a greedily constructed allocation.

    Walks one linear extension of the poset, assigning each clause's
    literals to the nearest available robots (honoring connector fleets and
    the wiring that actually exists), and converts the resulting chains into
    value hints on the routing and ordering binaries.  Best effort: on any
    dead end the model is left unhinted.
    """
    g, poset, model = mm.g, mm.poset, mm.model
    if not poset.elements:
        return
    ext = sorted(poset.elements,
                 key=lambda e: (len(poset.before(e)), e))
    # fix a valid linear extension by repeatedly taking available elements
    order: list[int] = []
    remaining = set(poset.elements)
    while remaining:
        ready = sorted(e for e in remaining
                       if not (poset.before(e) & remaining))
        if not ready:
            return
        order.append(ready[0])
        remaining.discard(ready[0])

    pos_of: dict[Robot, RVertex] = dict(g.loc_of)
    avail: dict[Robot, int] = {r: 0 for r in g.loc_of}
    chi_fleet: dict[int, list[Robot]] = {}
    chain_edges: list[tuple[RVertex, RVertex, Robot]] = []
    chosen_clause: dict[tuple[int, int], int] = {}
    t_hint: dict[int, int] = {}
    prev_t = -1

    def edge_w(u, v):
        return g.edges.get((u, v))

    for sid in order:
        st = poset.subtasks[sid]
        keys = sorted(k for k in g.cls_map if k[0] == sid and k[1] == 1)
        if not keys:
            t_hint[sid] = prev_t + 1 if not is_bottom(st.vlabel) else 0
            prev_t = max(prev_t, t_hint[sid])
            continue
        placed = None
        for key in keys:
            verts = g.cls_map[key]
            by_lit: dict[tuple, list[RVertex]] = {}
            for v in verts:
                by_lit.setdefault((v.clause, v.literal), []).append(v)
            trial_edges = []
            trial_pos = dict(pos_of)
            trial_avail = dict(avail)
            trial_chi = {c: list(f) for c, f in chi_fleet.items()}
            arrival = 0
            cost = 0
            ok = True
            used: set[Robot] = set()
            for lit_key in sorted(by_lit):
                vs = sorted(by_lit[lit_key], key=lambda v: v.copy)
                atom = g.atom_of.get(vs[0])
                if atom is not None and atom.chi and atom.chi in trial_chi:
                    cands = [r for r in trial_chi[atom.chi] if r not in used]
                else:
                    cands = [r for r in g.robots[vs[0]] if r not in used]
                chosen: list[Robot] = []
                for b, v in enumerate(vs):
                    best = None
                    for r in cands:
                        if r in chosen or r not in g.robots[v]:
                            continue
                        ew = edge_w(trial_pos[r], v)
                        if ew is None:
                            continue
                        score = (trial_avail[r] + ew[0], ew[1], r)
                        if best is None or score < best[0]:
                            best = (score, r, ew)
                    if best is None:
                        ok = False
                        break
                    _, r, (tt, dd) = best
                    chosen.append(r)
                    trial_edges.append((trial_pos[r], v, r))
                    arrival = max(arrival, trial_avail[r] + tt)
                    cost += dd
                if not ok:
                    break
                for r, v in zip(chosen, vs):
                    used.add(r)
                    trial_pos[r] = v
                if atom is not None and atom.chi and atom.chi not in trial_chi:
                    trial_chi[atom.chi] = sorted(chosen)
            if ok:
                cand = (key, trial_edges, trial_pos, trial_avail, trial_chi,
                        arrival, cost)
                if placed is None or (cand[6], cand[5]) < (placed[6], placed[5]):
                    placed = cand
        if placed is None:
            return
        key, edges2, pos2, avail2, chi2, arrival, _cost = placed
        t_e = max(arrival, prev_t + 1)
        if is_bottom(st.vlabel):
            t_e = 0
        chosen_clause[(sid, 1)] = key[2]
        chain_edges.extend(edges2)
        pos_of, chi_fleet = pos2, chi2
        avail = avail2
        for (_, v, r) in edges2:
            avail[r] = t_e
        t_hint[sid] = t_e
        prev_t = max(prev_t, t_e)

    # convert to hints
    chain = {(u, v, r) for (u, v, r) in chain_edges}
    for key, var in mm.x.items():
        model.hint[var] = 1 if key in chain else 0
    for key, var in mm.b_clause.items():
        sid, kind, p = key
        if kind == 1:
            model.hint[var] = 1 if chosen_clause.get((sid, 1)) == p else 0
    for (e, e2), var in mm.b_gt.items():
        if model.lb[var] == model.ub[var]:
            continue
        model.hint[var] = 1 if t_hint[e] > t_hint[e2] else 0
    global_order = sorted(poset.elements, key=lambda e: t_hint[e])
    succ_of = {a: b for a, b in zip(global_order, global_order[1:])}
    for (e, e2), var in mm.b_after.items():
        model.hint[var] = 1 if succ_of.get(e) == e2 else 0
    first = global_order[0]
    for e, var in mm.b_first.items():
        model.hint[var] = 1 if e == first else 0
    for e, var in mm.b_last.items():
        model.hint[var] = 1 if e == global_order[-1] else 0


def build_prefix_milp(g: RoutingGraph, poset: Poset, cfg: SolverConfig,
                      last_subtask: int | None = None,
                      last_clause: int | None = None) -> MilpModel:
    b = _MilpBuilder(g, poset, cfg)
    b.make_vars()
    b.routing_constraints()
    b.scheduling_constraints()
    b.logical_constraints()
    b.temporal_constraints()
    b.same_fleet_constraints()
    b.handoff_pins(last_subtask, last_clause)
    b.bound_cuts()
    b.objective()
    _attach_greedy_hints(b.mm)
    return b.mm


def build_suffix_milp(g: RoutingGraph, poset: Poset, cfg: SolverConfig,
                      fleet_reuse: dict[int, list[Robot]] | None = None) -> MilpModel:
    b = _MilpBuilder(g, poset, cfg)
    b.make_vars()
    b.routing_constraints()
    b.scheduling_constraints()
    b.logical_constraints()
    b.temporal_constraints()
    b.same_fleet_constraints(fleet_reuse)
    b.suffix_constraints()
    b.bound_cuts()
    b.objective()
    _attach_greedy_hints(b.mm)
    b.mm.suffix = True
    return b.mm


# ---------------------------------------------------------------------------
# Extensions


@dataclass
class ExtensionSpec:
    # require (or forbid) specific robots on a literal (subtask, kind, clause, literal)
    participation: list[tuple[tuple[int, int, int, int], list[Robot], int]] = field(
        default_factory=list)
    fleet_size_weight: float = 0.0        # positive: fewer robots; negative: more
    disjoint_literals: list[tuple[tuple[int, int, int, int],
                                  tuple[int, int, int, int]]] = field(default_factory=list)


def apply_extensions(mm: MilpModel, ext: ExtensionSpec) -> MilpModel:
    g, m = mm.g, mm.model
    builder_in_x = lambda v, r: [var for (u, vv, rr), var in mm.x.items()
                                 if vv == v and rr == r]
    for key, robots, flag in ext.participation:
        if key not in g.lits_map:
            raise KeyError(f"unknown literal {key}")
        for r in robots:
            terms = []
            for v in g.lits_map[key]:
                for var in builder_in_x(v, r):
                    terms.append((var, 1.0))
            m.add_constr(terms, "==", flag, "participation")             # (32)
    if ext.fleet_size_weight:
        for robot, v in g.loc_of.items():
            for (u, vv, r), var in mm.x.items():
                if u == v and r == robot:
                    m.add_objective_term(var, ext.fleet_size_weight)     # (33)
    for key1, key2 in ext.disjoint_literals:
        types = {g.rtype[v] for v in g.lits_map[key1]} | {g.rtype[v] for v in g.lits_map[key2]}
        for j in types:
            seen_robots = set()
            for v in g.lits_map[key1] + g.lits_map[key2]:
                seen_robots.update(g.robots[v])
            for r in sorted(seen_robots):
                terms = []
                for v in g.lits_map[key1] + g.lits_map[key2]:
                    for var in builder_in_x(v, r):
                        terms.append((var, 1.0))
                m.add_constr(terms, "<=", 1, "disjoint")                 # (34)
    return mm


# ---------------------------------------------------------------------------
# Plan extraction


def extract_plan(sol: Solution, mm: MilpModel) -> HighLevelPlan:
    """Per-robot waypoint/timeline sequences plus the global time axis."""
    g, poset = mm.g, mm.poset
    val = sol.value

    plan = HighLevelPlan()
    axis = sorted((val(te), sid) for sid, te in mm.t_e.items())
    plan.time_axis = [t for t, _ in axis]
    plan.order = [sid for _, sid in axis]
    plan.objective = sol.objective if sol.objective is not None else 0.0

    # records: satisfied clause and essential robots per label
    for sid in sorted(poset.elements):
        st = poset.subtasks[sid]
        completion = val(mm.t_e[sid])
        rec = SubtaskRecord(sid, completion, None, {}, None, {})
        for kind in (1, 0):
            keys = [k for k in mm.b_clause if k[0] == sid and k[1] == kind]
            chosen = None
            for k in sorted(keys):
                if val(mm.b_clause[k]) == 1:
                    chosen = k[2]
                    break
            if chosen is None:
                continue
            label = st.elabel if kind == 1 else st.vlabel
            clauses = _clauses(label)
            aug = g.aug_clause.get(sid)
            if kind == 1 and aug is not None and chosen == aug[0]:
                clause = aug[1]
                rec.used_return_clause = True
                if sid in g.ret_vertices:  # one-step closing: exact home cells
                    rec.exact_targets = {
                        g.robots[v][0]: g.region[v] for v in g.ret_vertices[sid]
                    }
            else:
                clause = clauses[chosen]
            robots_by_atom: dict[Atom, tuple[Robot, ...]] = {}
            for q, atom in enumerate(_pos_lits(clause)):
                key = (sid, kind, chosen, q)
                if key not in g.lits_map:
                    continue
                who = []
                for v in g.lits_map[key]:
                    for (u, vv, r), var in mm.x.items():
                        if vv == v and val(var) == 1:
                            who.append(r)
                robots_by_atom[atom] = tuple(sorted(who))
            if kind == 1:
                rec.edge_clause, rec.edge_robots = clause, robots_by_atom
            else:
                rec.vertex_clause, rec.vertex_robots = clause, robots_by_atom
        plan.records[sid] = rec

    # per-robot waypoint walk
    succ: dict[tuple[RVertex, Robot], RVertex] = {}
    for (u, v, r), var in mm.x.items():
        if val(var) == 1:
            succ[(u, r)] = v
    for robot in sorted(g.starts):
        v = g.loc_of[robot]
        waypoints, times = [], []
        while (v, robot) in succ:
            v = succ[(v, robot)]
            if v.label_kind == 1:
                waypoints.append(g.region[v])
                times.append(val(mm.t_e[v.sid]))
        plan.waypoints[robot] = waypoints
        plan.timelines[robot] = times
    return plan


def solve_milp(mm: MilpModel, cfg: SolverConfig) -> Solution:
    return solve(mm.model, cfg)
