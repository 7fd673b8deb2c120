"""Routing graphs: the vertex/edge structure the task-allocation MILP flows
robots through.

Vertices are robot start locations plus one vertex per required robot of
every positive literal in every subtask label; edges encode which prior
visit a robot may depart from, respecting the subtask partial order.  Edge
weights carry the shortest travel time and the lowest travel cost between
the underlying places.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .buchi import Clause, Label, clauses as _clauses, is_bottom, is_top, pos_literals as _pos_lits, relax_clause
from .decompose import Poset, Subtask
from .ltl import Atom
from .workspace import Cell, Metric, Workspace

Robot = tuple[int, int]


@dataclass(frozen=True)
class RVertex:
    kind: str                    # "loc" | "lit" | "ret"
    robot: Robot | None = None   # loc owner, or the bound robot of ret vertices
    sid: int = 0
    label_kind: int = -1         # 0 vertex label, 1 edge label
    clause: int = -1
    literal: int = -1
    copy: int = 0                # which of the literal's i vertices

    def __str__(self):
        if self.kind == "loc":
            return f"loc{self.robot}"
        if self.kind == "ret":
            return f"ret{self.robot}@{self.sid}"
        return f"lit(e{self.sid},{self.label_kind},c{self.clause},q{self.literal},b{self.copy})"


@dataclass
class RoutingGraph:
    poset: Poset
    starts: dict[Robot, Cell]
    vertices: list[RVertex] = field(default_factory=list)
    edges: dict[tuple[RVertex, RVertex], tuple[int, int]] = field(default_factory=dict)
    region: dict[RVertex, object] = field(default_factory=dict)   # region id or cell
    rtype: dict[RVertex, int] = field(default_factory=dict)
    robots: dict[RVertex, tuple[Robot, ...]] = field(default_factory=dict)
    atom_of: dict[RVertex, Atom] = field(default_factory=dict)
    lits_map: dict[tuple[int, int, int, int], list[RVertex]] = field(default_factory=dict)
    cls_map: dict[tuple[int, int, int], list[RVertex]] = field(default_factory=dict)
    chi_labels: dict[int, set[tuple[int, int]]] = field(default_factory=dict)
    loc_of: dict[Robot, RVertex] = field(default_factory=dict)
    aug_clause: dict[int, tuple[int, Clause]] = field(default_factory=dict)
    ret_vertices: dict[int, list[RVertex]] = field(default_factory=dict)

    def literal_vertices(self) -> list[RVertex]:
        return [v for v in self.vertices if v.kind != "loc"]

    def in_edges(self, v: RVertex):
        return [(u, x) for (u, x) in self.edges if x == v]

    def out_edges(self, v: RVertex):
        return [(u, x) for (u, x) in self.edges if u == v]

    def add_edge(self, u: RVertex, v: RVertex, metric: Metric):
        src = self.region[u]
        dst = self.region[v]
        t = metric.t_star(src, dst)
        d = metric.d(src, dst)
        if t is None or d is None:
            return  # unreachable places produce no edge
        cur = self.edges.get((u, v))
        if cur is None or (t, d) < cur:
            self.edges[(u, v)] = (t, d)

    def dump(self) -> dict:
        return {
            "vertices": [str(v) for v in self.vertices],
            "edges": {f"{u}->{v}": list(w) for (u, v), w in sorted(
                self.edges.items(), key=lambda kv: (str(kv[0][0]), str(kv[0][1])))},
        }


class _Builder:
    def __init__(self, poset: Poset, w: Workspace, metric: Metric,
                 starts: dict[Robot, Cell] | None, seed: int):
        self.poset = poset
        self.w = w
        self.metric = metric
        self.starts = dict(starts) if starts is not None else dict(w.robots)
        self.rng = random.Random(seed)
        self.g = RoutingGraph(poset, dict(self.starts))
        self.fleet = w.fleet()

    # -- vertices -------------------------------------------------------------

    def add_location_vertices(self):
        g = self.g
        for robot in sorted(self.starts):
            v = RVertex("loc", robot=robot)
            g.vertices.append(v)
            g.region[v] = self.starts[robot]
            g.rtype[v] = robot[1]
            g.robots[v] = (robot,)
            g.loc_of[robot] = v

    def add_label_vertices(self, sid: int, kind: int, label: Label):
        g = self.g
        for p, clause in enumerate(_clauses(label)):
            key_cls = (sid, kind, p)
            g.cls_map.setdefault(key_cls, [])
            for q, atom in enumerate(_pos_lits(clause)):
                key = (sid, kind, p, q)
                vs = []
                for b in range(atom.count):
                    v = RVertex("lit", sid=sid, label_kind=kind, clause=p,
                                literal=q, copy=b)
                    g.vertices.append(v)
                    g.region[v] = atom.region
                    g.rtype[v] = atom.rtype
                    g.robots[v] = tuple(
                        (r, atom.rtype) for r in range(1, self.fleet.size(atom.rtype) + 1)
                    )
                    g.atom_of[v] = atom
                    vs.append(v)
                g.lits_map[key] = vs
                g.cls_map[key_cls].extend(vs)
                if atom.chi:
                    g.chi_labels.setdefault(atom.chi, set()).add((sid, kind))

    def add_subtask_vertices(self, sid: int):
        st = self.poset.subtasks[sid]
        self.add_label_vertices(sid, 1, st.elabel)
        if not is_top(st.vlabel) and not is_bottom(st.vlabel):
            self.add_label_vertices(sid, 0, st.vlabel)

    # -- edges ----------------------------------------------------------------

    def _one_to_one(self, sources: list[RVertex], targets: list[RVertex],
                    chi_match: bool):
        if chi_match:
            pairing = list(range(len(sources)))   # aligned copies share robots
        else:
            pairing = list(range(len(sources)))
            self.rng.shuffle(pairing)
        for b, v in enumerate(targets):
            self.g.add_edge(sources[pairing[b]], v, self.metric)

    def _wire_from_label(self, src_sid: int, src_kind: int, src_label: Label,
                         atom: Atom, targets: list[RVertex]):
        """Edges from every literal of src_label with matching robot type."""
        for p2, clause in enumerate(_clauses(src_label)):
            for q2, src_atom in enumerate(_pos_lits(clause)):
                if src_atom.rtype != atom.rtype:
                    continue
                sources = self.g.lits_map[(src_sid, src_kind, p2, q2)]
                chi_match = atom.chi != 0 and src_atom.chi == atom.chi
                if len(sources) == len(targets) and (chi_match or src_atom.count == atom.count):
                    self._one_to_one(sources, targets, chi_match)
                else:
                    for u in sources:
                        for v in targets:
                            self.g.add_edge(u, v, self.metric)

    def _wire_locations(self, atom: Atom, targets: list[RVertex]):
        for robot in sorted(self.starts):
            if robot[1] != atom.rtype:
                continue
            for v in targets:
                self.g.add_edge(self.g.loc_of[robot], v, self.metric)

    def wire_edge_label_targets(self, sid: int):
        """Leaving vertices for the i copies of every edge-label literal."""
        poset = self.poset
        st = poset.subtasks[sid]
        prior = sorted(poset.before(sid) | poset.parallel(sid))
        for p, clause in enumerate(_clauses(st.elabel)):
            for q, atom in enumerate(_pos_lits(clause)):
                targets = self.g.lits_map[(sid, 1, p, q)]
                self._wire_locations(atom, targets)
                for e2 in prior:
                    st2 = poset.subtasks[e2]
                    self._wire_from_label(e2, 1, st2.elabel, atom, targets)
                    self._wire_from_label(e2, 0, st2.vlabel, atom, targets)
                self._wire_from_label(sid, 0, st.vlabel, atom, targets)

    def _full_counterparts(self, relaxed: Clause, full_label: Label) -> list[Clause]:
        return [cf for cf in full_label if relax_clause(cf) == relaxed]

    def wire_vertex_label_targets(self, sid: int):
        """Leaving vertices for vertex-label literals: immediately prior
        subtasks whose full edge clause contains the vertex clause, plus
        robot start locations when this subtask can be the first."""
        poset = self.poset
        st = poset.subtasks[sid]
        if is_top(st.vlabel) or is_bottom(st.vlabel):
            return
        imm = sorted(poset.immediate_before(sid))
        par = sorted(poset.parallel(sid))
        s2 = sorted(set(imm) | set(par))
        for p, clause in enumerate(_clauses(st.vlabel)):
            fulls = self._full_counterparts(clause, st.vlabel_full)
            for q, atom in enumerate(_pos_lits(clause)):
                targets = self.g.lits_map[(sid, 0, p, q)]
                if not s2:
                    self._wire_locations(atom, targets)
                    continue
                for e2 in s2:
                    st2 = poset.subtasks[e2]
                    for p2, clause2 in enumerate(_clauses(st2.elabel)):
                        fulls2 = self._full_counterparts(clause2, st2.elabel_full)
                        if not any(cf.is_subformula_of(cf2)
                                   for cf in fulls for cf2 in fulls2):
                            continue
                        lits2 = _pos_lits(clause2)
                        if atom not in lits2:
                            continue
                        q2 = lits2.index(atom)
                        sources = self.g.lits_map[(e2, 1, p2, q2)]
                        self._one_to_one(sources, targets, True)
                if not imm and par:
                    self._wire_locations(atom, targets)

    # -- suffix return vertices -------------------------------------------------

    def add_return_clause(self, sid: int, prior_clause: Clause,
                          prior_assignment: dict[Atom, tuple[Robot, ...]]):
        """Augment a last-candidate subtask's edge label with the handoff
        clause: one vertex per required robot, each bound to the specific
        robot that satisfied the literal in the prefix."""
        g = self.g
        st = self.poset.subtasks[sid]
        p_e = len(_clauses(st.elabel))
        g.aug_clause[sid] = (p_e, prior_clause)
        g.cls_map.setdefault((sid, 1, p_e), [])
        for q, atom in enumerate(_pos_lits(prior_clause)):
            robots = sorted(prior_assignment[atom])
            vs = []
            for b in range(atom.count):
                v = RVertex("ret", robot=robots[b], sid=sid, label_kind=1,
                            clause=p_e, literal=q, copy=b)
                g.vertices.append(v)
                g.region[v] = atom.region
                g.rtype[v] = atom.rtype
                g.robots[v] = (robots[b],)
                g.atom_of[v] = atom
                vs.append(v)
            g.lits_map[(sid, 1, p_e, q)] = vs
            g.cls_map[(sid, 1, p_e)].extend(vs)
            self._wire_return_targets(sid, atom, vs)

    def add_home_clause(self, sid: int):
        """pi_init variant: every robot gets a return vertex at its own
        suffix-initial cell."""
        g = self.g
        st = self.poset.subtasks[sid]
        p_e = len(_clauses(st.elabel))
        g.aug_clause[sid] = (p_e, Clause())
        g.cls_map.setdefault((sid, 1, p_e), [])
        vs = []
        for b, robot in enumerate(sorted(self.starts)):
            v = RVertex("ret", robot=robot, sid=sid, label_kind=1,
                        clause=p_e, literal=0, copy=b)
            g.vertices.append(v)
            g.region[v] = self.starts[robot]
            g.rtype[v] = robot[1]
            g.robots[v] = (robot,)
            vs.append(v)
            self._wire_return_targets(sid, Atom(1, robot[1], 0), [v])
        g.lits_map[(sid, 1, p_e, 0)] = vs
        g.cls_map[(sid, 1, p_e)].extend(vs)
        g.ret_vertices[sid] = vs

    def _wire_return_targets(self, sid: int, atom: Atom, targets: list[RVertex]):
        """Complete wiring (no one-to-one shortcuts): return vertices admit a
        single specific robot, so every type-matching leaving vertex connects."""
        poset = self.poset
        st = poset.subtasks[sid]
        for robot in sorted(self.starts):
            if robot[1] == atom.rtype:
                for v in targets:
                    self.g.add_edge(self.g.loc_of[robot], v, self.metric)
        for e2 in sorted(poset.before(sid) | poset.parallel(sid)):
            st2 = poset.subtasks[e2]
            for kind, label in ((1, st2.elabel), (0, st2.vlabel)):
                for p2, clause in enumerate(_clauses(label)):
                    for q2, src_atom in enumerate(_pos_lits(clause)):
                        if src_atom.rtype != atom.rtype:
                            continue
                        for u in self.g.lits_map[(e2, kind, p2, q2)]:
                            for v in targets:
                                self.g.add_edge(u, v, self.metric)
        for p2, clause in enumerate(_clauses(st.vlabel)):
            for q2, src_atom in enumerate(_pos_lits(clause)):
                if src_atom.rtype != atom.rtype:
                    continue
                for u in self.g.lits_map[(sid, 0, p2, q2)]:
                    for v in targets:
                        self.g.add_edge(u, v, self.metric)


def build_prefix_graph(poset: Poset, sub, w: Workspace, metric: Metric,
                       starts: dict[Robot, Cell] | None = None,
                       seed: int = 0) -> RoutingGraph:
    """Routing graph for a prefix poset (Alg. construction, prefix form)."""
    b = _Builder(poset, w, metric, starts, seed)
    b.add_location_vertices()
    for sid in sorted(poset.elements):
        b.add_subtask_vertices(sid)
    for sid in sorted(poset.elements):
        b.wire_edge_label_targets(sid)
        b.wire_vertex_label_targets(sid)
    return b.g


def build_suffix_graph(poset: Poset, sub, w: Workspace, metric: Metric,
                       prior_clause: Clause,
                       prior_assignment: dict[Atom, tuple[Robot, ...]],
                       starts: dict[Robot, Cell] | None = None,
                       seed: int = 0) -> RoutingGraph:
    """Prefix-style graph plus bound return vertices for the handoff clause
    on every subtask that can be completed last."""
    b = _Builder(poset, w, metric, starts, seed)
    b.add_location_vertices()
    for sid in sorted(poset.elements):
        b.add_subtask_vertices(sid)
    for sid in sorted(poset.elements):
        b.wire_edge_label_targets(sid)
        b.wire_vertex_label_targets(sid)
    if prior_clause.pos:
        for sid in sorted(poset.last_candidates()):
            b.add_return_clause(sid, prior_clause, prior_assignment)
    return b.g


def build_pi_init_graph(poset: Poset, sub, w: Workspace, metric: Metric,
                        prior_clause: Clause,
                        starts: dict[Robot, Cell] | None = None,
                        seed: int = 0) -> RoutingGraph:
    """One-step loop closing: every robot must end at its own start cell."""
    b = _Builder(poset, w, metric, starts, seed)
    b.add_location_vertices()
    for sid in sorted(poset.elements):
        b.add_subtask_vertices(sid)
    for sid in sorted(poset.elements):
        b.wire_edge_label_targets(sid)
        b.wire_vertex_label_targets(sid)
    for sid in sorted(poset.last_candidates()):
        b.add_home_clause(sid)
    return b.g
