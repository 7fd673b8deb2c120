"""Nondeterministic Buchi automata with DNF labels over counted atoms.

The automaton is kept in graph form: self-loops live in ``vertex_label`` and
proper edges in ``edge_label``.  Labels are disjunctions of clauses; each
clause conjoins positive literals (counted atoms, possibly connector-bound)
and negative literals (always connector-free, since a negated induced atom is
equivalent to its basic counterpart).

Besides the representation this module provides:

* ``translate``      -- LTL -> NBA via tableau expansion and degeneralization,
* ``preprocess``     -- the clause rewrite rules that drop infeasible clauses
                        and merge redundant literals,
* ``implies`` / ``strongly_implies`` -- clause-subformula implication checks,
* ``import_nba`` / ``export_nba``    -- the NBA-JSON interchange format.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

from .ltl import Atom, FleetSpec, Formula, FormulaError, not_, to_nnf

log = logging.getLogger(__name__)

MAX_CLAUSES = 512           # cap on DNF distribution blowup per label
MAX_VERTICES = 10_000       # guard on translated automaton size


class TranslationError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Clauses and labels


@dataclass(frozen=True)
class Clause:
    """One DNF clause: a conjunction of positive and negative literals."""

    pos: frozenset[Atom] = frozenset()
    neg: frozenset[Atom] = frozenset()   # stored as basic atoms (chi = 0)

    def key(self):
        return (
            tuple(sorted((a.rtype, a.region, a.count, a.chi) for a in self.pos)),
            tuple(sorted((a.rtype, a.region, a.count) for a in self.neg)),
        )

    def is_subformula_of(self, other: "Clause") -> bool:
        """All literals of self appear in other (TOP is a subformula of anything)."""
        return self.pos <= other.pos and self.neg <= other.neg

    def satisfied(self, counts: dict[tuple[int, int], int]) -> bool:
        """Truth under instantaneous robot counts ((type, region) -> robots)."""
        for a in self.pos:
            if counts.get((a.rtype, a.region), 0) < a.count:
                return False
        for a in self.neg:
            if counts.get((a.rtype, a.region), 0) >= a.count:
                return False
        return True

    def __str__(self):
        lits = [str(a) for a in sorted(self.pos)] + [f"!{a}" for a in sorted(self.neg)]
        return " & ".join(lits) if lits else "TOP"


TOP_CLAUSE = Clause()

Label = tuple[Clause, ...]

TOP: Label = (TOP_CLAUSE,)
BOTTOM: Label = ()


def canonical(label: Label) -> Label:
    """Deduplicate clauses and fix a deterministic order.

    A label containing an unconditionally true clause is the constant TOP
    (this is how a clause whose literals were all negative collapses a label
    during relaxation).
    """
    for c in label:
        if not c.pos and not c.neg:
            return TOP
    uniq = {c.key(): c for c in label}
    return tuple(uniq[k] for k in sorted(uniq))


def is_top(label: Label) -> bool:
    return len(label) == 1 and not label[0].pos and not label[0].neg


def is_bottom(label: Label) -> bool:
    return len(label) == 0


def label_satisfied(label: Label, counts: dict[tuple[int, int], int]) -> bool:
    return any(c.satisfied(counts) for c in label)


def conj_clauses(a: Clause, b: Clause) -> Clause:
    return Clause(a.pos | b.pos, a.neg | b.neg)


def label_and(g1: Label, g2: Label) -> Label:
    """Conjunction of two DNF labels by distribution (clause-count capped)."""
    if is_bottom(g1) or is_bottom(g2):
        return BOTTOM
    out = []
    for c1 in g1:
        for c2 in g2:
            merged = rewrite_clause(conj_clauses(c1, c2))
            if merged is not None:
                out.append(merged)
            if len(out) > MAX_CLAUSES:
                raise TranslationError(f"DNF blowup beyond {MAX_CLAUSES} clauses")
    return canonical(tuple(out))


def label_or(g1: Label, g2: Label) -> Label:
    return canonical(g1 + g2)


def implies(g1: Label, g2: Label) -> bool:
    """Every clause of g1 contains some clause of g2 as a literal subset."""
    return all(any(c2.is_subformula_of(c1) for c2 in g2) for c1 in g1)


def strongly_implies(g1: Label, g2: Label) -> bool:
    """implies(g1, g2) plus a witness clause in g1 for every clause of g2."""
    return implies(g1, g2) and all(
        any(c2.is_subformula_of(c1) for c1 in g1) for c2 in g2
    )


def clauses(label: Label) -> list[Clause]:
    """Clause list of a label; TOP and BOTTOM have none to enumerate."""
    if is_top(label) or is_bottom(label):
        return []
    return list(label)


def pos_literals(c: Clause) -> list[Atom]:
    """Positive literals in canonical (type, region, count, connector) order."""
    return sorted(c.pos, key=lambda a: (a.rtype, a.region, a.count, a.chi))


def relax_clause(c: Clause) -> Clause:
    """Drop the negative literals (each replaced by constant true)."""
    return Clause(c.pos, frozenset())


def relax_label(g: Label) -> Label:
    return canonical(tuple(relax_clause(c) for c in g))


# ---------------------------------------------------------------------------
# Clause rewrite rules


def rewrite_clause(
    c: Clause,
    fleet: FleetSpec | None = None,
    region_sizes: dict[int, int] | None = None,
) -> Clause | None:
    """Apply the label rewrite rules to one clause; None means the clause is false.

    (1) a basic positive literal is absorbed by (or reduced against) another
        positive literal on the same type and region,
    (2) a weaker negative literal absorbs a stronger one,
    (3) two connector-bound positives on different regions with the same
        nonzero connector are unsatisfiable,
    (4) a positive and a negative literal on the same type and region with
        overlapping counts are mutually exclusive,
    (5) a type's total positive requirement may not exceed the team size,
    (6) a region's total positive requirement may not exceed its cell count
        (only checked when region sizes are supplied).
    """
    pos = set(c.pos)
    neg = set(c.neg)

    changed = True
    while changed:
        changed = False
        # rule (1): absorption among positives, basic literal vs any other
        for a in sorted(pos):
            if a.chi != 0:
                continue
            others = [b for b in pos if b is not a and b != a
                      and b.rtype == a.rtype and b.region == a.region]
            if not others:
                continue
            best = max(o.count for o in others)
            if a.count <= best:
                pos.remove(a)
                changed = True
                break
            pos.remove(a)
            pos.add(Atom(a.count - best, a.rtype, a.region))
            changed = True
            break

    # rule (2): absorption among negatives
    for a in sorted(neg):
        if any(b.count < a.count and b.rtype == a.rtype and b.region == a.region
               for b in neg if b != a):
            neg.discard(a)

    # rule (3): same nonzero connector, two different regions
    for a in pos:
        if a.chi == 0:
            continue
        for b in pos:
            if b.chi == a.chi and b.region != a.region:
                return None

    # rule (4): positive vs negative on the same type and region
    for a in pos:
        for b in neg:
            if b.rtype == a.rtype and b.region == a.region and b.count <= a.count:
                return None

    # rule (5): total per-type requirement vs team size
    if fleet is not None:
        need: dict[int, int] = {}
        for a in pos:
            need[a.rtype] = need.get(a.rtype, 0) + a.count
        for j, n in need.items():
            if n > fleet.size(j):
                return None

    # rule (6): total per-region requirement vs region size
    if region_sizes is not None:
        load: dict[int, int] = {}
        for a in pos:
            load[a.region] = load.get(a.region, 0) + a.count
        for k, n in load.items():
            if n > region_sizes.get(k, n):
                return None

    return Clause(frozenset(pos), frozenset(neg))


def rewrite_label(
    g: Label,
    fleet: FleetSpec | None = None,
    region_sizes: dict[int, int] | None = None,
) -> Label:
    out = []
    for c in g:
        r = rewrite_clause(c, fleet, region_sizes)
        if r is not None:
            out.append(r)
    return canonical(tuple(out))


# ---------------------------------------------------------------------------
# The automaton


@dataclass
class Nba:
    """Labeled-graph form of a nondeterministic Buchi automaton."""

    vertices: set[str] = field(default_factory=set)
    initials: set[str] = field(default_factory=set)
    acceptings: set[str] = field(default_factory=set)
    vertex_label: dict[str, Label] = field(default_factory=dict)    # BOTTOM = no self-loop
    edge_label: dict[tuple[str, str], Label] = field(default_factory=dict)

    def copy(self) -> "Nba":
        return Nba(
            set(self.vertices),
            set(self.initials),
            set(self.acceptings),
            dict(self.vertex_label),
            dict(self.edge_label),
        )

    def vlabel(self, v: str) -> Label:
        return self.vertex_label.get(v, BOTTOM)

    def has_self_loop(self, v: str) -> bool:
        return not is_bottom(self.vlabel(v))

    def out_edges(self, v: str):
        return [(a, b) for (a, b) in self.edge_label if a == v]

    def in_edges(self, v: str):
        return [(a, b) for (a, b) in self.edge_label if b == v]

    def succ(self, v: str):
        return sorted(b for (a, b) in self.edge_label if a == v)

    def pred(self, v: str):
        return sorted(a for (a, b) in self.edge_label if b == v)

    def remove_vertex(self, v: str):
        self.vertices.discard(v)
        self.initials.discard(v)
        self.acceptings.discard(v)
        self.vertex_label.pop(v, None)
        for e in [e for e in self.edge_label if v in e]:
            del self.edge_label[e]

    def size(self) -> tuple[int, int]:
        return len(self.vertices), len(self.edge_label)


# ---------------------------------------------------------------------------
# Pre-processing


def preprocess(nba: Nba, fleet: FleetSpec, workspace=None) -> Nba:
    """Rewrite every label with rules (1)-(5), and (6) when a workspace is given.

    Clauses that become false are dropped; labels left with no clause mark
    their edge for deletion (or, for a vertex, remove its self-loop).
    """
    region_sizes = None
    if workspace is not None:
        region_sizes = {k: len(cells) for k, cells in workspace.regions.items()}
    out = nba.copy()
    out.vertex_label = {
        v: rewrite_label(g, fleet, region_sizes) for v, g in nba.vertex_label.items()
    }
    out.edge_label = {}
    for e, g in nba.edge_label.items():
        r = rewrite_label(g, fleet, region_sizes)
        if is_bottom(r):
            continue
        out.edge_label[e] = r
    return out


# ---------------------------------------------------------------------------
# LTL -> NBA translation (tableau expansion + counting degeneralization)


def _decompose(formulas: frozenset[Formula]) -> list[tuple[frozenset, frozenset]]:
    """Tableau decomposition of an obligation set into (old, next) pairs.

    Each pair is one consistent way to satisfy all obligations now: `old`
    holds the processed subformulas (literals included), `next` the
    obligations deferred to the following instant.
    """
    results: dict[tuple, tuple[frozenset, frozenset]] = {}
    stack: list[tuple[set, set, set]] = [(set(formulas), set(), set())]
    while stack:
        new, old, nxt = stack.pop()
        if not new:
            key = (frozenset(old), frozenset(nxt))
            results.setdefault((tuple(sorted(map(str, key[0]))),
                                tuple(sorted(map(str, key[1])))), key)
            continue
        f = new.pop()
        op = f.op
        if op == "false":
            continue  # contradictory branch
        if op in ("true", "atom", "not"):
            contradiction = not_(f) if op != "not" else f.children[0]
            if contradiction in old:
                continue
            if op != "true":
                old.add(f)
            stack.append((new, old, nxt))
            continue
        if op == "and":
            old.add(f)
            new |= set(f.children) - old
            stack.append((new, old, nxt))
            continue
        if op == "next":
            old.add(f)
            nxt.add(f.children[0])
            stack.append((new, old, nxt))
            continue

        l, r = f.children
        if op == "or":
            splits = (({l}, set()), ({r}, set()))
        elif op == "until":
            splits = (({l}, {f}), ({r}, set()))
        elif op == "release":
            splits = (({r}, {f}), ({l, r}, set()))
        else:
            raise AssertionError(op)
        done = old | {f}
        for new_formulas, carry in splits:
            stack.append((new | (new_formulas - done), set(done), nxt | carry))
    return list(results.values())


def _node_clause(old: set[Formula]) -> Clause | None:
    pos, neg = set(), set()
    for g in old:
        if g.op == "atom":
            pos.add(g.atom)
        elif g.op == "not":
            neg.add(g.children[0].atom.basic)
    c = Clause(frozenset(pos), frozenset(neg))
    # counting semantics can contradict even without identical atoms
    return rewrite_clause(c)


def translate(f: Formula, fleet: FleetSpec, max_vertices: int = MAX_VERTICES) -> Nba:
    """Translate an NNF formula into the graph-form NBA.

    States are sets of deferred obligations, so waiting modes carry true
    self-loops and events sit on edge guards (the shape the planner's
    restricted-run pruning expects).  Until-fulfillments mark transitions;
    level-counting degeneralization turns the marks into accepting states,
    and a final bisimulation quotient merges redundant level copies.  A
    fresh initial vertex without a self-loop is prepended so runs consume
    one symbol per transition.
    """
    f = to_nnf(f)

    from collections import deque

    untils: list[Formula] = []

    def collect(g: Formula):
        if g.op == "until" and g not in untils:
            untils.append(g)
        for c in g.children:
            collect(c)

    collect(f)
    untils.sort(key=str)
    k = len(untils)

    # obligation-set states with guarded, mark-annotated transitions
    trans: dict[frozenset, list[tuple[Clause, frozenset, frozenset]]] = {}
    queue: deque[frozenset] = deque()

    def state_of(formulas: frozenset) -> frozenset:
        if formulas not in trans:
            trans[formulas] = []
            queue.append(formulas)
        return formulas

    init_state = frozenset({f})
    state_of(init_state)
    while queue:
        s = queue.popleft()
        if len(trans) > max_vertices:
            raise TranslationError(f"automaton exceeds {max_vertices} vertices")
        for old, nxt in _decompose(s):
            clause = _node_clause(old)
            if clause is None:
                continue
            marks = frozenset(
                u for u in untils if u not in old or u.children[1] in old
            )
            trans[s].append((clause, state_of(nxt), marks))

    # level-counting degeneralization over transition marks
    def advance(lvl: int, marks: frozenset) -> int:
        j = 0 if lvl == k else lvl
        while j < k and untils[j] in marks:
            j += 1
        return j  # == k means every awaited set was crossed (wrap)

    LState = tuple[frozenset, int]
    lsucc: dict[LState, list[tuple[Clause, LState]]] = {}
    lqueue: deque[LState] = deque()
    seen: set[LState] = set()

    def push(ls: LState):
        if ls not in seen:
            seen.add(ls)
            lqueue.append(ls)

    start = (init_state, k)  # start at the accepting level: fresh cycle
    push(start)
    while lqueue:
        s, lvl = lqueue.popleft()
        if len(seen) > max_vertices:
            raise TranslationError(f"automaton exceeds {max_vertices} vertices")
        out = []
        for clause, nxt, marks in trans[s]:
            lvl2 = advance(lvl, marks)
            target = (nxt, lvl2)
            out.append((clause, target))
            push(target)
        lsucc[(s, lvl)] = out

    accepting = {ls for ls in seen if ls[1] == k}

    # bisimulation quotient (acceptance- and guard-respecting)
    cls: dict[LState, int] = {}
    base: dict[bool, int] = {}
    for ls in seen:
        cls[ls] = base.setdefault(ls in accepting, len(base))
    while True:
        sig = {
            ls: (cls[ls], frozenset((c.key(), cls[t]) for c, t in lsucc[ls]))
            for ls in seen
        }
        remap: dict[tuple, int] = {}
        new_cls = {}
        for ls in sorted(seen, key=lambda x: (sorted(map(str, x[0])), x[1])):
            new_cls[ls] = remap.setdefault(sig[ls], len(remap))
        stable = len(remap) == len(set(cls.values()))
        cls = new_cls
        if stable:
            break

    order = sorted({cls[ls] for ls in seen})
    name = {c: f"q{n}" for n, c in enumerate(order)}

    nba = Nba()
    nba.vertices.add("init")
    nba.initials.add("init")
    nba.vertex_label["init"] = BOTTOM
    edge_clauses: dict[tuple[str, str], list[Clause]] = {}
    self_clauses: dict[str, list[Clause]] = {}
    for ls in seen:
        v = name[cls[ls]]
        nba.vertices.add(v)
        nba.vertex_label.setdefault(v, BOTTOM)
        if ls in accepting:
            nba.acceptings.add(v)
        for clause, target in lsucc[ls]:
            w = name[cls[target]]
            if w == v:
                self_clauses.setdefault(v, []).append(clause)
            else:
                edge_clauses.setdefault((v, w), []).append(clause)
    for clause, target in lsucc[start]:
        w = name[cls[target]]
        edge_clauses.setdefault(("init", w), []).append(clause)

    for v, cs in self_clauses.items():
        nba.vertex_label[v] = canonical(tuple(cs))
    for e, cs in edge_clauses.items():
        nba.edge_label[e] = canonical(tuple(cs))

    _drop_dead(nba)
    return nba


def _drop_dead(nba: Nba):
    """Remove vertices that cannot reach an accepting vertex or be reached."""
    # reachable from initials
    reach = set(nba.initials)
    stack = list(reach)
    while stack:
        v = stack.pop()
        for w in nba.succ(v):
            if w not in reach:
                reach.add(w)
                stack.append(w)
    # co-reachable to acceptings
    co = set(nba.acceptings)
    stack = list(co)
    while stack:
        v = stack.pop()
        for u in nba.pred(v):
            if u not in co:
                co.add(u)
                stack.append(u)
    keep = reach & co
    for v in list(nba.vertices):
        if v not in keep:
            nba.remove_vertex(v)


# ---------------------------------------------------------------------------
# NBA-JSON interchange


def _label_to_json(g: Label):
    if is_top(g):
        return "TOP"
    if is_bottom(g):
        return "BOTTOM"
    return [
        {
            "pos": [[a.count, a.rtype, a.region, a.chi] for a in sorted(c.pos)],
            "neg": [[a.count, a.rtype, a.region] for a in sorted(c.neg)],
        }
        for c in g
    ]


def _label_from_json(data) -> Label:
    if data == "TOP":
        return TOP
    if data == "BOTTOM":
        return BOTTOM
    clauses = []
    for entry in data:
        pos = frozenset(Atom(*lit) for lit in entry.get("pos", []))
        neg = frozenset(Atom(*lit) for lit in entry.get("neg", []))
        clauses.append(Clause(pos, neg))
    return canonical(tuple(clauses))


def export_nba(nba: Nba, path) -> None:
    data = {
        "vertices": sorted(nba.vertices),
        "initials": sorted(nba.initials),
        "acceptings": sorted(nba.acceptings),
        "vlabels": {v: _label_to_json(nba.vlabel(v)) for v in sorted(nba.vertices)},
        "elabels": {f"{a}->{b}": _label_to_json(g) for (a, b), g in sorted(nba.edge_label.items())},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=1)


def nba_from_dict(data: dict, fleet: FleetSpec | None = None) -> Nba:
    nba = Nba()
    nba.vertices = set(data["vertices"])
    nba.initials = set(data["initials"])
    nba.acceptings = set(data["acceptings"])
    for v in nba.initials | nba.acceptings:
        if v not in nba.vertices:
            raise FormulaError(f"NBA file: unknown vertex {v!r}")
    for v, g in data.get("vlabels", {}).items():
        nba.vertex_label[v] = _label_from_json(g)
    for v in nba.vertices:
        nba.vertex_label.setdefault(v, BOTTOM)
    for key, g in data.get("elabels", {}).items():
        a, _, b = key.partition("->")
        if a not in nba.vertices or b not in nba.vertices:
            raise FormulaError(f"NBA file: edge {key!r} references unknown vertex")
        if a == b:
            raise FormulaError(f"NBA file: self-loop {key!r} belongs in vlabels")
        label = _label_from_json(g)
        if is_bottom(label):
            log.warning("dropping edge %s with false label", key)
            continue
        nba.edge_label[(a, b)] = label
    if fleet is not None:
        for g in list(nba.vertex_label.values()) + list(nba.edge_label.values()):
            for c in g:
                for a in c.pos | c.neg:
                    if a.rtype not in fleet.counts:
                        raise FormulaError(f"NBA file: robot type {a.rtype} not declared")
    return nba


def import_nba(path, fleet: FleetSpec | None = None) -> Nba:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    return nba_from_dict(data, fleet)
