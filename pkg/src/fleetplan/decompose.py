"""Automaton decomposition: pruning, relaxation, pair sorting, sub-automata,
composite-edge removal, and poset inference over subtasks.

A subtask is an automaton edge together with its starting vertex label; two
edges with equal (relaxed) labels that never share a path are the same
subtask.  Simple paths from the initial to the accepting vertex become
sequences of subtask ids, and the sets of sequences are compressed into
partially ordered sets: one greedily grown poset covering as many sequences
as possible, with leftovers kept as chains.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

from .buchi import (
    BOTTOM,
    Label,
    Nba,
    TOP,
    canonical,
    implies,
    is_bottom,
    is_top,
    label_and,
    label_satisfied,
    relax_label,
    strongly_implies,
    TranslationError,
)
from .workspace import Workspace

log = logging.getLogger(__name__)

PATH_CAP = 10_000


# ---------------------------------------------------------------------------
# Pruning and relaxation


def prune_nba(nba: Nba) -> Nba:
    """Drop vertices and edges that cannot occur on a restricted accepting run.

    Deletes false-labeled edges, self-loop-less vertices other than initial or
    accepting ones, incoming edges that do not strongly imply a self-looped
    target's vertex label, and vertices unreachable from the initial set;
    repeats until nothing changes.
    """
    g = nba.copy()
    changed = True
    while changed:
        changed = False
        for e in [e for e, lab in g.edge_label.items() if is_bottom(lab)]:
            del g.edge_label[e]
            changed = True
        for v in list(g.vertices):
            if v in g.initials or v in g.acceptings:
                continue
            if not g.has_self_loop(v):
                g.remove_vertex(v)
                changed = True
        for (u, v), lab in list(g.edge_label.items()):
            if v in g.acceptings or not g.has_self_loop(v):
                continue
            if not strongly_implies(lab, g.vlabel(v)):
                del g.edge_label[(u, v)]
                changed = True
        reach = set(g.initials)
        stack = list(reach)
        while stack:
            for w_ in g.succ(stack.pop()):
                if w_ not in reach:
                    reach.add(w_)
                    stack.append(w_)
        for v in list(g.vertices):
            if v not in reach and v not in g.initials:
                g.remove_vertex(v)
                changed = True
    return g


def relax_nba(nba: Nba) -> Nba:
    """Replace every negative literal with true; structure is unchanged."""
    g = nba.copy()
    g.vertex_label = {v: relax_label(lab) for v, lab in g.vertex_label.items()}
    g.edge_label = {e: relax_label(lab) for e, lab in g.edge_label.items()}
    return g


# ---------------------------------------------------------------------------
# Pair sorting


@dataclass
class PairPlanContext:
    v0: str
    v_accept: str
    prefix_length: int
    suffix_length: int

    @property
    def total_length(self) -> int:
        return self.prefix_length + self.suffix_length


def _initial_counts(w: Workspace) -> dict[tuple[int, int], int]:
    return w.counts_at(dict(w.robots))


def _pair_filtered(relaxed: Nba, full: Nba, v0: str, vacc: str,
                   counts0: dict[tuple[int, int], int]) -> Nba:
    """Copy of the relaxed NBA specialized to one initial/accepting pair."""
    g = relaxed.copy()
    for v in list(g.vertices):
        if v in (v0, vacc):
            continue
        if v in g.initials or v in g.acceptings:
            g.remove_vertex(v)
    g.initials = {v0}
    g.acceptings = {vacc}

    satisfied_loop = g.has_self_loop(v0) and label_satisfied(full.vlabel(v0), counts0)
    if not satisfied_loop:
        if g.has_self_loop(v0):
            g.vertex_label[v0] = BOTTOM
        for (a, b) in g.out_edges(v0):
            if not label_satisfied(full.edge_label[(a, b)], counts0):
                del g.edge_label[(a, b)]
    return g


def _bfs_len(g: Nba, src: str, dst: str) -> int | None:
    if src == dst:
        return 0
    dist = {src: 0}
    frontier = [src]
    while frontier:
        nxt = []
        for v in frontier:
            for w_ in g.succ(v):
                if w_ not in dist:
                    dist[w_] = dist[v] + 1
                    if w_ == dst:
                        return dist[w_]
                    nxt.append(w_)
        frontier = nxt
    return None


def _shortest_cycle(g: Nba, vacc: str) -> int | None:
    """Suffix length of the shortest simple cycle through vacc.

    The first cycle edge fires at suffix start (its label is implied by the
    prefix handoff), so only the remaining edges count as subtasks to plan.
    """
    best = None
    for (a, b) in g.out_edges(vacc):
        back = _bfs_len(g, b, vacc)
        if back is not None and (best is None or back < best):
            best = back
    return best


def sort_pairs(relaxed: Nba, full: Nba, w: Workspace) -> list[PairPlanContext]:
    """All (initial, accepting) pairs with finite prefix+suffix length, ascending."""
    counts0 = _initial_counts(w)
    out = []
    for v0 in sorted(relaxed.initials):
        for vacc in sorted(relaxed.acceptings):
            g = _pair_filtered(relaxed, full, v0, vacc, counts0)
            plen = 0 if v0 == vacc else _bfs_len(g, v0, vacc)
            if plen is None:
                continue
            if g.has_self_loop(vacc):
                slen = 0
            else:
                h = g.copy()
                for v in list(h.vertices):
                    if v in h.initials and v != vacc and not h.has_self_loop(v):
                        h.remove_vertex(v)
                slen = _shortest_cycle(h, vacc)
            if slen is None:
                continue
            out.append(PairPlanContext(v0, vacc, plen, slen))
    out.sort(key=lambda c: (c.total_length, c.v0, c.v_accept))
    return out


# ---------------------------------------------------------------------------
# Sub-automaton extraction


def extract_prefix_subnba(relaxed: Nba, full: Nba, w: Workspace,
                          v0: str, vacc: str) -> Nba:
    """Sub-automaton containing exactly the vertices on some v0 -> vacc path."""
    g = _pair_filtered(relaxed, full, v0, vacc, _initial_counts(w))
    if v0 == vacc:
        out = Nba({v0}, {v0}, {v0}, {v0: g.vlabel(v0)}, {})
        return out
    for e in g.out_edges(vacc):
        del g.edge_label[e]
    reach = {v0}
    stack = [v0]
    while stack:
        for w_ in g.succ(stack.pop()):
            if w_ not in reach:
                reach.add(w_)
                stack.append(w_)
    co = {vacc}
    stack = [vacc]
    while stack:
        for u in g.pred(stack.pop()):
            if u not in co:
                co.add(u)
                stack.append(u)
    keep = reach & co
    for v in list(g.vertices):
        if v not in keep:
            g.remove_vertex(v)
    return g


ACC_SUFFIX = "#acc"


def extract_suffix_subnba(
    relaxed: Nba,
    full: Nba,
    v_accept: str,
    prior_edge_label_full: Label | None,
    w: Workspace,
    suffix_counts: dict[tuple[int, int], int] | None = None,
) -> tuple[Nba | None, dict[str, str]]:
    """Cycle sub-automaton around the accepting vertex, or (None, {}) when the
    accepting self-loop is already satisfied by the suffix-initial locations
    (the prefix suffices and no suffix plan is needed).

    The accepting vertex is split into an outgoing copy (acting as the
    initial vertex) and an incoming copy named with the ``#acc`` suffix; the
    returned alias map resolves synthetic names back to originals for full
    label lookups.
    """
    counts = suffix_counts if suffix_counts is not None else _initial_counts(w)
    if full.has_self_loop(v_accept) and label_satisfied(full.vlabel(v_accept), counts):
        return None, {}

    g = relaxed.copy()
    for v in list(g.vertices):
        if v != v_accept and v in g.acceptings:
            g.remove_vertex(v)
        elif v != v_accept and v in g.initials and not g.has_self_loop(v):
            g.remove_vertex(v)
    g.vertex_label[v_accept] = BOTTOM  # self-loop, if any, did not suffice

    if prior_edge_label_full is not None:
        for (a, b) in g.out_edges(v_accept):
            if not implies(prior_edge_label_full, full.edge_label[(a, b)]):
                del g.edge_label[(a, b)]
        for (a, b) in g.in_edges(v_accept):
            if not implies(prior_edge_label_full, full.edge_label[(a, b)]):
                del g.edge_label[(a, b)]

    acc_in = v_accept + ACC_SUFFIX
    alias = {acc_in: v_accept}
    h = Nba()
    h.vertices = set(g.vertices) | {acc_in}
    h.initials = {v_accept}
    h.acceptings = {acc_in}
    h.vertex_label = dict(g.vertex_label)
    h.vertex_label[acc_in] = BOTTOM
    for (a, b), lab in g.edge_label.items():
        if b == v_accept:
            h.edge_label[(a, acc_in)] = lab
        else:
            h.edge_label[(a, b)] = lab

    reach = {v_accept}
    stack = [v_accept]
    while stack:
        for w_ in h.succ(stack.pop()):
            if w_ not in reach:
                reach.add(w_)
                stack.append(w_)
    co = {acc_in}
    stack = [acc_in]
    while stack:
        for u in h.pred(stack.pop()):
            if u not in co:
                co.add(u)
                stack.append(u)
    keep = reach & co
    if v_accept not in keep or acc_in not in keep:
        return Nba(), alias  # empty: no suffix cycle for this prior label
    for v in list(h.vertices):
        if v not in keep:
            h.remove_vertex(v)
    return h, alias


# ---------------------------------------------------------------------------
# Composite-subtask removal


def prune_composite(sub: Nba, full: Nba, vacc: str,
                    alias: dict[str, str] | None = None) -> Nba:
    """Delete edges whose label is the conjunction of a two-edge path's labels.

    The accepting-target guard: a composite into the accepting vertex is only
    removed when the accepting vertex's full label is TOP.
    """
    alias = alias or {}

    def full_vlabel(v: str) -> Label:
        return full.vlabel(alias.get(v, v))

    g = sub.copy()
    doomed = []
    for (v1, v3), lab13 in g.edge_label.items():
        if v3 == vacc and not is_top(full_vlabel(v3)):
            continue
        for v2 in g.succ(v1):
            if v2 in (v1, v3) or (v2, v3) not in g.edge_label:
                continue
            try:
                combined = label_and(g.edge_label[(v1, v2)], g.edge_label[(v2, v3)])
            except TranslationError:
                continue
            if canonical(lab13) == combined:
                doomed.append((v1, v3))
                break
    for e in doomed:
        del g.edge_label[e]
    return g


# ---------------------------------------------------------------------------
# Subtasks and posets


@dataclass(frozen=True)
class SubtaskKey:
    vlabel: Label
    elabel: Label

    def sort_key(self):
        return (
            tuple(c.key() for c in self.vlabel),
            tuple(c.key() for c in self.elabel),
        )


@dataclass
class Subtask:
    sid: int
    key: SubtaskKey
    edge: tuple[str, str]          # representative edge in the sub-automaton
    vlabel_full: Label
    elabel_full: Label

    @property
    def vlabel(self) -> Label:
        return self.key.vlabel

    @property
    def elabel(self) -> Label:
        return self.key.elabel


@dataclass
class Poset:
    """Strict partial order over subtask ids, transitively closed."""

    elements: tuple[int, ...]
    less: frozenset[tuple[int, int]]
    subtasks: dict[int, Subtask]
    v0: str
    v_accept: str

    def __post_init__(self):
        self._covers = None

    def lt(self, a: int, b: int) -> bool:
        return (a, b) in self.less

    def incomparable(self, a: int, b: int) -> bool:
        return a != b and (a, b) not in self.less and (b, a) not in self.less

    def before(self, e: int) -> set[int]:
        return {x for x in self.elements if (x, e) in self.less}

    def after(self, e: int) -> set[int]:
        return {x for x in self.elements if (e, x) in self.less}

    def covers(self) -> set[tuple[int, int]]:
        if self._covers is None:
            self._covers = {
                (a, b)
                for (a, b) in self.less
                if not any((a, z) in self.less and (z, b) in self.less for z in self.elements)
            }
        return self._covers

    def immediate_before(self, e: int) -> set[int]:
        return {a for (a, b) in self.covers() if b == e}

    def immediate_after(self, e: int) -> set[int]:
        return {b for (a, b) in self.covers() if a == e}

    def parallel(self, e: int) -> set[int]:
        return {x for x in self.elements if self.incomparable(x, e)}

    def first_candidates(self) -> set[int]:
        return {e for e in self.elements if not self.before(e)}

    def last_candidates(self) -> set[int]:
        return {e for e in self.elements if not self.after(e)}

    @property
    def height(self) -> int:
        if not self.elements:
            return 0
        memo: dict[int, int] = {}

        def depth(e: int) -> int:
            if e not in memo:
                preds = self.before(e)
                memo[e] = 1 + (max(map(depth, preds)) if preds else 0)
            return memo[e]

        return max(depth(e) for e in self.elements)

    @property
    def width(self) -> int:
        if not self.elements:
            return 0
        # Dilworth: width = n - maximum matching in the comparability DAG
        elems = list(self.elements)
        match_r: dict[int, int] = {}

        def augment(a: int, seen: set[int]) -> bool:
            for b in elems:
                if (a, b) in self.less and b not in seen:
                    seen.add(b)
                    if b not in match_r or augment(match_r[b], seen):
                        match_r[b] = a
                        return True
            return False

        matching = sum(augment(a, set()) for a in elems)
        return len(elems) - matching

    def linear_extensions(self, cap: int | None = None) -> list[tuple[int, ...]]:
        out: list[tuple[int, ...]] = []
        elems = sorted(self.elements)

        def rec(prefix: list[int], remaining: set[int]):
            if cap is not None and len(out) > cap:
                return
            if not remaining:
                out.append(tuple(prefix))
                return
            for e in sorted(remaining):
                if all((x, e) not in self.less for x in remaining if x != e):
                    prefix.append(e)
                    remaining.remove(e)
                    rec(prefix, remaining)
                    remaining.add(e)
                    prefix.pop()

        rec([], set(elems))
        return out

    def sort_key(self):
        ids = tuple(sorted(self.elements))
        return (-self.width, self.height, ids, tuple(sorted(self.less)))


def _simple_paths(g: Nba, v0: str, vacc: str, cap: int) -> list[list[tuple[str, str]]]:
    paths: list[list[tuple[str, str]]] = []
    truncated = False

    def dfs(v: str, trail: list[tuple[str, str]], on_path: set[str]):
        nonlocal truncated
        if len(paths) >= cap:
            truncated = True
            return
        if v == vacc:
            paths.append(list(trail))
            return
        for w_ in g.succ(v):
            if w_ in on_path:
                continue
            trail.append((v, w_))
            on_path.add(w_)
            dfs(w_, trail, on_path)
            on_path.discard(w_)
            trail.pop()

    dfs(v0, [], {v0})
    if truncated:
        log.warning("simple-path enumeration truncated at %d paths", cap)
    return paths


def _poset_from_relation(ids, less, subtasks, v0, vacc) -> Poset:
    return Poset(tuple(sorted(ids)), frozenset(less), subtasks, v0, vacc)


def _chain_poset(seq: tuple[int, ...], subtasks, v0, vacc) -> Poset:
    less = {(seq[i], seq[j]) for i in range(len(seq)) for j in range(i + 1, len(seq))}
    return _poset_from_relation(seq, less, subtasks, v0, vacc)


def _grow_cover(anchor: tuple[int, ...], orders: set[tuple[int, ...]],
                subtasks, v0, vacc) -> Poset:
    """Greedy partial cover: start from the anchor chain, delete cover
    relations while every linear extension stays inside the order set."""
    ids = list(anchor)
    less = {(anchor[i], anchor[j]) for i in range(len(anchor)) for j in range(i + 1, len(anchor))}

    def extensions_within(rel) -> bool:
        p = _poset_from_relation(ids, rel, subtasks, v0, vacc)
        exts = p.linear_extensions(cap=len(orders) + 1)
        return len(exts) <= len(orders) and all(e in orders for e in exts)

    improved = True
    while improved:
        improved = False
        p = _poset_from_relation(ids, less, subtasks, v0, vacc)
        for cover in sorted(p.covers()):
            candidate = set(less)
            candidate.discard(cover)
            if extensions_within(candidate):
                less = candidate
                improved = True
                break
    return _poset_from_relation(ids, less, subtasks, v0, vacc)


def cover_orders(orders: set[tuple[int, ...]], subtasks: dict[int, Subtask],
                 v0: str = "", vacc: str = "") -> list[Poset]:
    """Posets whose linear-extension sets partition the given linear orders.

    Repeatedly grows a maximal poset whose extensions all lie inside the
    remaining orders, then peels what is left as total-order chains; the
    union of the returned posets' extension sets equals the input exactly.
    """
    out: list[Poset] = []
    remaining = set(orders)
    while remaining:
        best = None
        for anchor in sorted(remaining):
            p = _grow_cover(anchor, remaining, subtasks, v0, vacc)
            covered = set(p.linear_extensions(cap=len(remaining) + 1))
            if best is None or len(covered) > len(best[1]):
                best = (p, covered)
        p, covered = best
        out.append(p)
        if not covered:  # safety: an anchor always covers itself
            out.extend(_chain_poset(s, subtasks, v0, vacc) for s in sorted(remaining))
            break
        remaining -= covered
    return out


def infer_posets(
    sub: Nba,
    v0: str,
    vacc: str,
    full: Nba,
    alias: dict[str, str] | None = None,
    path_cap: int = PATH_CAP,
) -> list[Poset]:
    """Posets of subtasks whose linear extensions are exactly the simple-path
    orders of each path block, sorted widest first, then shortest."""
    alias = alias or {}

    def full_edge(e: tuple[str, str]) -> Label:
        a, b = e
        return full.edge_label[(alias.get(a, a), alias.get(b, b))]

    def full_vertex(v: str) -> Label:
        return full.vlabel(alias.get(v, v))

    if v0 == vacc:
        return [Poset((), frozenset(), {}, v0, vacc)]
    paths = _simple_paths(sub, v0, vacc, path_cap)
    if not paths:
        return []

    # group paths by their multiset of labeled subtasks
    blocks: dict[frozenset, list[tuple[tuple, list]]] = {}
    for path in paths:
        seen: dict[SubtaskKey, int] = {}
        items = []
        for (a, b) in path:
            key = SubtaskKey(canonical(sub.vlabel(a)), canonical(sub.edge_label[(a, b)]))
            occ = seen.get(key, 0)
            seen[key] = occ + 1
            items.append((key, occ))
        blocks.setdefault(frozenset(items), []).append((tuple(items), path))

    posets: list[Poset] = []
    for signature in sorted(blocks, key=lambda s: sorted((k.sort_key(), o) for k, o in s)):
        entries = blocks[signature]
        items_sorted = sorted(signature, key=lambda it: (it[0].sort_key(), it[1]))
        ids = {item: n + 1 for n, item in enumerate(items_sorted)}

        subtasks: dict[int, Subtask] = {}
        for items, path in sorted(entries, key=lambda ip: ip[1]):
            for item, edge in zip(items, path):
                sid = ids[item]
                if sid not in subtasks:
                    subtasks[sid] = Subtask(
                        sid,
                        item[0],
                        edge,
                        canonical(full_vertex(edge[0])),
                        canonical(full_edge(edge)),
                    )

        orders = {tuple(ids[item] for item in items) for items, _ in entries}
        posets.extend(cover_orders(orders, subtasks, v0, vacc))

    posets.sort(key=Poset.sort_key)
    return posets
