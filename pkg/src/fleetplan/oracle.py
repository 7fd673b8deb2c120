"""Independent verification oracles.

Nothing here shares code paths with the planner: lasso-word acceptance is
decided both by direct recursive LTL semantics (`semantic_accepts`) and by a
product search over a freshly translated automaton (`accepts`), and
`brute_force_optimal` searches the joint configuration space times the
automaton for the true optimum.  These exist to check the planner, so they
favor obviousness over speed.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from itertools import combinations

from . import buchi
from .ltl import Atom, FleetSpec, Formula, atoms_of, strip_connectors, to_nnf
from .workspace import Cell, Workspace


@dataclass(frozen=True)
class LassoWord:
    """Finite presentation of an infinite word: prefix then repeated cycle.

    Each symbol is a frozenset of basic atoms true at that position.  An
    optional fleet record carries, per position, the robots present per
    (type, region) so connector binding can be checked.
    """

    prefix: tuple[frozenset[Atom], ...]
    cycle: tuple[frozenset[Atom], ...]
    fleets: tuple[dict[tuple[int, int], frozenset[tuple[int, int]]], ...] = ()

    def __post_init__(self):
        if not self.cycle:
            raise ValueError("lasso cycle must be nonempty")

    def __len__(self):
        return len(self.prefix) + len(self.cycle)

    def symbol(self, pos: int) -> frozenset[Atom]:
        seq = self.prefix + self.cycle
        return seq[pos]

    def succ(self, pos: int) -> int:
        last = len(self) - 1
        return len(self.prefix) if pos == last else pos + 1


def semantic_accepts(f: Formula, word: LassoWord) -> bool:
    """Recursive LTL semantics on the lasso, by fixpoint iteration.

    Atoms are judged by membership of their basic counterpart in the symbol
    set (counting closure: pi(i,j,k) in the symbol makes pi(i',j,k) true for
    i' <= i).  Connectors are ignored; see `accepts` for the bound check.
    """
    f = to_nnf(strip_connectors(f))
    n = len(word)
    positions = range(n)

    def holds_atom(a: Atom, pos: int) -> bool:
        return any(
            b.rtype == a.rtype and b.region == a.region and b.count >= a.count
            for b in word.symbol(pos)
        )

    cache: dict[Formula, list[bool]] = {}

    def eval_formula(g: Formula) -> list[bool]:
        if g in cache:
            return cache[g]
        if g.op == "true":
            vals = [True] * n
        elif g.op == "false":
            vals = [False] * n
        elif g.op == "atom":
            vals = [holds_atom(g.atom, p) for p in positions]
        elif g.op == "not":
            sub = eval_formula(g.children[0])
            vals = [not v for v in sub]
        elif g.op == "and":
            l, r = map(eval_formula, g.children)
            vals = [a and b for a, b in zip(l, r)]
        elif g.op == "or":
            l, r = map(eval_formula, g.children)
            vals = [a or b for a, b in zip(l, r)]
        elif g.op == "next":
            sub = eval_formula(g.children[0])
            vals = [sub[word.succ(p)] for p in positions]
        elif g.op == "until":
            l, r = map(eval_formula, g.children)
            vals = [False] * n  # least fixpoint
            for _ in range(n + 1):
                vals = [r[p] or (l[p] and vals[word.succ(p)]) for p in positions]
        elif g.op == "release":
            l, r = map(eval_formula, g.children)
            vals = [True] * n  # greatest fixpoint
            for _ in range(n + 1):
                vals = [r[p] and (l[p] or vals[word.succ(p)]) for p in positions]
        else:
            raise AssertionError(g.op)
        cache[g] = vals
        return vals

    return eval_formula(f)[0]


def nba_accepts(nba: buchi.Nba, word: LassoWord) -> bool:
    """Does the automaton accept the lasso word?  Product cycle search."""

    def counts(pos: int) -> dict[tuple[int, int], int]:
        out: dict[tuple[int, int], int] = {}
        for a in word.symbol(pos):
            key = (a.rtype, a.region)
            out[key] = max(out.get(key, 0), a.count)
        return out

    count_cache = [counts(p) for p in range(len(word))]

    def moves(v: str, pos: int) -> list[str]:
        out = []
        if buchi.label_satisfied(nba.vlabel(v), count_cache[pos]):
            out.append(v)
        for (a, b), g in nba.edge_label.items():
            if a == v and buchi.label_satisfied(g, count_cache[pos]):
                out.append(b)
        return out

    n = len(word)
    # product states: (vertex, position); acceptance needs a reachable cycle
    # through (accepting vertex, any cycle position)
    start = {(v, 0) for v in nba.initials}
    seen = set(start)
    stack = list(start)
    reach = set(start)
    while stack:
        v, p = stack.pop()
        for w_ in moves(v, p):
            s = (w_, word.succ(p))
            if s not in seen:
                seen.add(s)
                stack.append(s)
                reach.add(s)

    cyc_positions = range(len(word.prefix), n)
    candidates = [
        (v, p) for (v, p) in reach if v in nba.acceptings and p in
        set(len(word.prefix) + i for i in range(len(word.cycle)))
    ]
    # a lasso word accepted iff some accepting product state on the cycle part
    # can reach itself
    for v0, p0 in candidates:
        seen2 = set()
        stack = [(w_, word.succ(p0)) for w_ in moves(v0, p0)]
        while stack:
            s = stack.pop()
            if s == (v0, p0):
                return True
            if s in seen2:
                continue
            seen2.add(s)
            v, p = s
            stack.extend((w_, word.succ(p)) for w_ in moves(v, p))
        if (v0, p0) in seen2:
            return True
    return False


def accepts(f: Formula, word: LassoWord, fleet: FleetSpec | None = None) -> bool:
    """Word membership in the language of the formula, connector bind included.

    The zero-connector projection is checked through a freshly translated
    automaton; for each nonzero connector we then require a single fleet of
    the right size that realizes every bound atom whenever the word needs it.
    Fleet records must be present on the word for the bind check; without
    them only the projection is checked.
    """
    if fleet is None:
        fleet = FleetSpec({a.rtype: a.count for a in atoms_of(f)} or {1: 1})
    nba = buchi.translate(strip_connectors(f), fleet)
    if not nba_accepts(nba, word):
        return False

    connectors: dict[int, list[Atom]] = {}
    for a in atoms_of(f):
        if a.chi:
            connectors.setdefault(a.chi, []).append(a)
    if not connectors:
        return True
    if not word.fleets:
        return True  # only the projection is checkable without fleet records

    # choose one fleet per connector and re-check the word semantically with
    # bound atoms true only when the chosen fleet is present
    choices = []
    for chi, atoms in sorted(connectors.items()):
        i, j = atoms[0].count, atoms[0].rtype
        pool = [r for r in range(1, fleet.size(j) + 1)]
        choices.append((chi, j, [frozenset(c) for c in combinations(pool, i)]))

    def try_assign(idx: int, assignment: dict[int, frozenset[int]]) -> bool:
        if idx == len(choices):
            return _holds_with_binding(f, word, assignment)
        chi, j, options = choices[idx]
        for fl in options:
            assignment[chi] = fl
            if try_assign(idx + 1, assignment):
                return True
        del assignment[chi]
        return False

    return try_assign(0, {})


def _holds_with_binding(f: Formula, word: LassoWord,
                        assignment: dict[int, frozenset[int]]) -> bool:
    """Semantic check where chi-bound atoms require the assigned fleet present."""
    f = to_nnf(f)
    n = len(word)

    def fleet_at(pos: int, j: int, k: int) -> frozenset[tuple[int, int]]:
        if pos >= len(word.fleets):
            pos = len(word.prefix) + (pos - len(word.prefix)) % len(word.cycle)
        return word.fleets[pos].get((j, k), frozenset())

    def holds_atom(a: Atom, pos: int) -> bool:
        if a.chi and a.chi in assignment:
            present = {r for (r, j) in fleet_at(pos, a.rtype, a.region)}
            return assignment[a.chi] <= present
        return any(
            b.rtype == a.rtype and b.region == a.region and b.count >= a.count
            for b in word.symbol(pos)
        )

    cache: dict[Formula, list[bool]] = {}

    def ev(g: Formula) -> list[bool]:
        if g in cache:
            return cache[g]
        if g.op == "true":
            vals = [True] * n
        elif g.op == "false":
            vals = [False] * n
        elif g.op == "atom":
            vals = [holds_atom(g.atom, p) for p in range(n)]
        elif g.op == "not":
            vals = [not v for v in ev(g.children[0])]
        elif g.op == "and":
            l, r = map(ev, g.children)
            vals = [a and b for a, b in zip(l, r)]
        elif g.op == "or":
            l, r = map(ev, g.children)
            vals = [a or b for a, b in zip(l, r)]
        elif g.op == "next":
            sub = ev(g.children[0])
            vals = [sub[word.succ(p)] for p in range(n)]
        elif g.op == "until":
            l, r = map(ev, g.children)
            vals = [False] * n
            for _ in range(n + 1):
                vals = [r[p] or (l[p] and vals[word.succ(p)]) for p in range(n)]
        elif g.op == "release":
            l, r = map(ev, g.children)
            vals = [True] * n
            for _ in range(n + 1):
                vals = [r[p] and (l[p] or vals[word.succ(p)]) for p in range(n)]
        else:
            raise AssertionError(g.op)
        cache[g] = vals
        return vals

    return ev(f)[0]


# ---------------------------------------------------------------------------
# Trace extraction from executed paths


def trace_of(paths: dict[tuple[int, int], list], w: Workspace,
             split: int | None = None) -> LassoWord:
    """Symbol sequence generated by equal-length per-robot cell paths.

    `split` marks the first suffix frame; when None the whole path is a
    prefix and a final idle frame forms the cycle.  Fleet records are kept so
    connector binding can be verified afterwards.
    """
    lengths = {len(p) for p in paths.values()}
    if len(lengths) != 1:
        raise ValueError("per-robot frame counts differ")
    horizon = lengths.pop()

    symbols: list[frozenset[Atom]] = []
    fleets: list[dict[tuple[int, int], frozenset[tuple[int, int]]]] = []
    for t in range(horizon):
        config = {rid: tuple(path[t]) for rid, path in paths.items()}
        counts = w.counts_at(config)
        syms = set()
        for (j, k), c in counts.items():
            for i in range(1, c + 1):
                syms.add(Atom(i, j, k))
        present: dict[tuple[int, int], set] = {}
        for (r, j), cell in config.items():
            k = w.region_of(cell)
            if k is not None:
                present.setdefault((j, k), set()).add((r, j))
        symbols.append(frozenset(syms))
        fleets.append({key: frozenset(v) for key, v in present.items()})

    if split is None:
        return LassoWord(tuple(symbols[:-1]) or (symbols[-1],), (symbols[-1],), tuple(fleets))
    prefix = tuple(symbols[:split])
    cycle = tuple(symbols[split:]) or (symbols[-1],)
    return LassoWord(prefix, cycle, tuple(fleets))


# ---------------------------------------------------------------------------
# Brute-force optimal planner on the product graph


@dataclass
class OptimalResult:
    cost: int
    paths: dict[tuple[int, int], list]
    states_explored: int = 0


def brute_force_optimal(
    f: Formula,
    w: Workspace,
    bound: int = 2_000_000,
) -> OptimalResult | None:
    """Exact minimum prefix cost for co-safe goals by product-graph Dijkstra.

    Explores (joint configuration, automaton vertex) states; terminates at
    the first accepting vertex reached (which, for co-safe specifications
    whose accepting vertex carries a TOP self-loop, is the full optimum).
    Returns None when the configured state bound is exceeded or no accepting
    state is reachable.  Used as a test oracle only.
    """
    fleet = w.fleet()
    nba = buchi.translate(strip_connectors(f), fleet)
    nba = buchi.preprocess(nba, fleet)
    if not nba.acceptings:
        return None

    robots = sorted(w.robots)
    start = tuple(w.robots[r] for r in robots)

    # atoms only mention some (type, region) pairs; everything else is noise
    relevant: set[tuple[int, int]] = set()
    for lab in list(nba.vertex_label.values()) + list(nba.edge_label.values()):
        for c in lab:
            for a in c.pos | c.neg:
                relevant.add((a.rtype, a.region))

    def count_key(config) -> tuple:
        counts: dict[tuple[int, int], int] = {}
        for (r, j), cell in zip(robots, config):
            k = w.region_of(cell)
            if k is not None and (j, k) in relevant:
                counts[(j, k)] = counts.get((j, k), 0) + 1
        return tuple(sorted(counts.items()))

    out_edges: dict[str, list[tuple[str, object]]] = {}
    for (a, b), lab in nba.edge_label.items():
        out_edges.setdefault(a, []).append((b, lab))

    moves_memo: dict[tuple[str, tuple], list[str]] = {}

    def nba_moves(v: str, key: tuple) -> list[str]:
        memo_key = (v, key)
        cached = moves_memo.get(memo_key)
        if cached is not None:
            return cached
        counts = dict(key)
        out = []
        if buchi.label_satisfied(nba.vlabel(v), counts):
            out.append(v)
        for b, lab in out_edges.get(v, ()):
            if buchi.label_satisfied(lab, counts):
                out.append(b)
        moves_memo[memo_key] = out
        return out

    # Dijkstra over (config, vertex) with parent pointers for path recovery
    dist: dict[tuple, int] = {}
    parent: dict[tuple, tuple | None] = {}
    heap = []
    for v in nba.initials:
        s = (start, v)
        dist[s] = 0
        parent[s] = None
        heapq.heappush(heap, (0, s))

    moves_cache: dict[Cell, list] = {}

    def cell_moves(c):
        if c not in moves_cache:
            moves_cache[c] = [c] + w.neighbors(c)
        return moves_cache[c]

    explored = 0
    goal = None
    while heap:
        cost, s = heapq.heappop(heap)
        if cost > dist.get(s, 1 << 60):
            continue
        config, v = s
        if v in nba.acceptings:
            goal = s
            break
        succs = [cell_moves(c) for c in config]
        work = 1
        for lst in succs:
            work *= len(lst)
        explored += work
        if explored > bound:
            return None
        for joint in _product(succs):
            step_cost = sum(w.move_cost(a, b) for a, b in zip(config, joint))
            nd = cost + step_cost
            key = count_key(joint)
            for v2 in nba_moves(v, key):
                s2 = (joint, v2)
                if nd < dist.get(s2, 1 << 60):
                    dist[s2] = nd
                    parent[s2] = s
                    heapq.heappush(heap, (nd, s2))
    if goal is None:
        return None

    chain = []
    s = goal
    while s is not None:
        chain.append(s[0])
        s = parent[s]
    chain.reverse()
    paths = {rid: [cfg[i] for cfg in chain] for i, rid in enumerate(robots)}
    return OptimalResult(dist[goal], paths, explored)


def _product(lists):
    if not lists:
        yield ()
        return
    head, *rest = lists
    for item in head:
        for tail in _product(rest):
            yield (item,) + tail
