import itertools
import random

import pytest

from fleetplan.ltl import Atom, FleetSpec, parse_formula
from fleetplan.oracle import (
    LassoWord,
    accepts,
    brute_force_optimal,
    nba_accepts,
    semantic_accepts,
    trace_of,
)
from fleetplan.workspace import Workspace

from helpers import all_lassos


def test_accepts_f_and_g_basics():
    p = Atom(1, 1, 1)
    fp = parse_formula("F pi(1,1,1)")
    gp = parse_formula("G pi(1,1,1)")
    w_yes = LassoWord((frozenset({p}),), (frozenset(),))
    w_no = LassoWord((frozenset(),), (frozenset(),))
    assert accepts(fp, w_yes)
    assert not accepts(fp, w_no)
    assert not accepts(gp, LassoWord((), (frozenset({p}), frozenset())))
    assert accepts(gp, LassoWord((), (frozenset({p}),)))


def test_accepts_agrees_with_recursive_semantics():
    rng = random.Random(2)
    a1, a2 = Atom(1, 1, 1), Atom(1, 1, 2)
    alphabet = [frozenset(), frozenset({a1}), frozenset({a2}), frozenset({a1, a2})]
    words = all_lassos(alphabet, 4)
    from fleetplan.ltl import TRUE, and_, atom, not_, next_, or_, release, until

    def gen(depth):
        if depth == 0 or rng.random() < 0.35:
            return rng.choice([atom(a1), atom(a2), TRUE])
        op = rng.choice(["not", "and", "or", "next", "until", "release"])
        if op == "not":
            return not_(gen(depth - 1))
        if op == "next":
            return next_(gen(depth - 1))
        mk = {"and": and_, "or": or_, "until": until, "release": release}[op]
        return mk(gen(depth - 1), gen(depth - 1))

    sampler = random.Random(3)
    for _ in range(20):
        f = gen(3)
        for w in sampler.sample(words, 30):
            assert accepts(f, w, FleetSpec({1: 1})) == semantic_accepts(f, w)


def test_counting_closure_in_semantics():
    # pi(2,1,2) in a symbol makes pi(1,1,2) true as well
    two = Atom(2, 1, 2)
    f = parse_formula("F pi(1,1,2)")
    w = LassoWord((), (frozenset({two}),))
    assert semantic_accepts(f, w)
    assert accepts(f, w, FleetSpec({1: 2}))


def _line_world():
    return Workspace(5, 1, set(), {1: {(1, 0)}, 2: {(4, 0)}},
                     {(1, 1): (0, 0), (1, 2): (2, 0)})


def test_trace_of_counts_and_fleets():
    w = Workspace(4, 1, set(), {2: {(1, 0), (2, 0)}},
                  {(1, 1): (0, 0), (2, 1): (3, 0)})
    paths = {(1, 1): [(0, 0), (1, 0), (1, 0)],
             (2, 1): [(3, 0), (2, 0), (2, 0)]}
    word = trace_of(paths, w, split=1)
    # both robots inside region 2 from frame 1: both counts hold
    assert Atom(1, 1, 2) in word.symbol(1)
    assert Atom(2, 1, 2) in word.symbol(1)
    assert Atom(1, 1, 2) not in word.symbol(0)
    assert word.fleets[1][(1, 2)] == frozenset({(1, 1), (2, 1)})


def test_trace_all_idle_label_free():
    w = _line_world()
    paths = {r: [c, c] for r, c in w.robots.items()}
    word = trace_of(paths, w, split=1)
    assert all(not word.symbol(p) for p in range(len(word)))


def test_connector_binding_rejects_fleet_switch():
    # two type-1 robots alternate visits: the bound formula needs ONE robot
    # to do both, so a trace where different robots visit must fail
    w = Workspace(4, 1, set(), {1: {(0, 0)}, 2: {(3, 0)}},
                  {(1, 1): (1, 0), (2, 1): (2, 0)})
    f = parse_formula("F (pi(1,1,1,1) & F pi(1,1,2,1))")
    # robot 1 visits region 1, robot 2 visits region 2: binding broken
    paths = {(1, 1): [(1, 0), (0, 0), (0, 0), (0, 0)],
             (2, 1): [(2, 0), (3, 0), (3, 0), (3, 0)]}
    word = trace_of(paths, w, split=3)
    assert not accepts(f, word, w.fleet())
    # robot 1 does both in sequence: accepted
    paths2 = {(1, 1): [(1, 0), (0, 0), (1, 0), (2, 0), (3, 0), (3, 0)],
              (2, 1): [(2, 0)] * 6}
    word2 = trace_of(paths2, w, split=5)
    assert accepts(f, word2, w.fleet())


def test_bruteforce_adjacent_region():
    w = Workspace(3, 1, set(), {1: {(1, 0)}}, {(1, 1): (0, 0)})
    res = brute_force_optimal(parse_formula("F pi(1,1,1)"), w)
    assert res is not None and res.cost == 1


def test_bruteforce_unsatisfiable():
    w = Workspace(3, 1, set(), {1: {(1, 0)}}, {(1, 1): (0, 0)})
    res = brute_force_optimal(parse_formula("F false"), w)
    assert res is None


def test_bruteforce_bound_exceeded():
    w = _line_world()
    res = brute_force_optimal(parse_formula("F pi(1,1,1)"), w, bound=3)
    assert res is None


def test_bruteforce_matches_exhaustive_enumeration():
    """Cross-check the product search against plain path enumeration."""
    w = Workspace(4, 2, {(2, 0)}, {1: {(3, 0)}, 2: {(0, 1)}},
                  {(1, 1): (0, 0)})
    f = parse_formula("F (pi(1,1,2) & F pi(1,1,1))")
    res = brute_force_optimal(f, w)
    assert res is not None

    # exhaustive enumeration of single-robot walks up to depth 10
    best = None
    start = (0, 0)
    stack = [(start, 0, start in w.regions[2], False)]
    seen = {}

    def label(c):
        return w.region_of(c)

    frontier = [((0, 0), 0, False, False)]
    states = {((0, 0), False, False): 0}
    for _ in range(10):
        nxt = []
        for (cell, cost, seen2, done) in frontier:
            for n in [cell] + w.neighbors(cell):
                c2 = cost + (0 if n == cell else 1)
                s2 = seen2 or label(n) == 2
                d2 = done or (s2 and label(n) == 1)
                key = (n, s2, d2)
                if states.get(key, 1 << 30) <= c2:
                    continue
                states[key] = c2
                nxt.append((n, c2, s2, d2))
                if d2 and (best is None or c2 < best):
                    best = c2
        frontier = nxt
    assert res.cost == best
