"""Shared test utilities: lasso enumeration, a bounded restricted-run
checker, random automaton generation, and plan-structure validators."""

from __future__ import annotations

import random
from itertools import product

from fleetplan.buchi import (
    BOTTOM,
    Clause,
    Nba,
    canonical,
    implies,
    label_satisfied,
    strongly_implies,
)
from fleetplan.ltl import Atom, FleetSpec
from fleetplan.oracle import LassoWord

Counts = dict[tuple[int, int], int]


def all_lassos(alphabet, total_max):
    """All lasso words with prefix+cycle length up to total_max."""
    out = []
    for plen in range(0, total_max):
        for clen in range(1, total_max - plen + 1):
            for pre in product(alphabet, repeat=plen):
                for cyc in product(alphabet, repeat=clen):
                    out.append(LassoWord(tuple(pre), tuple(cyc)))
    return out


def realizable_counts(fleet: FleetSpec, regions: list[int]) -> list[Counts]:
    """Every (type, region) -> count table a placement of the fleet can make."""
    placements: list[Counts] = []
    slots = []
    for j in sorted(fleet.counts):
        slots.extend([j] * fleet.counts[j])
    options = regions + [None]
    for assign in product(options, repeat=len(slots)):
        counts: Counts = {}
        for j, k in zip(slots, assign):
            if k is not None:
                counts[(j, k)] = counts.get((j, k), 0) + 1
        placements.append(counts)
    uniq = {}
    for c in placements:
        uniq[tuple(sorted(c.items()))] = c
    return list(uniq.values())


def counts_to_symbol(counts: Counts) -> frozenset[Atom]:
    syms = set()
    for (j, k), c in counts.items():
        for i in range(1, c + 1):
            syms.add(Atom(i, j, k))
    return frozenset(syms)


def symbol_counts(symbol: frozenset[Atom]) -> Counts:
    out: Counts = {}
    for a in symbol:
        key = (a.rtype, a.region)
        out[key] = max(out.get(key, 0), a.count)
    return out


# ---------------------------------------------------------------------------
# Bounded restricted-accepting-run checker


def has_restricted_run(nba: Nba, word: LassoWord, dwell_cap: int = 8) -> bool:
    """Does the lasso word induce a restricted accepting run in the automaton?

    Enforces the structural conditions of such runs: one initial/accepting
    pair, simple prefix/suffix with only consecutive repeats, self-loops at
    every intermediate vertex, strong implication of self-looped end vertex
    labels, and the prefix-to-suffix implication conditions.
    """
    counts = [symbol_counts(word.symbol(p)) for p in range(len(word))]

    def sat_v(v, pos):
        return label_satisfied(nba.vlabel(v), counts[pos])

    def sat_e(e, pos):
        return label_satisfied(nba.edge_label[e], counts[pos])

    def cond_d(v1, v2):
        if v2 in nba.acceptings or not nba.has_self_loop(v2):
            return True
        return strongly_implies(nba.edge_label[(v1, v2)], nba.vlabel(v2))

    for v0 in sorted(nba.initials):
        for vacc in sorted(nba.acceptings):
            if _prefix_suffix_search(nba, word, counts, v0, vacc,
                                     sat_v, sat_e, cond_d, dwell_cap):
                return True
    return False


def _prefix_suffix_search(nba, word, counts, v0, vacc, sat_v, sat_e, cond_d,
                          dwell_cap):
    n = len(word)

    def suffix_ok(prior, pos_enter):
        """Search a simple suffix cycle from vacc starting at word position
        pos_enter, returning to vacc at the same cycle phase."""
        prior_label = nba.edge_label[(prior, vacc)]
        if nba.has_self_loop(vacc):
            # condition (e): dwell at the accepting vertex forever
            if not implies(prior_label, nba.vlabel(vacc)):
                return False
            pos = pos_enter
            for _ in range(2 * len(word) + 1):
                if not sat_v(vacc, pos):
                    return False
                pos = word.succ(pos)
            return True
        # condition (f): a cycle vacc -> ... -> vacc
        cyc = len(word.cycle)
        phase_enter = pos_enter

        def dfs(v, pos, steps, visited, first_edge_done, prior2):
            if steps > (len(nba.vertices) + 2) * max(cyc, 1) * dwell_cap:
                return False
            for w2 in sorted(set(b for (a, b) in nba.edge_label if a == v)):
                e = (v, w2)
                if not sat_e(e, pos):
                    continue
                if not first_edge_done:
                    if not implies(prior_label, nba.edge_label[e]):
                        continue
                if w2 == vacc:
                    if not implies(prior_label, nba.edge_label[e]):
                        continue
                    nxt = word.succ(pos)
                    if (nxt - len(word.prefix)) % cyc == (phase_enter - len(word.prefix)) % cyc:
                        return True
                    continue
                if w2 in visited or not cond_d(v, w2):
                    continue
                pos2 = word.succ(pos)
                # dwell at w2 then continue
                d = 0
                while d <= dwell_cap:
                    if dfs(w2, pos2, steps + 1 + d, visited | {w2}, True, prior2):
                        return True
                    if not sat_v(w2, pos2):
                        break
                    pos2 = word.succ(pos2)
                    d += 1
            return False

        return dfs(vacc, pos_enter, 0, set(), False, None)

    # prefix: v0 with dwells, then simple path to vacc
    def prefix_dfs(v, pos, visited, steps):
        if steps > (len(nba.vertices) + 2) * dwell_cap + n:
            return False
        for w2 in sorted(set(b for (a, b) in nba.edge_label if a == v)):
            e = (v, w2)
            if not sat_e(e, pos):
                continue
            if w2 == vacc:
                if suffix_ok(v, word.succ(pos)):
                    return True
                continue
            if w2 in visited or not cond_d(v, w2):
                continue
            pos2 = word.succ(pos)
            d = 0
            while d <= dwell_cap:
                if prefix_dfs(w2, pos2, visited | {w2}, steps + 1 + d):
                    return True
                if not sat_v(w2, pos2):
                    break
                pos2 = word.succ(pos2)
                d += 1
        return False

    if v0 == vacc:
        # empty prefix: the word starts at the accepting vertex
        return suffix_ok_direct(nba, word, counts, v0, vacc, sat_v, sat_e,
                                cond_d, dwell_cap)
    pos = 0
    d = 0
    while d <= dwell_cap:
        if prefix_dfs(v0, pos, {v0, vacc}, d):
            return True
        if not sat_v(v0, pos):
            break
        pos = word.succ(pos)
        d += 1
    return False


def suffix_ok_direct(nba, word, counts, v0, vacc, sat_v, sat_e, cond_d,
                     dwell_cap):
    """Pair (v, v): no prefix; a cycle (or a satisfied self-loop) from start."""
    if nba.has_self_loop(vacc):
        pos = 0
        for _ in range(2 * len(word) + 1):
            if not label_satisfied(nba.vlabel(vacc), counts[pos]):
                return False
            pos = word.succ(pos)
        return True
    cyc = len(word.cycle)

    def dfs(v, pos, visited, steps):
        if steps > (len(nba.vertices) + 2) * max(cyc, 1) * dwell_cap:
            return False
        for w2 in sorted(set(b for (a, b) in nba.edge_label if a == v)):
            e = (v, w2)
            if not sat_e(e, pos):
                continue
            if w2 == vacc:
                nxt = word.succ(pos)
                if (nxt - len(word.prefix)) % cyc == (0 - len(word.prefix)) % cyc and pos >= 0:
                    return True
                continue
            if w2 in visited or not cond_d(v, w2):
                continue
            pos2 = word.succ(pos)
            d = 0
            while d <= dwell_cap:
                if dfs(w2, pos2, visited | {w2}, steps + 1 + d):
                    return True
                if not sat_v(w2, pos2):
                    break
                pos2 = word.succ(pos2)
                d += 1
        return False

    return dfs(vacc, 0, set(), 0)


# ---------------------------------------------------------------------------
# Random small automata


def random_nba(seed: int, fleet: FleetSpec, regions: list[int],
               max_vertices: int = 6, max_atoms: int = 3) -> Nba:
    """Random small automaton over counted atoms; labels are 1-2 clause DNF."""
    rng = random.Random(seed)
    atoms = []
    for _ in range(max_atoms):
        j = rng.choice(sorted(fleet.counts))
        k = rng.choice(regions)
        i = rng.randint(1, fleet.counts[j])
        atoms.append(Atom(i, j, k))
    nv = rng.randint(2, max_vertices)
    names = [f"v{i}" for i in range(nv)]

    def rand_clause():
        pos = frozenset(rng.sample(atoms, rng.randint(0, 2)))
        negs = [a for a in atoms if a not in pos]
        neg = frozenset(rng.sample(negs, rng.randint(0, 1)) if negs else [])
        return Clause(pos, neg)

    def rand_label():
        if rng.random() < 0.2:
            return canonical((Clause(),))
        return canonical(tuple(rand_clause() for _ in range(rng.randint(1, 2))))

    nba = Nba()
    nba.vertices = set(names)
    nba.initials = {names[0]}
    nba.acceptings = {rng.choice(names)}
    for v in names:
        nba.vertex_label[v] = rand_label() if rng.random() < 0.8 else BOTTOM
    for a in names:
        for b in names:
            if a != b and rng.random() < 0.45:
                nba.edge_label[(a, b)] = rand_label()
    return nba


# ---------------------------------------------------------------------------
# Plan-structure validators (acceptance criteria 5 and 6)


def check_plan_structure(mm, sol, plan, poset) -> list[str]:
    """Criterion-5 checks on a feasible allocation solution."""
    problems = []
    times = {sid: sol.value(mm.t_e[sid]) for sid in poset.elements}
    order = sorted(poset.elements, key=lambda s: times[s])
    for i, a in enumerate(order):
        for b in order[i + 1:]:
            if poset.lt(b, a):
                problems.append(f"completion order violates {b} < {a}")
    seen = sorted(times.values())
    if len(set(seen)) != len(seen):
        problems.append("completion times are not distinct")
    if order:
        first = order[0]
        for key, var in mm.b_clause.items():
            sid, kind, p = key
            if sid != first or kind != 0 or sol.value(var) != 1:
                continue
            for v in mm.g.cls_map[key]:
                t = sum(sol.value(mm.t_minus[(v, r)]) for r in mm.g.robots[v])
                if t != 0:
                    problems.append(f"first subtask vertex label visited at {t} != 0")
    for sid in poset.elements:
        te = times[sid]
        for key, var in mm.b_clause.items():
            s2, kind, p = key
            if s2 != sid or kind != 0 or sol.value(var) != 1:
                continue
            for v in mm.g.cls_map[key]:
                tm = sum(sol.value(mm.t_minus[(v, r)]) for r in mm.g.robots[v])
                tp = sum(sol.value(mm.t_plus[(v, r)]) for r in mm.g.robots[v])
                if not (tm <= te <= tp + 1):
                    problems.append(
                        f"span violation at subtask {sid}: {tm} <= {te} <= {tp}+1")
    return problems


def check_segments(inst, segments, w) -> list[str]:
    """Criterion-6 checks: the three defining conditions plus collisions."""
    problems = []
    T = inst.horizon
    for r, goal in inst.goal_exact.items():
        if segments[r][T] != goal:
            problems.append(f"{r} missed exact goal")
    for r, region in inst.r12.items():
        if r in inst.goal_exact:
            continue
        if segments[r][T] not in region:
            problems.append(f"{r} missed target region at T")
    for r, region in inst.r1.items():
        for t in range(1, T):
            if segments[r][t] not in region:
                problems.append(f"{r} left hold region at {t}")
    for lits, times in ((inst.running_neg, range(1, T)),
                        (inst.terminal_neg, [T])):
        for a in lits:
            for t in times:
                cnt = sum(
                    1 for r, p in segments.items()
                    if r[1] == a.rtype and w.region_of(p[t]) == a.region
                )
                cnt += sum(
                    1 for r in inst.frozen
                    if r[1] == a.rtype and w.region_of(inst.x_init[r]) == a.region
                )
                if cnt >= a.count:
                    problems.append(f"negative literal {a} violated at t={t}")
    if inst.collision:
        robots = sorted(segments)
        for t in range(1, T + 1):
            cells = [segments[r][t] for r in robots]
            if len(set(cells)) != len(cells):
                problems.append(f"meet collision at t={t}")
            for i in range(len(robots)):
                for j in range(i + 1, len(robots)):
                    a, b = robots[i], robots[j]
                    if (segments[a][t] == segments[b][t - 1]
                            and segments[b][t] == segments[a][t - 1]
                            and segments[a][t] != segments[a][t - 1]):
                        problems.append(f"head-on collision {a}/{b} at t={t}")
    return problems
