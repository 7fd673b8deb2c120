import itertools

import pytest

from fleetplan import decompose as D
from fleetplan.buchi import preprocess
from fleetplan.gmrpp import (
    ExecutionState,
    GmrppInstance,
    build_gmrpp,
    close_suffix,
    extract_simple_path,
    run_sequence,
    solve_gmrpp,
)
from fleetplan.ltl import Atom
from fleetplan.milp import build_prefix_milp, extract_plan, solve_milp
from fleetplan.routing import build_prefix_graph
from fleetplan.solver import SolverConfig
from fleetplan.workspace import Workspace, compute_metric

from helpers import check_segments

CFG = SolverConfig(node_limit=500_000)

A = Atom(2, 1, 2, 1)
B = Atom(2, 1, 3, 1)
Dd = Atom(1, 2, 4)


@pytest.fixture(scope="module")
def task_i_plan(task_i_nba, office):
    pre = preprocess(task_i_nba, office.fleet(), office)
    full = D.prune_nba(pre)
    relaxed = D.relax_nba(full)
    sub = D.prune_composite(
        D.extract_prefix_subnba(relaxed, full, office, "init", "v6"), full, "v6")
    poset = D.infer_posets(sub, "init", "v6", full)[0]
    g = build_prefix_graph(poset, sub, office, compute_metric(office))
    mm = build_prefix_milp(g, poset, CFG)
    sol = solve_milp(mm, CFG)
    plan = extract_plan(sol, mm)
    return plan, sub, full, poset


# ---------------------------------------------------------------------------
# Simple-path extraction


def test_task_i_simple_path(task_i_plan, office):
    plan, sub, full, poset = task_i_plan
    path = extract_simple_path(plan, sub, full, poset,
                               initial_counts=office.counts_at(dict(office.robots)))
    assert path.vertices == ["init", "v1", "v2", "v3", "v6"]
    office_step = [s for s in path.steps if s.e_pos.pos == {A}][0]
    assert office_step.e_robots[A] == ((2, 1), (3, 1))
    # the relaxed-away negative is reinstated on the office edge
    assert office_step.e_neg.neg == {Atom(2, 1, 3)}
    # and on the first (top-labeled) step's edge, from the full automaton
    assert path.steps[0].e_neg.neg == {Atom(2, 1, 3)}


def test_single_subtask_path_length(task_ii_nba, office):
    pre = preprocess(task_ii_nba, office.fleet(), office)
    full = D.prune_nba(pre)
    relaxed = D.relax_nba(full)
    sub = D.extract_prefix_subnba(relaxed, full, office, "init", "v3")
    poset = D.infer_posets(sub, "init", "v3", full)[0]
    g = build_prefix_graph(poset, sub, office, compute_metric(office))
    mm = build_prefix_milp(g, poset, CFG)
    sol = solve_milp(mm, CFG)
    plan = extract_plan(sol, mm)
    path = extract_simple_path(plan, sub, full, poset,
                               initial_counts=office.counts_at(dict(office.robots)))
    assert len(path.steps) == len(poset.elements)
    assert path.vertices[0] == "init" and path.vertices[-1] == "v3"


# ---------------------------------------------------------------------------
# Single planning rounds


def test_one_robot_one_step():
    w = Workspace(3, 1, set(), {1: {(1, 0)}}, {(1, 1): (0, 0)})
    inst = GmrppInstance(1, dict(w.robots), r12={(1, 1): set(w.regions[1])})
    segs = solve_gmrpp(inst, w, CFG)
    assert segs == {(1, 1): [(0, 0), (1, 0)]}


def test_hold_robot_stays_in_region():
    w = Workspace(4, 2, set(), {1: {(1, 0), (1, 1)}}, {(1, 1): (1, 0)})
    inst = GmrppInstance(4, dict(w.robots), r1={(1, 1): set(w.regions[1])})
    segs = solve_gmrpp(inst, w, CFG)
    assert segs is not None
    for t in range(1, 4):
        assert segs[(1, 1)][t] in w.regions[1]
    assert check_segments(inst, segs, w) == []


def test_corridor_swap_infeasible_up_to_six():
    # two robots on a 1-wide corridor must exchange ends
    w = Workspace(4, 1, set(), {1: {(3, 0)}, 2: {(0, 0)}},
                  {(1, 1): (0, 0), (2, 1): (3, 0)})
    for T in range(1, 7):
        inst = GmrppInstance(
            T, dict(w.robots),
            r12={(1, 1): set(w.regions[1]), (2, 1): set(w.regions[2])},
            collision=True)
        assert solve_gmrpp(inst, w, CFG) is None, T
    # brute force over joint move sequences agrees
    assert not _swap_possible(w, 6)


def _swap_possible(w, horizon):
    starts = ((0, 0), (3, 0))
    goals = ((3, 0), (0, 0))
    frontier = {starts}
    for _ in range(horizon):
        nxt = set()
        for (a, b) in frontier:
            for na in [a] + w.neighbors(a):
                for nb in [b] + w.neighbors(b):
                    if na == nb:
                        continue
                    if na == b and nb == a:
                        continue
                    nxt.add((na, nb))
        frontier = nxt
        if goals in frontier:
            return True
    return False


def test_corridor_swap_with_bay_feasible():
    # adding a passing bay makes the exchange possible
    w = Workspace(4, 2, {(0, 1), (2, 1), (3, 1)},
                  {1: {(3, 0)}, 2: {(0, 0)}},
                  {(1, 1): (0, 0), (2, 1): (3, 0)})
    inst = GmrppInstance(
        6, dict(w.robots),
        r12={(1, 1): set(w.regions[1]), (2, 1): set(w.regions[2])},
        collision=True)
    segs = solve_gmrpp(inst, w, CFG)
    assert segs is not None
    assert check_segments(inst, segs, w) == []


def test_negative_literal_budget_respected():
    # two type-1 robots may not be in region 1 at the same time en route
    w = Workspace(5, 2, set(), {1: {(2, 0), (2, 1)}},
                  {(1, 1): (0, 0), (2, 1): (0, 1)})
    inst = GmrppInstance(
        6, dict(w.robots),
        r12={(1, 1): {(4, 0)}, (2, 1): {(4, 1)}},
        collision=False)
    inst.running_neg = [Atom(2, 1, 1)]
    inst.terminal_neg = [Atom(2, 1, 1)]
    segs = solve_gmrpp(inst, w, CFG)
    assert segs is not None
    assert check_segments(inst, segs, w) == []


def test_exact_goal_targets():
    w = Workspace(3, 3, set(), {}, {(1, 1): (0, 0), (2, 1): (2, 2)})
    inst = GmrppInstance(4, dict(w.robots), collision=True)
    inst.goal_exact = {(1, 1): (2, 2), (2, 1): (0, 0)}
    segs = solve_gmrpp(inst, w, CFG)
    assert segs is not None
    assert segs[(1, 1)][-1] == (2, 2) and segs[(2, 1)][-1] == (0, 0)
    assert check_segments(inst, segs, w) == []


# ---------------------------------------------------------------------------
# Full sequential execution


@pytest.mark.parametrize("execution,sync", [
    ("full", "seq"), ("full", "sim"), ("partial", "seq"), ("partial", "sim")])
def test_task_i_execution_modes(task_i_plan, office, execution, sync):
    plan, sub, full, poset = task_i_plan
    metric = compute_metric(office)
    path = extract_simple_path(plan, sub, full, poset,
                               initial_counts=office.counts_at(dict(office.robots)))
    result = run_sequence(path, plan, office, CFG, execution=execution,
                          sync=sync, collision=True, metric=metric)
    lengths = {len(p) for p in result.paths.values()}
    assert len(lengths) == 1
    final = {r: office.region_of(p[-1]) for r, p in result.paths.items()}
    assert final[(2, 1)] == 3 and final[(3, 1)] == 3
    assert final[(2, 2)] == 4
    # collision-free at every frame
    horizon = lengths.pop()
    robots = sorted(result.paths)
    for t in range(horizon):
        cells = [result.paths[r][t] for r in robots]
        assert len(set(cells)) == len(cells), t
    # the negative literal of the until-constraint holds before the
    # control-room visit: never two type-1 robots in region 3 early
    t_d = result.state.time_axis[plan.order.index(
        [s.sid for s in path.steps if s.e_pos.pos == {Dd}][0])]
    for t in range(0, t_d):
        cnt = sum(1 for r in robots
                  if r[1] == 1 and office.region_of(result.paths[r][t]) == 3)
        assert cnt < 2


def test_first_round_skipped_when_initially_satisfied(task_i_plan, office):
    plan, sub, full, poset = task_i_plan
    metric = compute_metric(office)
    path = extract_simple_path(plan, sub, full, poset,
                               initial_counts=office.counts_at(dict(office.robots)))
    result = run_sequence(path, plan, office, CFG, collision=True, metric=metric)
    # time axis still starts at 0: the first subtask consumed no frames
    assert result.state.time_axis[0] == 0
    assert result.state.c == len(path.steps)


def test_timeline_shift_preserves_order(task_i_plan, office):
    plan, sub, full, poset = task_i_plan
    metric = compute_metric(office)
    path = extract_simple_path(plan, sub, full, poset,
                               initial_counts=office.counts_at(dict(office.robots)))
    result = run_sequence(path, plan, office, CFG, collision=True, metric=metric)
    axis = result.state.time_axis
    assert axis == sorted(axis)
    before = plan.time_axis
    # relative order of the high-level axis is preserved after shifting
    assert [x < y for x, y in zip(before, before[1:])] == \
        [x < y for x, y in zip(axis, axis[1:])]


def test_close_suffix_homing():
    w = Workspace(4, 2, set(), {1: {(0, 0), (1, 0)}}, {(1, 1): (0, 0)})
    from fleetplan.gmrpp import ExecutableSegmentSet
    state = ExecutionState({(1, 1): [(0, 0), (1, 0)]}, {(1, 1): 0}, 0, [], {})
    exec_set = ExecutableSegmentSet({(1, 1): [(0, 0), (1, 0)]}, state)
    homing = close_suffix(exec_set, {(1, 1): (0, 0)}, {(1, 1): 1}, [], w, CFG)
    assert homing[(1, 1)][0] == (1, 0) and homing[(1, 1)][-1] == (0, 0)
    # confined to the region the whole way
    assert all(c in w.regions[1] for c in homing[(1, 1)])


def test_close_suffix_already_home():
    w = Workspace(3, 1, set(), {}, {(1, 1): (0, 0)})
    from fleetplan.gmrpp import ExecutableSegmentSet
    state = ExecutionState({(1, 1): [(0, 0)]}, {(1, 1): 0}, 0, [], {})
    exec_set = ExecutableSegmentSet({(1, 1): [(0, 0)]}, state)
    homing = close_suffix(exec_set, {(1, 1): (0, 0)}, {}, [], w, CFG)
    assert homing[(1, 1)][-1] == (0, 0)


def test_partial_mode_freezes_uninvolved(task_i_plan, office):
    plan, sub, full, poset = task_i_plan
    path = extract_simple_path(plan, sub, full, poset,
                               initial_counts=office.counts_at(dict(office.robots)))
    step = [s for s in path.steps if s.e_pos.pos == {Dd}][0]
    state = ExecutionState.fresh(dict(office.robots), plan)
    inst = build_gmrpp(step, state, office, 10, execution="partial")
    # the type-2 visitor moves; the idle type-2 robot is frozen
    movers = set(inst.r12)
    assert movers == {((2, 2))} or ((2, 2),) == tuple(sorted(movers))
    assert (1, 1) in inst.frozen or (1, 1) in inst.x_init


def test_partial_mode_negative_shrinkage():
    # a frozen robot already inside the avoided region lowers the budget
    w = Workspace(5, 2, set(), {6: {(4, 0), (4, 1)}},
                  {(1, 1): (4, 0), (2, 1): (0, 0), (3, 1): (0, 1)})
    from fleetplan.gmrpp import _shrink_negatives
    lits, release = _shrink_negatives(
        [Atom(3, 1, 6)], {(1, 1)}, {(1, 1): (4, 0)}, w)
    assert lits == [Atom(2, 1, 6)]
    assert release == set()
    # at the bound, occupants are released to move and the literal tightens
    lits2, release2 = _shrink_negatives(
        [Atom(1, 1, 6)], {(1, 1)}, {(1, 1): (4, 0)}, w)
    assert lits2 == [Atom(1, 1, 6)]
    assert release2 == {(1, 1)}
