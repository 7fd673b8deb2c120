"""End-to-end planning driver.

Iterates over sorted (initial, accepting) vertex pairs, then prefix posets,
then suffix posets, running the allocation MILP and the executable path
stages for each candidate until the requested number of feasible plans is
found.  Infeasible candidates advance the iteration silently; when the
suffix fails for every suffix poset, the prefix is re-solved with handoff
pins over (last subtask, satisfied clause) pairs.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from . import buchi, decompose, gmrpp, milp, routing
from .buchi import Clause, Nba
from .ltl import Atom, Formula, parse_formula, to_nnf, validate
from .milp import HighLevelPlan
from .oracle import LassoWord, accepts, trace_of
from .solver import SolverConfig
from .workspace import Cell, Metric, Workspace, compute_metric

log = logging.getLogger(__name__)

Robot = tuple[int, int]


@dataclass
class DebugCapture:
    """Optional recorder for acceptance-style structural checks."""

    milp: list = field(default_factory=list)     # (mm, sol, plan, poset)
    gmrpp: list = field(default_factory=list)    # (instance, segments)


@dataclass
class PlanRequest:
    workspace: Workspace
    formula: Formula | None = None
    nba: Nba | None = None
    solutions: int = 1
    execution: str = "full"            # full | partial
    sync: str = "seq"                  # seq | sim
    collision: bool = True
    suffix_mode: str = "two_step"      # two_step | one_step
    cfg: SolverConfig = field(default_factory=SolverConfig)
    seed: int = 0
    poset_cap: int | None = None       # optional cap on posets tried per pair
    capture: DebugCapture | None = None


@dataclass
class PlanResult:
    pair: tuple[str, str]
    poset_index: int
    prefix_plan: HighLevelPlan
    suffix_plan: HighLevelPlan | None
    prefix_paths: dict[Robot, list[Cell]]
    suffix_paths: dict[Robot, list[Cell]]      # first frame equals prefix final
    cost_prefix: float
    cost_suffix: float
    cost: float
    stats: dict = field(default_factory=dict)

    def all_paths(self) -> dict[Robot, list[Cell]]:
        """Prefix then suffix frames; the suffix's duplicated first and last
        (loop-closing) frames are dropped, so the final frame's successor is
        the first suffix frame."""
        out = {}
        for r, p in self.prefix_paths.items():
            out[r] = list(p) + list(self.suffix_paths.get(r, [])[1:-1])
        return out

    def lasso_split(self) -> int:
        """Index of the first suffix frame (= last prefix frame)."""
        return len(next(iter(self.prefix_paths.values()))) - 1


@dataclass
class PlanOutcome:
    status: str                        # feasible | no_restricted_run | stages_infeasible
    results: list[PlanResult] = field(default_factory=list)
    detail: str = ""

    @property
    def best(self) -> PlanResult | None:
        if not self.results:
            return None
        return min(self.results, key=lambda r: r.cost)


def _path_cost(w: Workspace, paths: dict[Robot, list[Cell]]) -> int:
    return sum(
        w.move_cost(a, b)
        for p in paths.values()
        for a, b in zip(p, p[1:])
    )


def plan(req: PlanRequest) -> PlanOutcome:
    w = req.workspace
    fleet = w.fleet()
    cfg = req.cfg

    if req.nba is not None:
        nba = req.nba
    else:
        rep = validate(req.formula, fleet)
        if not rep.valid:
            raise ValueError("invalid formula: " + "; ".join(rep.violations))
        nba = buchi.translate(to_nnf(req.formula), fleet)

    nba = buchi.preprocess(nba, fleet, w if req.collision else None)
    full = decompose.prune_nba(nba)
    relaxed = decompose.relax_nba(full)
    metric = compute_metric(w)

    pairs = decompose.sort_pairs(relaxed, full, w)
    if not pairs:
        return PlanOutcome("no_restricted_run",
                           detail="no initial/accepting pair admits a finite run")

    results: list[PlanResult] = []
    for ctx in pairs:
        v0, vacc = ctx.v0, ctx.v_accept
        sub = decompose.extract_prefix_subnba(relaxed, full, w, v0, vacc)
        sub = decompose.prune_composite(sub, full, vacc)
        posets = decompose.infer_posets(sub, v0, vacc, full)
        if req.poset_cap is not None:
            posets = posets[: req.poset_cap]
        for p_idx, poset in enumerate(posets):
            result = _try_poset(req, w, fleet, metric, full, relaxed, sub,
                                ctx, poset, p_idx, cfg)
            if result is not None:
                results.append(result)
                if len(results) >= req.solutions:
                    return PlanOutcome("feasible", results)
    if results:
        return PlanOutcome("feasible", results)
    return PlanOutcome("stages_infeasible",
                       detail="every MILP or path stage was infeasible")


def _try_poset(req, w, fleet, metric, full, relaxed, sub, ctx, poset, p_idx, cfg):
    """One prefix poset: MILP, executable prefix, then the suffix stages.

    Returns a PlanResult or None.  Implements the lazy handoff pinning: the
    first attempt leaves the last subtask free; if the suffix fails for every
    suffix poset, the prefix is re-solved pinned to each (last subtask,
    clause) alternative in turn.
    """
    pins: list[tuple[int | None, int | None]] = [(None, None)]
    for e in sorted(poset.last_candidates()):
        for p in range(len(buchi.clauses(poset.subtasks[e].elabel))):
            pins.append((e, p))

    tried_first = False
    for last_e, last_p in pins:
        if tried_first and (last_e, last_p) == (None, None):
            continue
        tried_first = True
        prefix = _solve_prefix(req, w, metric, full, sub, poset, cfg,
                               last_e, last_p)
        if prefix is None:
            if (last_e, last_p) == (None, None):
                return None  # unpinned prefix infeasible: poset dead
            continue
        plan_pre, exec_pre, path_pre = prefix
        result = _solve_suffix(req, w, fleet, metric, full, relaxed, ctx,
                               poset, p_idx, cfg, plan_pre, exec_pre, path_pre)
        if result is not None:
            return result
    return None


def _solve_prefix(req, w, metric, full, sub, poset, cfg, last_e, last_p):
    if not poset.elements:
        plan_pre = HighLevelPlan()
        plan_pre.waypoints = {r: [] for r in sorted(w.robots)}
        plan_pre.timelines = {r: [] for r in sorted(w.robots)}
        exec_paths = {r: [c] for r, c in w.robots.items()}
        state = gmrpp.ExecutionState(exec_paths, {r: 0 for r in w.robots}, 0, [], {})
        return plan_pre, gmrpp.ExecutableSegmentSet(exec_paths, state), \
            gmrpp.SimplePathAnnotated([], [poset.v0])
    g = routing.build_prefix_graph(poset, sub, w, metric, seed=req.seed)
    mm = milp.build_prefix_milp(g, poset, cfg, last_e, last_p)
    sol = milp.solve_milp(mm, cfg)
    if not sol.feasible:
        return None
    if req.capture is not None:
        req.capture.milp.append((mm, sol, None, poset))
    plan_pre = milp.extract_plan(sol, mm)
    try:
        path = gmrpp.extract_simple_path(
            plan_pre, sub, full, poset,
            initial_counts=w.counts_at(dict(w.robots)))
        exec_pre = gmrpp.run_sequence(
            path, plan_pre, w, cfg,
            execution=req.execution, sync=req.sync,
            collision=req.collision, metric=metric,
            capture=req.capture.gmrpp if req.capture is not None else None)
    except gmrpp.StageFailure:
        return None
    return plan_pre, exec_pre, path


def _prefix_handoff(path_pre: gmrpp.SimplePathAnnotated):
    """Satisfied clause of the last prefix edge plus its robot assignment."""
    if not path_pre.steps:
        return None, Clause(), {}
    last = path_pre.steps[-1]
    c_prior = Clause(last.e_pos.pos, last.e_neg.neg)
    return last, c_prior, dict(last.e_robots)


def _fleet_reuse(path_pre: gmrpp.SimplePathAnnotated) -> dict[int, list[Robot]]:
    """Connector -> robots bound to it during the prefix."""
    out: dict[int, list[Robot]] = {}
    for step in path_pre.steps:
        for source in (step.e_robots, step.v_robots):
            for atom, robots in source.items():
                if atom.chi and atom.chi not in out and robots:
                    out[atom.chi] = sorted(robots)
    return out


def _solve_suffix(req, w, fleet, metric, full, relaxed, ctx, poset, p_idx,
                  cfg, plan_pre, exec_pre, path_pre):
    v0, vacc = ctx.v0, ctx.v_accept
    finals = {r: p[-1] for r, p in exec_pre.paths.items()}
    suffix_counts = w.counts_at(finals)
    last_step, c_prior, assignment = _prefix_handoff(path_pre)
    prior_label = None
    if last_step is not None:
        a, b = last_step.edge
        prior_label = full.edge_label[(a, b)]

    cost_pre = _path_cost(w, exec_pre.paths)
    beta = cfg.beta

    ssub, alias = decompose.extract_suffix_subnba(
        relaxed, full, vacc, prior_label, w, suffix_counts)
    if ssub is None:
        # accepting self-loop satisfied by the final configuration: staying
        # put repeats the accepting vertex forever
        suffix_paths = {r: [c, c] for r, c in finals.items()}
        return PlanResult(
            (v0, vacc), p_idx, plan_pre, None,
            exec_pre.paths, suffix_paths,
            cost_pre, 0.0, beta * cost_pre,
        )

    acc_in = vacc + decompose.ACC_SUFFIX
    ssub = decompose.prune_composite(ssub, full, acc_in, alias)
    sposets = decompose.infer_posets(ssub, vacc, acc_in, full, alias)
    if req.poset_cap is not None:
        sposets = sposets[: req.poset_cap]

    for sposet in sposets:
        res = _run_suffix_poset(req, w, metric, full, ssub, alias, sposet,
                                cfg, finals, c_prior, assignment, path_pre)
        if res is None:
            continue
        suffix_paths, plan_suf = res
        cost_suf = _path_cost(w, suffix_paths)
        return PlanResult(
            (v0, vacc), p_idx, plan_pre, plan_suf,
            exec_pre.paths, suffix_paths,
            cost_pre, cost_suf,
            beta * cost_pre + (1 - beta) * cost_suf,
        )
    return None


def _run_suffix_poset(req, w, metric, full, ssub, alias, sposet, cfg,
                      finals, c_prior, assignment, path_pre):
    if not sposet.elements:
        return None
    if req.suffix_mode == "one_step":
        g = routing.build_pi_init_graph(sposet, ssub, w, metric, c_prior,
                                        starts=finals, seed=req.seed)
    else:
        g = routing.build_suffix_graph(sposet, ssub, w, metric, c_prior,
                                       assignment, starts=finals, seed=req.seed)
    mm = milp.build_suffix_milp(g, sposet, cfg, _fleet_reuse(path_pre))
    sol = milp.solve_milp(mm, cfg)
    if not sol.feasible:
        return None
    if req.capture is not None:
        req.capture.milp.append((mm, sol, None, sposet))
    plan_suf = milp.extract_plan(sol, mm)
    try:
        spath = gmrpp.extract_simple_path(
            plan_suf, ssub, full, sposet, alias,
            initial_counts=w.counts_at(finals))
        exec_suf = gmrpp.run_sequence(
            spath, plan_suf, w, cfg, starts=finals,
            execution=req.execution, sync=req.sync,
            collision=req.collision, metric=metric,
            capture=req.capture.gmrpp if req.capture is not None else None)
    except gmrpp.StageFailure:
        return None

    paths = exec_suf.paths
    if req.suffix_mode == "two_step":
        essential_regions = {}
        for atom, robots in (path_pre.steps[-1].e_robots.items()
                             if path_pre.steps else ()):
            for r in robots:
                essential_regions[r] = atom.region
        running = sorted(c_prior.neg)
        if spath.steps:
            running = sorted(set(running) | spath.steps[0].v_neg.neg)
        try:
            homing = gmrpp.close_suffix(
                exec_suf, finals, essential_regions, running, w, cfg,
                collision=req.collision)
        except gmrpp.StageFailure:
            return None
        for r in paths:
            paths[r] = paths[r] + homing[r][1:]
    closed = all(paths[r][-1] == finals[r] for r in paths)
    if not closed:
        log.debug("suffix loop did not close; discarding candidate")
        return None
    return paths, plan_suf


# ---------------------------------------------------------------------------
# Verification entry point


def verify_result(result: PlanResult, formula: Formula, w: Workspace) -> bool:
    word = result_trace(result, w)
    return accepts(formula, word, w.fleet())


def result_trace(result: PlanResult, w: Workspace) -> LassoWord:
    paths = result.all_paths()
    return trace_of(paths, w, split=result.lasso_split())
