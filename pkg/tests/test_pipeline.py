import json
import subprocess
import sys

import pytest

from fleetplan.buchi import Nba, TOP, BOTTOM
from fleetplan.ltl import parse_formula
from fleetplan.pipeline import PlanRequest, plan, result_trace, verify_result
from fleetplan.oracle import accepts
from fleetplan.solver import SolverConfig
from fleetplan.workspace import Workspace

CFG = SolverConfig(node_limit=500_000)

PHI1 = ("F (pi(2,1,2,1) & ! pi(2,1,3) & F pi(2,1,3,1)) & F pi(1,2,4)"
        " & (! pi(2,1,3)) U pi(1,2,4)")
PHI2 = "G F (pi(1,1,2,1) & F pi(1,1,3,1))"


def test_plan_task_i_from_fixture(task_i_nba, office):
    out = plan(PlanRequest(office, formula=parse_formula(PHI1),
                           nba=task_i_nba, cfg=CFG))
    assert out.status == "feasible"
    res = out.results[0]
    assert res.pair == ("init", "v6")
    assert verify_result(res, parse_formula(PHI1), office)
    # suffix is the stay-forever case: accepting self-loop already satisfied
    assert res.cost_suffix == 0


def test_plan_task_ii_from_fixture(task_ii_nba, office):
    out = plan(PlanRequest(office, formula=parse_formula(PHI2),
                           nba=task_ii_nba, cfg=CFG))
    assert out.status == "feasible"
    res = out.results[0]
    assert all(p[0] == p[-1] for p in res.suffix_paths.values())
    assert verify_result(res, parse_formula(PHI2), office)


def test_plan_translated_phi2(office):
    out = plan(PlanRequest(office, formula=parse_formula(PHI2), cfg=CFG))
    assert out.status == "feasible"
    assert verify_result(out.results[0], parse_formula(PHI2), office)


def test_empty_pruned_nba_reports_no_run(office):
    empty = Nba({"a"}, {"a"}, set(), {"a": TOP}, {})
    out = plan(PlanRequest(office, formula=parse_formula("F pi(1,1,2)"),
                           nba=empty, cfg=CFG))
    assert out.status == "no_restricted_run"


def test_unreachable_region_stage_failure():
    # region 1 is walled off: the MILP never sees a routing edge to it
    w = Workspace(5, 2, {(3, 0), (3, 1)}, {1: {(4, 0)}},
                  {(1, 1): (0, 0)})
    out = plan(PlanRequest(w, formula=parse_formula("F pi(1,1,1)"), cfg=CFG))
    assert out.status in ("stages_infeasible", "no_restricted_run")


def test_invalid_formula_raises(office):
    with pytest.raises(ValueError):
        plan(PlanRequest(office,
                         formula=parse_formula("F (pi(1,1,2,1) & F pi(2,1,3,1))"),
                         cfg=CFG))


def test_anytime_multiple_solutions(office, task_i_nba):
    out = plan(PlanRequest(office, formula=parse_formula(PHI1), nba=task_i_nba,
                           solutions=3, cfg=CFG))
    assert out.results
    costs = [r.cost for r in out.results]
    assert out.best.cost == min(costs)


def test_one_step_closing_mode(task_ii_nba, office):
    out = plan(PlanRequest(office, formula=parse_formula(PHI2), nba=task_ii_nba,
                           suffix_mode="one_step", cfg=CFG))
    assert out.status == "feasible"
    res = out.results[0]
    assert all(p[0] == p[-1] for p in res.suffix_paths.values())
    assert verify_result(res, parse_formula(PHI2), office)


def test_trace_has_lasso_shape(task_ii_nba, office):
    out = plan(PlanRequest(office, formula=parse_formula(PHI2), nba=task_ii_nba,
                           cfg=CFG))
    word = result_trace(out.results[0], office)
    assert len(word.cycle) >= 1
    assert accepts(parse_formula(PHI2), word, office.fleet())


# ---------------------------------------------------------------------------
# CLI


DATA = None


@pytest.fixture(scope="module")
def office_path():
    import importlib.resources as res
    return str(res.files("fleetplan") / "data" / "office_delivery.json")


def run_cli(*args, timeout=240):
    return subprocess.run([sys.executable, "-m", "fleetplan.cli", *args],
                          capture_output=True, text=True, timeout=timeout)


def test_cli_plan_verify_roundtrip(tmp_path, office_path):
    out = tmp_path / "run"
    r = run_cli("plan", "--workspace", office_path, "--formula", PHI2,
                "--out", str(out), "--frames")
    assert r.returncode == 0, r.stderr
    assert (out / "plan.json").exists()
    assert (out / "stats.csv").exists()
    assert (out / "frames.txt").exists()
    doc = json.loads((out / "plan.json").read_text())
    assert doc["status"] == "feasible"
    v = run_cli("verify", "--plan", str(out / "plan.json"),
                "--formula", PHI2, "--workspace", office_path)
    assert v.returncode == 0 and "PASS" in v.stdout


def test_cli_verify_fails_wrong_formula(tmp_path, office_path):
    out = tmp_path / "run"
    r = run_cli("plan", "--workspace", office_path, "--formula", PHI2,
                "--out", str(out))
    assert r.returncode == 0
    v = run_cli("verify", "--plan", str(out / "plan.json"),
                "--formula", "G pi(1,1,5)", "--workspace", office_path)
    assert v.returncode == 2 and "FAIL" in v.stdout


def test_cli_input_error_exit_code(tmp_path, office_path):
    r = run_cli("plan", "--workspace", office_path, "--formula", "pi(1,1)",
                "--out", str(tmp_path))
    assert r.returncode == 3


def test_cli_exhausted_exit_code(tmp_path, office_path):
    # requires four type-1 robots in one two-cell region: clause dies in
    # pre-processing, leaving nothing to plan
    r = run_cli("plan", "--workspace", office_path,
                "--formula", "G F pi(4,1,2)", "--out", str(tmp_path))
    assert r.returncode == 2


def test_cli_oracle(tmp_path):
    w = Workspace(3, 1, set(), {1: {(1, 0)}}, {(1, 1): (0, 0)})
    from fleetplan.workspace import save_workspace
    p = tmp_path / "w.json"
    save_workspace(w, p)
    r = run_cli("oracle", "--formula", "F pi(1,1,1)", "--workspace", str(p))
    assert r.returncode == 0
    assert "optimal cost: 1" in r.stdout


def test_cli_formula_from_file(tmp_path, office_path):
    f = tmp_path / "task.ltl"
    f.write_text(PHI2, encoding="utf-8")
    r = run_cli("plan", "--workspace", office_path, "--formula", f"@{f}",
                "--out", str(tmp_path / "o"))
    assert r.returncode == 0
