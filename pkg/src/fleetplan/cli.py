"""Command-line interface: plan, verify, and oracle subcommands.

Exit codes: 0 a feasible plan (or successful verification), 2 every
alternative exhausted (or verification failed / no optimum found), 3 bad
input.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

from .ltl import FormulaError, parse_formula, validate
from .oracle import LassoWord, accepts, brute_force_optimal, trace_of
from .pipeline import PlanRequest, plan, result_trace
from .solver import SolverConfig
from .workspace import WorkspaceError, load_workspace


def _formula_arg(text: str):
    if text.startswith("@"):
        text = Path(text[1:]).read_text(encoding="utf-8")
    return parse_formula(text)


def _render_frames(paths, w) -> str:
    frames = []
    horizon = len(next(iter(paths.values())))
    for t in range(horizon):
        grid = [["." for _ in range(w.width)] for _ in range(w.height)]
        for (x, y) in w.obstacles:
            grid[y][x] = "#"
        for k, cells in w.regions.items():
            for (x, y) in cells:
                grid[y][x] = chr(ord("a") + (k % 26))
        for (r, j), p in sorted(paths.items()):
            x, y = p[t]
            grid[y][x] = str(r % 10)
        rows = ["".join(row) for row in reversed(grid)]
        frames.append(f"t={t}\n" + "\n".join(rows))
    return "\n\n".join(frames) + "\n"


def _cmd_plan(args) -> int:
    try:
        w = load_workspace(args.workspace)
        formula = _formula_arg(args.formula)
        rep = validate(formula, w.fleet())
        if not rep.valid:
            print("invalid formula:", "; ".join(rep.violations), file=sys.stderr)
            return 3
    except (FormulaError, WorkspaceError, OSError, ValueError, KeyError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 3

    cfg = SolverConfig(
        backend=args.solver,
        m_max=args.mmax,
        alpha=args.alpha,
        beta=args.beta,
        node_limit=args.node_limit,
        time_limit=args.time_limit,
        seed=args.seed,
    )
    req = PlanRequest(
        w,
        formula=formula,
        solutions=args.solutions,
        execution=args.execution,
        sync="sim" if args.sync == "sim" else "seq",
        collision=args.collision == "on",
        suffix_mode=args.suffix,
        cfg=cfg,
        seed=args.seed,
    )
    t0 = time.time()
    outcome = plan(req)
    elapsed = time.time() - t0

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    stats_rows = []
    for n, res in enumerate(outcome.results):
        stats_rows.append({
            "solution": n,
            "pair": f"{res.pair[0]}->{res.pair[1]}",
            "poset": res.poset_index,
            "cost": res.cost,
            "cost_prefix": res.cost_prefix,
            "cost_suffix": res.cost_suffix,
        })
    with open(out_dir / "stats.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=[
            "solution", "pair", "poset", "cost", "cost_prefix", "cost_suffix"])
        writer.writeheader()
        writer.writerows(stats_rows)

    if not outcome.results:
        print(f"exhausted ({outcome.status}): {outcome.detail} [{elapsed:.1f}s]")
        return 2

    best = outcome.best
    doc = {
        "formula": args.formula,
        "status": outcome.status,
        "pair": list(best.pair),
        "cost": best.cost,
        "cost_prefix": best.cost_prefix,
        "cost_suffix": best.cost_suffix,
        "elapsed_sec": round(elapsed, 3),
        "prefix_len": best.lasso_split(),
        "prefix": {f"{r},{j}": [list(c) for c in p]
                   for (r, j), p in sorted(best.prefix_paths.items())},
        "suffix": {f"{r},{j}": [list(c) for c in p]
                   for (r, j), p in sorted(best.suffix_paths.items())},
        "high_level": best.prefix_plan.to_dict(),
    }
    if best.suffix_plan is not None:
        doc["high_level_suffix"] = best.suffix_plan.to_dict()
    with open(out_dir / "plan.json", "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
    if args.frames:
        with open(out_dir / "frames.txt", "w", encoding="utf-8") as fh:
            fh.write(_render_frames(best.all_paths(), w))
    print(f"feasible: cost {best.cost} (prefix {best.cost_prefix}, "
          f"suffix {best.cost_suffix}) in {elapsed:.1f}s; "
          f"{len(outcome.results)} solution(s) -> {out_dir / 'plan.json'}")
    return 0


def _cmd_verify(args) -> int:
    try:
        w = load_workspace(args.workspace)
        formula = _formula_arg(args.formula)
        with open(args.plan, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (FormulaError, WorkspaceError, OSError, ValueError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 3
    paths = {}
    for key, p in doc["prefix"].items():
        r, j = map(int, key.split(","))
        suffix = doc["suffix"].get(key, [])
        paths[(r, j)] = [tuple(c) for c in p] + [tuple(c) for c in suffix[1:-1]]
    word = trace_of(paths, w, split=doc["prefix_len"])
    ok = accepts(formula, word, w.fleet())
    print("PASS" if ok else "FAIL")
    return 0 if ok else 2


def _cmd_oracle(args) -> int:
    try:
        w = load_workspace(args.workspace)
        formula = _formula_arg(args.formula)
    except (FormulaError, WorkspaceError, OSError, ValueError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 3
    res = brute_force_optimal(formula, w, bound=args.bound)
    if res is None:
        print("no optimum found within bound")
        return 2
    print(f"optimal cost: {res.cost} (states explored: {res.states_explored})")
    return 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="fleetplan",
                                 description="LTL task allocation and path planning")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="synthesize a plan")
    p.add_argument("--workspace", required=True)
    p.add_argument("--formula", required=True, help="formula text or @file")
    p.add_argument("--solutions", type=int, default=1)
    p.add_argument("--execution", choices=["full", "partial"], default="full")
    p.add_argument("--sync", choices=["seq", "sim"], default="seq")
    p.add_argument("--collision", choices=["on", "off"], default="on")
    p.add_argument("--suffix", choices=["two_step", "one_step"], default="two_step")
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--beta", type=float, default=0.5)
    p.add_argument("--mmax", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--solver", choices=["builtin", "external"], default="builtin")
    p.add_argument("--node-limit", type=int, default=500_000)
    p.add_argument("--time-limit", type=float, default=None)
    p.add_argument("--out", default="out")
    p.add_argument("--frames", action="store_true", help="write an ASCII animation")
    p.set_defaults(func=_cmd_plan)

    v = sub.add_parser("verify", help="check a plan file against a formula")
    v.add_argument("--plan", required=True)
    v.add_argument("--formula", required=True)
    v.add_argument("--workspace", required=True)
    v.set_defaults(func=_cmd_verify)

    o = sub.add_parser("oracle", help="brute-force optimal cost (small instances)")
    o.add_argument("--formula", required=True)
    o.add_argument("--workspace", required=True)
    o.add_argument("--bound", type=int, default=2_000_000)
    o.set_defaults(func=_cmd_oracle)

    args = ap.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
