"""Seeded generators for random workspaces and benchmark task families."""

from __future__ import annotations

import random

from .ltl import Formula, parse_formula
from .workspace import Cell, Workspace, check_assumption_env


def random_workspace(
    seed: int,
    width: int = 8,
    height: int = 8,
    regions: int = 3,
    region_size: int = 2,
    robots: dict[int, int] | None = None,
    obstacle_rate: float = 0.0,
) -> Workspace:
    """Random grid with rectangular-ish regions and robots on label-free cells.

    Retries placement until the label-free connectivity checks pass, so the
    result is always a usable workspace for the given seed.
    """
    rng = random.Random(seed)
    robots = robots or {1: 2}
    for attempt in range(200):
        obstacles: set[Cell] = set()
        if obstacle_rate > 0:
            for x in range(width):
                for y in range(height):
                    if rng.random() < obstacle_rate:
                        obstacles.add((x, y))
        cells = [(x, y) for x in range(width) for y in range(height)
                 if (x, y) not in obstacles]
        rng.shuffle(cells)
        region_map: dict[int, set[Cell]] = {}
        used: set[Cell] = set()
        ok = True
        for k in range(1, regions + 1):
            placed = None
            for c in cells:
                block = _grow_block(c, region_size, width, height, obstacles, used)
                if block is not None:
                    placed = block
                    break
            if placed is None:
                ok = False
                break
            region_map[k] = placed
            used |= placed
        if not ok:
            continue
        free_cells = [c for c in cells if c not in used]
        rng.shuffle(free_cells)
        robot_map: dict[tuple[int, int], Cell] = {}
        idx = 0
        for j in sorted(robots):
            for r in range(1, robots[j] + 1):
                if idx >= len(free_cells):
                    ok = False
                    break
                robot_map[(r, j)] = free_cells[idx]
                idx += 1
        if not ok:
            continue
        try:
            w = Workspace(width, height, obstacles, region_map, robot_map)
        except Exception:
            continue
        if not check_assumption_env(w):
            return w
    raise RuntimeError(f"could not generate a valid workspace for seed {seed}")


def _grow_block(c: Cell, size: int, width: int, height: int,
                obstacles: set[Cell], used: set[Cell]) -> set[Cell] | None:
    block = {c}
    frontier = [c]
    while len(block) < size and frontier:
        x, y = frontier.pop(0)
        for n in ((x + 1, y), (x, y + 1), (x - 1, y), (x, y - 1)):
            if (0 <= n[0] < width and 0 <= n[1] < height
                    and n not in obstacles and n not in used and n not in block):
                block.add(n)
                frontier.append(n)
                if len(block) == size:
                    break
    if len(block) < size or c in used:
        return None
    return block


def sequencing_task(seed: int, w: Workspace) -> Formula:
    """Co-safe sequencing: one bound robot visits two regions in order, and
    (when a second type exists) another type makes one visit."""
    rng = random.Random(seed)
    regions = sorted(w.regions)
    a, b = rng.sample(regions, 2)
    types = sorted({j for (_, j) in w.robots})
    text = f"F (pi(1,{types[0]},{a},1) & F pi(1,{types[0]},{b},1))"
    if len(types) > 1 and len(regions) > 2:
        c = rng.choice([k for k in regions if k not in (a, b)])
        text += f" & F pi(1,{types[1]},{c})"
    return parse_formula(text)


def recurrence_chain_task(w: Workspace, rtype: int = 1, count: int = 2,
                          hops: int = 2) -> Formula:
    """Surveillance-style recurring visit chain over the first `hops` regions."""
    regions = sorted(w.regions)[:hops]
    inner = f"pi({count},{rtype},{regions[-1]},1)"
    for k in reversed(regions[:-1]):
        inner = f"pi({count},{rtype},{k},1) & F ({inner})"
    return parse_formula(f"G F ({inner})")


def coverage_task(w: Workspace, rtype: int = 1) -> Formula:
    """Eventually visit every region at least once (one robot each)."""
    parts = [f"F pi(1,{rtype},{k})" for k in sorted(w.regions)]
    return parse_formula(" & ".join(parts))


def scalability_workspace(seed: int, width: int = 15, height: int = 15,
                          n_robots: int = 4, obstacle_rate: float = 0.10
                          ) -> Workspace:
    """Scaled-down scalability arena: 6 regions, homogeneous fleet."""
    return random_workspace(
        seed, width, height, regions=6, region_size=max(2, n_robots),
        robots={1: n_robots}, obstacle_rate=obstacle_rate)


def gather_and_split_task(n_robots: int) -> Formula:
    """All robots gather at one region infinitely often, half the team meets
    at two other regions infinitely often, and a region stays off-limits
    until two scouting visits happen at the same time."""
    half = max(1, n_robots // 2)
    return parse_formula(
        f"G F pi({n_robots},1,2) & G F pi({half},1,3) & G F pi({half},1,4)"
        f" & (! pi(1,1,4)) U (pi(1,1,5) & pi(1,1,6))"
    )
