"""Grid workspace: obstacles, labeled regions, typed robot fleet, metrics.

Cells are (x, y) pairs on a width-by-height grid with 4-neighbor adjacency
plus an idle self-transition.  Regions are disjoint, connected cell sets that
avoid obstacles; every region must touch the label-free part of the grid so
robots can travel between regions without crossing other regions.

Workspace JSON::

    {"width": W, "height": H,
     "obstacles": [[x, y], ...],
     "regions": {"1": [[x, y], ...], ...},
     "robots": [{"r": 1, "j": 1, "cell": [x, y]}, ...],
     "cell_cost": {"x,y": c, ...}}          # optional per-cell entry cost
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field

from .ltl import FleetSpec

Cell = tuple[int, int]


class WorkspaceError(ValueError):
    pass


@dataclass
class Workspace:
    width: int
    height: int
    obstacles: set[Cell]
    regions: dict[int, set[Cell]]                 # region id -> cells
    robots: dict[tuple[int, int], Cell]           # (r, j) -> start cell
    cell_cost: dict[Cell, int] = field(default_factory=dict)

    def __post_init__(self):
        self._validate()
        self._cell_region = {}
        for k, cells in self.regions.items():
            for c in cells:
                self._cell_region[c] = k

    # -- basic queries ------------------------------------------------------

    def in_bounds(self, c: Cell) -> bool:
        return 0 <= c[0] < self.width and 0 <= c[1] < self.height

    def free(self, c: Cell) -> bool:
        return self.in_bounds(c) and c not in self.obstacles

    def free_cells(self) -> list[Cell]:
        return [
            (x, y)
            for x in range(self.width)
            for y in range(self.height)
            if (x, y) not in self.obstacles
        ]

    def region_of(self, c: Cell) -> int | None:
        return self._cell_region.get(c)

    def neighbors(self, c: Cell) -> list[Cell]:
        x, y = c
        out = []
        for nxt in ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)):
            if self.free(nxt):
                out.append(nxt)
        return out

    def move_cost(self, src: Cell, dst: Cell) -> int:
        """Cost of one move; idling is free, entering dst costs its cell cost."""
        if src == dst:
            return 0
        return self.cell_cost.get(dst, 1)

    def fleet(self) -> FleetSpec:
        counts: dict[int, int] = {}
        for (_, j) in self.robots:
            counts[j] = counts.get(j, 0) + 1
        return FleetSpec(counts, frozenset(self.regions))

    def counts_at(self, config: dict[tuple[int, int], Cell]) -> dict[tuple[int, int], int]:
        """(type, region) -> number of robots, for a robot -> cell configuration."""
        counts: dict[tuple[int, int], int] = {}
        for (r, j), cell in config.items():
            k = self.region_of(cell)
            if k is not None:
                counts[(j, k)] = counts.get((j, k), 0) + 1
        return counts

    # -- validation ---------------------------------------------------------

    def _validate(self):
        seen: dict[Cell, int] = {}
        for k, cells in self.regions.items():
            for c in cells:
                if not self.in_bounds(c):
                    raise WorkspaceError(f"region {k} cell {c} out of bounds")
                if c in self.obstacles:
                    raise WorkspaceError(f"region {k} overlaps obstacle at {c}")
                if c in seen:
                    raise WorkspaceError(f"regions {seen[c]} and {k} overlap at {c}")
                seen[c] = k
        ids = list(self.robots)
        if len(ids) != len(set(ids)):
            raise WorkspaceError("duplicate robot id")
        for rid, c in self.robots.items():
            if not self.free(c):
                raise WorkspaceError(f"robot {rid} starts on an obstacle or out of bounds at {c}")


def check_assumption_env(w: Workspace) -> list[str]:
    """Structural checks on regions; returns a list of violations (empty = pass).

    Checks per-region connectivity and that the label-free subgraph reaches
    every region's boundary and every label-free cell.
    """
    violations = []
    for k, cells in sorted(w.regions.items()):
        if cells and not _connected(set(cells), lambda c: [n for n in w.neighbors(c) if n in cells]):
            violations.append(f"region {k} is not a connected cell set")

    label_free = {c for c in w.free_cells() if w.region_of(c) is None}
    if label_free:
        comp = _component(next(iter(sorted(label_free))), label_free, w)
        if comp != label_free:
            violations.append("label-free cells are not connected")
        for k, cells in sorted(w.regions.items()):
            if not any(n in label_free for c in cells for n in w.neighbors(c)):
                violations.append(f"region {k} has no label-free neighbor cell")
    elif len(w.regions) > 1:
        violations.append("no label-free cells but multiple regions declared")
    return violations


def _connected(cells: set[Cell], nbrs) -> bool:
    start = next(iter(sorted(cells)))
    seen = {start}
    stack = [start]
    while stack:
        for n in nbrs(stack.pop()):
            if n not in seen:
                seen.add(n)
                stack.append(n)
    return seen == cells


def _component(start: Cell, allowed: set[Cell], w: Workspace) -> set[Cell]:
    seen = {start}
    stack = [start]
    while stack:
        for n in w.neighbors(stack.pop()):
            if n in allowed and n not in seen:
                seen.add(n)
                stack.append(n)
    return seen


# ---------------------------------------------------------------------------
# Shortest travel time / lowest travel cost


class Metric:
    """Shortest travel time (steps) and lowest travel cost between places.

    A place is either a cell or a region id; region-to-x distances take the
    minimum over the region's cells.  Absent entries mean unreachable.
    """

    def __init__(self, w: Workspace):
        self.w = w
        self._time: dict[object, dict[Cell, int]] = {}
        self._cost: dict[object, dict[Cell, int]] = {}

    def _source_cells(self, place) -> set[Cell]:
        if isinstance(place, tuple):
            return {place}
        return set(self.w.regions[place])

    def _ensure(self, place):
        if place in self._time:
            return
        sources = self._source_cells(place)
        self._time[place] = _multisource_bfs(self.w, sources)
        if self.w.cell_cost:
            self._cost[place] = _multisource_dijkstra(self.w, sources)
        else:
            self._cost[place] = self._time[place]

    def t_star(self, src, dst) -> int | None:
        """Shortest travel time in steps from src to dst (None if unreachable)."""
        self._ensure(src)
        table = self._time[src]
        best = None
        for c in self._source_cells(dst):
            v = table.get(c)
            if v is not None and (best is None or v < best):
                best = v
        return best

    def d(self, src, dst) -> int | None:
        """Lowest travel cost from src to dst (None if unreachable)."""
        self._ensure(src)
        table = self._cost[src]
        best = None
        for c in self._source_cells(dst):
            v = table.get(c)
            if v is not None and (best is None or v < best):
                best = v
        return best


def _multisource_bfs(w: Workspace, sources: set[Cell]) -> dict[Cell, int]:
    dist = {c: 0 for c in sources if w.free(c)}
    frontier = list(dist)
    while frontier:
        nxt = []
        for c in frontier:
            for n in w.neighbors(c):
                if n not in dist:
                    dist[n] = dist[c] + 1
                    nxt.append(n)
        frontier = nxt
    return dist


def _multisource_dijkstra(w: Workspace, sources: set[Cell]) -> dict[Cell, int]:
    dist = {c: 0 for c in sources if w.free(c)}
    heap = [(0, c) for c in dist]
    heapq.heapify(heap)
    while heap:
        dc, c = heapq.heappop(heap)
        if dc > dist.get(c, 1 << 60):
            continue
        for n in w.neighbors(c):
            nd = dc + w.move_cost(c, n)
            if nd < dist.get(n, 1 << 60):
                dist[n] = nd
                heapq.heappush(heap, (nd, n))
    return dist


def compute_metric(w: Workspace) -> Metric:
    """Metric with region and robot-start sources precomputed."""
    m = Metric(w)
    for k in w.regions:
        m._ensure(k)
    for cell in w.robots.values():
        m._ensure(cell)
    return m


# ---------------------------------------------------------------------------
# Serialization


def workspace_from_dict(data: dict) -> Workspace:
    regions = {
        int(k): {tuple(c) for c in cells} for k, cells in data.get("regions", {}).items()
    }
    robots = {
        (int(rb["r"]), int(rb["j"])): tuple(rb["cell"]) for rb in data.get("robots", [])
    }
    cost = {}
    for key, c in data.get("cell_cost", {}).items():
        x, _, y = key.partition(",")
        cost[(int(x), int(y))] = int(c)
    return Workspace(
        width=int(data["width"]),
        height=int(data["height"]),
        obstacles={tuple(c) for c in data.get("obstacles", [])},
        regions=regions,
        robots=robots,
        cell_cost=cost,
    )


def workspace_to_dict(w: Workspace) -> dict:
    data = {
        "width": w.width,
        "height": w.height,
        "obstacles": sorted(map(list, w.obstacles)),
        "regions": {str(k): sorted(map(list, cells)) for k, cells in sorted(w.regions.items())},
        "robots": [
            {"r": r, "j": j, "cell": list(cell)} for (r, j), cell in sorted(w.robots.items())
        ],
    }
    if w.cell_cost:
        data["cell_cost"] = {f"{x},{y}": c for (x, y), c in sorted(w.cell_cost.items())}
    return data


def load_workspace(path) -> Workspace:
    with open(path, encoding="utf-8") as fh:
        return workspace_from_dict(json.load(fh))


def save_workspace(w: Workspace, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(workspace_to_dict(w), fh, indent=1)
