"""Occupancy-grid mapping, grid search, path compilation and exploration.

Cells are squares of ``cell_size`` centred on ``origin + (i, j) * cell_size``;
with the default 0.25 m cells and an agent starting at the origin, one
MoveAhead moves exactly one cell.  Cells never written read as traversable.
"""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .geometry import angle_diff, bearing
from .world import MOVE_AHEAD, ROTATE_LEFT, ROTATE_RIGHT, AgentPose, Op

Cell = tuple[int, int]

TRAVERSABLE = "."
OCCUPIED = "#"

_NEIGHBOURS = ((1, 0), (-1, 0), (0, 1), (0, -1))
_HEADING_OF_STEP = {(1, 0): 0, (0, 1): 90, (-1, 0): 180, (0, -1): 270}


@dataclass
class OccupancyGrid:
    cell_size: float = 0.25
    origin: tuple[float, float] = (0.0, 0.0)
    occupied: set[Cell] = field(default_factory=set)
    scanned: set[Cell] = field(default_factory=set)
    # a ray clears a cell only when it passes this close to the cell centre (per axis)
    core: float = 0.05

    def cell_of(self, x: float, y: float) -> Cell:
        return (int(round((x - self.origin[0]) / self.cell_size)),
                int(round((y - self.origin[1]) / self.cell_size)))

    def center(self, cell: Cell) -> tuple[float, float]:
        return (self.origin[0] + cell[0] * self.cell_size,
                self.origin[1] + cell[1] * self.cell_size)

    def is_traversable(self, cell: Cell) -> bool:
        return cell not in self.occupied

    def __getitem__(self, cell: Cell) -> str:
        return OCCUPIED if cell in self.occupied else TRAVERSABLE

    def copy(self) -> "OccupancyGrid":
        return OccupancyGrid(self.cell_size, self.origin, set(self.occupied), set(self.scanned),
                             self.core)

    def extent(self) -> float:
        """Largest distance from the origin to any scanned cell centre."""
        if not self.scanned:
            return 0.0
        a = np.array(list(self.scanned), dtype=float)
        return float(np.sqrt((a ** 2).sum(axis=1)).max() * self.cell_size)

    def bounds(self, extra: Iterable[Cell] = ()) -> tuple[int, int, int, int]:
        cells = list(self.scanned) + list(self.occupied) + list(extra)
        if not cells:
            return (0, 0, 0, 0)
        a = np.array(cells)
        return (int(a[:, 0].min()), int(a[:, 1].min()), int(a[:, 0].max()), int(a[:, 1].max()))

    def path_blocked(self, cells: Iterable[Cell]) -> bool:
        return any(c in self.occupied for c in cells)

    # rendering ------------------------------------------------------------
    def to_text(self, agent: Cell | None = None) -> str:
        extra = [agent] if agent is not None else []
        i0, j0, i1, j1 = self.bounds(extra)
        rows = []
        for j in range(j1, j0 - 1, -1):
            row = []
            for i in range(i0, i1 + 1):
                if (i, j) == agent:
                    row.append("A")
                elif (i, j) in self.occupied:
                    row.append(OCCUPIED)
                elif (i, j) in self.scanned:
                    row.append(TRAVERSABLE)
                else:
                    row.append(" ")
            rows.append("".join(row).rstrip())
        return "\n".join(rows) + "\n"

    def to_pgm(self, agent: Cell | None = None, scale: int = 4) -> bytes:
        """Binary PGM: free white, occupied black, unscanned grey, agent dark grey."""
        extra = [agent] if agent is not None else []
        i0, j0, i1, j1 = self.bounds(extra)
        w, h = i1 - i0 + 1, j1 - j0 + 1
        img = np.full((h, w), 128, dtype=np.uint8)
        for (i, j) in self.scanned:
            img[j1 - j, i - i0] = 255
        for (i, j) in self.occupied:
            img[j1 - j, i - i0] = 0
        if agent is not None:
            img[j1 - agent[1], agent[0] - i0] = 64
        img = np.kron(img, np.ones((scale, scale), dtype=np.uint8))
        header = f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode()
        return header + img.tobytes()

    @classmethod
    def from_text(cls, text: str, cell_size: float = 0.25) -> "OccupancyGrid":
        """Inverse of ``to_text`` up to translation: the bottom-left character is cell (0, 0)."""
        lines = text.rstrip("\n").split("\n")
        g = cls(cell_size)
        for r, line in enumerate(lines):
            j = len(lines) - 1 - r
            for i, ch in enumerate(line):
                if ch in ".A":
                    g.scanned.add((i, j))
                elif ch == "#":
                    g.scanned.add((i, j))
                    g.occupied.add((i, j))
        return g


def update_from_depth(grid: OccupancyGrid, pose: AgentPose, depth_scan: Sequence[float],
                      fov: float = 90.0, max_range: float = 5.0,
                      sample_step: float = 0.02) -> OccupancyGrid:
    """Clear the cells each ray crosses and mark the cell of each hit point occupied."""
    n = len(depth_scan)
    if n == 0:
        return grid
    offsets = np.linspace(-fov / 2, fov / 2, n) if n > 1 else np.zeros(1)
    ang = np.radians(pose.heading + offsets)
    d = np.asarray(depth_scan, dtype=float)
    dirs = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    own = grid.cell_of(pose.x, pose.y)
    cs = grid.cell_size
    # cleared cells: sample each ray strictly before its hit
    t = np.arange(0.0, float(d.max()), sample_step)
    mask = t[None, :] < d[:, None] - 1e-9
    px = (pose.x - grid.origin[0]) + dirs[:, 0:1] * t[None, :]
    py = (pose.y - grid.origin[1]) + dirs[:, 1:2] * t[None, :]
    ci = np.rint(px / cs)
    cj = np.rint(py / cs)
    core = (np.abs(px - ci * cs) <= grid.core) & (np.abs(py - cj * cs) <= grid.core)
    touched = set(zip(ci[mask].astype(int).tolist(), cj[mask].astype(int).tolist()))
    cleared = set(zip(ci[mask & core].astype(int).tolist(), cj[mask & core].astype(int).tolist()))
    grid.scanned |= touched
    grid.occupied -= cleared
    for k in range(n):
        if d[k] < max_range - 1e-9:
            hx = pose.x + dirs[k, 0] * d[k]
            hy = pose.y + dirs[k, 1] * d[k]
            c = grid.cell_of(hx, hy)
            if c != own:
                grid.occupied.add(c)
                grid.scanned.add(c)
    return grid


def mark_collision(grid: OccupancyGrid, pose: AgentPose) -> OccupancyGrid:
    x, y = pose.ahead(grid.cell_size)
    c = grid.cell_of(x, y)
    if c != grid.cell_of(pose.x, pose.y):
        grid.occupied.add(c)
        grid.scanned.add(c)
    return grid


def _window(grid: OccupancyGrid, cells: Iterable[Cell], margin: int) -> tuple[int, int, int, int]:
    i0, j0, i1, j1 = grid.bounds(cells)
    return (i0 - margin, j0 - margin, i1 + margin, j1 + margin)


def _inside(c: Cell, win) -> bool:
    return win[0] <= c[0] <= win[2] and win[1] <= c[1] <= win[3]


def astar(grid: OccupancyGrid, start: Cell, goal: Cell, margin: int = 3,
          blocked: frozenset[Cell] | set[Cell] = frozenset()) -> list[Cell] | None:
    """Shortest 4-connected path of traversable cells, start and goal included.

    The search is confined to the known part of the map plus ``margin``
    cells; ``blocked`` cells are avoided in addition to occupied ones.
    """
    if goal in grid.occupied or goal in blocked:
        return None
    if start == goal:
        return [start]
    win = _window(grid, (start, goal), margin)
    gi, gj = goal
    g = {start: 0}
    parent: dict[Cell, Cell] = {}
    heap = [(abs(start[0] - gi) + abs(start[1] - gj), start[0], start[1])]
    closed = set()
    while heap:
        _, i, j = heapq.heappop(heap)
        c = (i, j)
        if c in closed:
            continue
        if c == goal:
            path = [c]
            while c in parent:
                c = parent[c]
                path.append(c)
            return path[::-1]
        closed.add(c)
        for di, dj in _NEIGHBOURS:
            n = (i + di, j + dj)
            if n in closed or n in grid.occupied or n in blocked or not _inside(n, win):
                continue
            ng = g[c] + 1
            if ng < g.get(n, math.inf):
                g[n] = ng
                parent[n] = c
                heapq.heappush(heap, (ng + abs(n[0] - gi) + abs(n[1] - gj), n[0], n[1]))
    return None


def bfs(grid: OccupancyGrid, start: Cell, window: tuple[int, int, int, int],
        blocked: frozenset[Cell] | set[Cell] = frozenset()) -> tuple[dict[Cell, int], dict[Cell, Cell]]:
    """Breadth-first distances and parents from ``start`` inside ``window``."""
    dist = {start: 0}
    parent: dict[Cell, Cell] = {}
    q = deque([start])
    while q:
        c = q.popleft()
        for di, dj in _NEIGHBOURS:
            n = (c[0] + di, c[1] + dj)
            if n in dist or n in grid.occupied or n in blocked or not _inside(n, window):
                continue
            dist[n] = dist[c] + 1
            parent[n] = c
            q.append(n)
    return dist, parent


def trace_back(parent: dict[Cell, Cell], goal: Cell) -> list[Cell]:
    path = [goal]
    while path[-1] in parent:
        path.append(parent[path[-1]])
    return path[::-1]


def rotation_ops(heading: int, target: float, rotation_step: int = 30) -> list[Op]:
    """Fewest 30-degree turns bringing ``heading`` to ``target``; left wins ties."""
    diff = angle_diff(target, heading)
    left = int(round((diff % 360) / rotation_step))
    right = int(round(((-diff) % 360) / rotation_step))
    if left <= right:
        return [ROTATE_LEFT] * left
    return [ROTATE_RIGHT] * right


def facing_ops(heading: int, target_bearing: float, tolerance: float = 15.0,
               rotation_step: int = 30) -> list[Op]:
    """Turns until ``target_bearing`` lies within ``tolerance`` of the heading."""
    best = None
    for k in range(-(180 // rotation_step), 180 // rotation_step + 1):
        h = (heading + k * rotation_step) % 360
        if abs(angle_diff(target_bearing, h)) <= tolerance + 1e-9:
            if best is None or abs(k) < abs(best) or (abs(k) == abs(best) and k > 0):
                best = k
    if best is None:
        return rotation_ops(heading, target_bearing, rotation_step)
    return [ROTATE_LEFT] * best if best >= 0 else [ROTATE_RIGHT] * (-best)


def compile_path(path: Sequence[Cell], pose: AgentPose, grid: OccupancyGrid | None = None,
                 rotation_step: int = 30) -> list[Op]:
    """Rotations plus one MoveAhead per edge of a 4-connected cell path."""
    grid = grid or OccupancyGrid()
    if not path or tuple(path[0]) != grid.cell_of(pose.x, pose.y):
        raise ValueError("path must start at the agent's cell")
    ops: list[Op] = []
    heading = pose.heading
    for a, b in zip(path, path[1:]):
        delta = (b[0] - a[0], b[1] - a[1])
        try:
            target = _HEADING_OF_STEP[delta]
        except KeyError:
            raise ValueError(f"cells {a} and {b} are not 4-adjacent") from None
        turns = rotation_ops(heading, target, rotation_step)
        ops += turns
        heading = target
        ops.append(MOVE_AHEAD)
    return ops


def heading_after(ops: Iterable[Op], heading: int, rotation_step: int = 30) -> int:
    for op in ops:
        if op.name == "RotateLeft":
            heading = (heading + rotation_step) % 360
        elif op.name == "RotateRight":
            heading = (heading - rotation_step) % 360
    return heading


def frontier_cells(grid: OccupancyGrid) -> set[Cell]:
    out = set()
    for c in grid.scanned:
        if c in grid.occupied:
            continue
        for di, dj in _NEIGHBOURS:
            if (c[0] + di, c[1] + dj) not in grid.scanned:
                out.add(c)
                break
    return out


def explore_target(grid: OccupancyGrid, pose: AgentPose, rng: np.random.Generator,
                   min_radius: float = 5.0, frontier_bias: float = 0.3, samples: int = 100,
                   blocked: frozenset[Cell] | set[Cell] = frozenset()
                   ) -> tuple[Cell | None, list[Op], list[Cell]]:
    """Random believed-free target and the ops reaching it.

    Returns ``(target, ops, path)``; when no sampled target is reachable the
    target is ``None`` and the ops are a single in-place RotateLeft.
    """
    here = grid.cell_of(pose.x, pose.y)
    radius = max(min_radius, grid.extent() + 2.0)
    rc = int(math.floor(radius / grid.cell_size))
    oi, oj = grid.cell_of(*grid.origin)
    ii, jj = np.meshgrid(np.arange(oi - rc, oi + rc + 1), np.arange(oj - rc, oj + rc + 1),
                         indexing="ij")
    inside = (ii - oi) ** 2 + (jj - oj) ** 2 <= rc * rc
    candidates = [c for c in zip(ii[inside].tolist(), jj[inside].tolist())
                  if c not in grid.occupied and c not in blocked and c != here]
    if not candidates:
        return None, [ROTATE_LEFT], [here]
    cand_set = set(candidates)
    frontier = sorted(frontier_cells(grid) & cand_set)
    win = (oi - rc - 1, oj - rc - 1, oi + rc + 1, oj + rc + 1)
    win = (min(win[0], here[0]), min(win[1], here[1]), max(win[2], here[0]), max(win[3], here[1]))
    dist, parent = bfs(grid, here, win, blocked)
    for _ in range(samples):
        pool = frontier if frontier and rng.random() < frontier_bias else candidates
        target = pool[int(rng.integers(len(pool)))]
        if target in dist:
            path = astar(grid, here, target, margin=rc, blocked=blocked) or trace_back(parent, target)
            return target, compile_path(path, pose, grid), path
    return None, [ROTATE_LEFT], [here]


def look_cells(grid: OccupancyGrid, target: tuple[float, float], pose: AgentPose,
               max_distance: float, min_distance: float = 0.25,
               blocked: frozenset[Cell] | set[Cell] = frozenset(), margin: int = 3
               ) -> tuple[list[Cell] | None, dict[Cell, int]]:
    """Nearest-by-path traversable cell within ``max_distance`` of ``target``.

    Cells with grid line of sight to the target are preferred over those
    without.  Returns the path (or ``None``) and the BFS distance map used.
    """
    here = grid.cell_of(pose.x, pose.y)
    tcell = grid.cell_of(*target)
    reach = int(math.ceil(max_distance / grid.cell_size))
    win = _window(grid, (here, (tcell[0] - reach, tcell[1] - reach),
                         (tcell[0] + reach, tcell[1] + reach)), margin)
    dist, parent = bfs(grid, here, win, blocked)
    good, fallback = [], []
    for i in range(tcell[0] - reach, tcell[0] + reach + 1):
        for j in range(tcell[1] - reach, tcell[1] + reach + 1):
            c = (i, j)
            if c not in dist:
                continue
            dd = math.dist(grid.center(c), target)
            if not (min_distance - 1e-9 <= dd < max_distance):
                continue
            key = (dist[c], dd, c)
            (good if grid_line_of_sight(grid, grid.center(c), target) else fallback).append(key)
    pool = good or fallback
    if not pool:
        return None, dist
    return trace_back(parent, min(pool)[2]), dist


def grid_line_of_sight(grid: OccupancyGrid, src: tuple[float, float],
                       dst: tuple[float, float], ignore_radius: float = 0.75) -> bool:
    """No occupied cell on the segment, ignoring cells near the destination."""
    d = math.dist(src, dst)
    n = max(2, int(d / (grid.cell_size / 4)) + 1)
    seen = set()
    for k in range(n + 1):
        t = k / n
        x = src[0] + (dst[0] - src[0]) * t
        y = src[1] + (dst[1] - src[1]) * t
        if math.dist((x, y), dst) <= ignore_radius:
            break
        c = grid.cell_of(x, y)
        if c in seen:
            continue
        seen.add(c)
        if c in grid.occupied:
            return False
    return True


def inflate(grid: OccupancyGrid, keep: Iterable[Cell] = ()) -> set[Cell]:
    """Cells 8-adjacent to occupied cells, minus ``keep``."""
    out = set()
    for (i, j) in grid.occupied:
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                c = (i + di, j + dj)
                if c not in grid.occupied:
                    out.add(c)
    return out - set(keep)


def target_bearing(pose: AgentPose, target: tuple[float, float]) -> float:
    return bearing(target[0] - pose.x, target[1] - pose.y)
