"""Compilers from ground symbolic actions to low-level operation sequences."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .belief import BeliefState
from .navigation import (facing_ops, heading_after, compile_path, inflate, look_cells,
                         target_bearing)
from .pddl import GroundAction
from .world import ROTATE_LEFT, ROTATE_RIGHT, AgentPose, Op, close_at, open_at, pick_up, put_at


@dataclass
class Compiled:
    ops: list[Op]
    path: list[tuple[int, int]] = field(default_factory=list)
    target: tuple[float, float] | None = None


@dataclass
class CompileContext:
    belief: BeliefState
    reach: float = 1.25
    manipulation_distance: float = 1.5
    rotation_step: int = 30
    facing_tolerance: float = 15.0
    failed_points: list[tuple[float, float]] = field(default_factory=list)

    @property
    def pose(self) -> AgentPose:
        return self.belief.features.pose

    def position(self, constant: str) -> tuple[float, float]:
        return self.belief.position(constant)


Compiler = Callable[[GroundAction, CompileContext], "Compiled | list[Op]"]


def go_close_to(action: GroundAction, ctx: CompileContext) -> Compiled:
    """Path to the nearest cell within reach of the target, then turn to face it.

    While carrying something the agent keeps one cell of clearance from
    known obstacles, since its encumbrance no longer fits next to them.
    An empty op list means no such cell is reachable.
    """
    target = ctx.position(action.binding[0])
    grid = ctx.belief.features.occupancy
    pose = ctx.pose
    here = grid.cell_of(pose.x, pose.y)
    blocked = inflate(grid, keep=[here]) if ctx.belief.features.holding else set()
    path, _ = look_cells(grid, target, pose, ctx.reach, blocked=blocked)
    if path is None and blocked:
        path, _ = look_cells(grid, target, pose, ctx.reach)
    if path is None:
        return Compiled([], [], target)
    ops = compile_path(path, pose, grid, ctx.rotation_step)
    end = grid.center(path[-1])
    heading = heading_after(ops, pose.heading, ctx.rotation_step)
    end_pose = AgentPose(end[0], end[1], heading)
    turn = facing_ops(heading, target_bearing(end_pose, target), ctx.facing_tolerance,
                      ctx.rotation_step)
    ops += turn
    if not ops:
        # in place and facing, yet the effect did not show: try another spot
        alt, _ = look_cells(grid, target, pose, ctx.reach, blocked=blocked | {here})
        if alt is not None:
            ops = compile_path(alt, pose, grid, ctx.rotation_step)
            heading = heading_after(ops, pose.heading, ctx.rotation_step)
            end = grid.center(alt[-1])
            ops += facing_ops(heading, target_bearing(AgentPose(end[0], end[1], heading), target),
                              ctx.facing_tolerance, ctx.rotation_step)
            path = alt
        if not ops:
            ops = [ROTATE_LEFT, ROTATE_RIGHT]
    return Compiled(ops, path, target)


def pick_up_action(action: GroundAction, ctx: CompileContext) -> Compiled:
    x, y = ctx.position(action.binding[0])
    return Compiled([pick_up(x, y)], [], (x, y))


def open_action(action: GroundAction, ctx: CompileContext) -> Compiled:
    x, y = ctx.position(action.binding[0])
    return Compiled([open_at(x, y)], [], (x, y))


def close_action(action: GroundAction, ctx: CompileContext) -> Compiled:
    x, y = ctx.position(action.binding[0])
    return Compiled([close_at(x, y)], [], (x, y))


def put_on_point(ctx: CompileContext, held: str, surface: str,
                 pitch: float = 0.1) -> tuple[float, float] | None:
    """Believed-free point on the surface estimate, nearest to the agent first."""
    recs = ctx.belief.records
    d = recs[surface]
    hw, hh = recs[held].est_size if held in recs else (0.1, 0.1)
    cx, cy = d.est_position
    w, h = d.est_size
    margin = 0.02
    xs = np.arange(cx - w / 2 + hw / 2 + margin, cx + w / 2 - hw / 2 - margin + 1e-9, pitch)
    ys = np.arange(cy - h / 2 + hh / 2 + margin, cy + h / 2 - hh / 2 - margin + 1e-9, pitch)
    if len(xs) == 0:
        xs = np.array([cx])
    if len(ys) == 0:
        ys = np.array([cy])
    others = []
    for c, r in recs.items():
        if c in (held, surface) or "surface" in ctx.belief.capabilities(r.object_type):
            continue
        ox, oy = r.est_position
        if abs(ox - cx) <= w / 2 + 0.1 and abs(oy - cy) <= h / 2 + 0.1:
            others.append((ox, oy, r.est_size[0] / 2, r.est_size[1] / 2))
    pose = ctx.pose
    best = None
    for x in xs:
        for y in ys:
            x, y = float(round(x, 6)), float(round(y, 6))
            if math.dist((x, y), pose.position) >= ctx.manipulation_distance - 0.1:
                continue
            if any(math.dist((x, y), p) < 0.05 for p in ctx.failed_points):
                continue
            if any(abs(x - ox) < hw / 2 + rw + 0.03 and abs(y - oy) < hh / 2 + rh + 0.03
                   for ox, oy, rw, rh in others):
                continue
            key = (math.dist((x, y), pose.position), x, y)
            if best is None or key < best:
                best = key
    return None if best is None else (best[1], best[2])


def put_on_action(action: GroundAction, ctx: CompileContext) -> Compiled:
    point = put_on_point(ctx, action.binding[0], action.binding[1])
    if point is None:
        return Compiled([], [], None)
    return Compiled([put_at(*point)], [], point)


DEFAULT_COMPILERS: dict[str, Compiler] = {
    "gocloseto": go_close_to,
    "pickup": pick_up_action,
    "puton": put_on_action,
    "openobj": open_action,
    "closeobj": close_action,
}


def as_compiled(result) -> Compiled:
    if isinstance(result, Compiled):
        return result
    return Compiled(list(result))
