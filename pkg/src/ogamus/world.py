"""Ground-truth 2D household simulator.

Rooms are laid out on a 0.25 m lattice.  Furniture occupies whole lattice
cells, its faces set 0.075 m inside the outer cells, so an agent disc resting
on a neighbouring cell centre keeps 0.2 m of clearance.  The agent starts on
a lattice centre facing an axis direction, and every observation is
expressed in the frame of that start pose (GPS + compass convention).
"""

from __future__ import annotations

import dataclasses
import logging
import math
from collections import deque
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Mapping

import numpy as np

from .geometry import (Rect, angle_diff, bearing, cast_rays, segment_rect_distance,
                       segments_hit_rects)

log = logging.getLogger(__name__)

LATTICE = 0.25
FACE_INSET = 0.075


class UnknownProfile(KeyError):
    pass


@dataclass(frozen=True)
class SimParams:
    step_length: float = 0.25
    rotation_step: int = 30
    agent_radius: float = 0.18
    grasp_tolerance: float = 0.15
    fov: float = 90.0
    depth_resolution: float = 5.0
    max_range: float = 5.0
    manipulation_distance: float = 1.5
    actuator_failure_rate: float = 0.0

    @property
    def n_rays(self) -> int:
        return int(round(self.fov / self.depth_resolution)) + 1

    def ray_offsets(self) -> np.ndarray:
        return -self.fov / 2 + self.depth_resolution * np.arange(self.n_rays)


@dataclass(frozen=True)
class AgentPose:
    x: float = 0.0
    y: float = 0.0
    heading: int = 0

    def __post_init__(self):
        if self.heading % 30 != 0 or not 0 <= self.heading < 360:
            raise ValueError(f"heading {self.heading} is not a multiple of 30 in [0, 360)")

    @property
    def position(self) -> tuple[float, float]:
        return (self.x, self.y)

    def ahead(self, distance: float) -> tuple[float, float]:
        h = math.radians(self.heading)
        return (self.x + distance * math.cos(h), self.y + distance * math.sin(h))


@dataclass(frozen=True)
class Op:
    """One low-level operation; manipulation ops carry start-frame coordinates."""

    name: str
    x: float | None = None
    y: float | None = None

    def __str__(self) -> str:
        if self.x is None:
            return self.name
        return f"{self.name}({self.x:.3f},{self.y:.3f})"

    @classmethod
    def parse(cls, text: str) -> "Op":
        text = text.strip()
        if "(" not in text:
            return cls(text)
        name, rest = text.split("(", 1)
        x, y = rest.rstrip(")").split(",")
        return cls(name, float(x), float(y))


MOVE_AHEAD = Op("MoveAhead")
ROTATE_LEFT = Op("RotateLeft")
ROTATE_RIGHT = Op("RotateRight")
NAVIGATION_OPS = (MOVE_AHEAD, ROTATE_LEFT, ROTATE_RIGHT)


def pick_up(x, y):
    return Op("PickUp", float(x), float(y))


def put_at(x, y):
    return Op("PutAt", float(x), float(y))


def open_at(x, y):
    return Op("OpenAt", float(x), float(y))


def close_at(x, y):
    return Op("CloseAt", float(x), float(y))


@dataclass(frozen=True)
class ObjectType:
    """Static knowledge about a kind of object.

    ``size`` is in lattice cells for furniture placed on the floor or against
    a wall, and in meters for items placed on surfaces.
    """

    name: str
    placement: str  # "wall" | "floor" | "surface"
    size: tuple = (1, 1)
    pickable: bool = False
    openable: bool = False
    surface: bool = False
    obstacle: bool = False
    occludes: bool = False
    props: tuple[tuple[str, object], ...] = ()


def _furniture(name, placement, size, **kw):
    return ObjectType(name, placement, size, obstacle=True, **kw)


def _item(name, w, h, **kw):
    return ObjectType(name, "surface", (w, h), **kw)


OBJECT_TYPES: dict[str, ObjectType] = {t.name: t for t in [
    _furniture("countertop", "wall", ((3, 6), (2, 2)), surface=True),
    _furniture("table", "floor", ((3, 5), (3, 4)), surface=True),
    _furniture("fridge", "wall", ((3, 3), (3, 3)), openable=True, occludes=True),
    _furniture("cabinet", "wall", ((2, 2), (2, 2)), openable=True, occludes=True),
    _furniture("drawer", "wall", ((2, 3), (2, 2)), openable=True),
    _furniture("box", "floor", ((2, 2), (2, 2)), openable=True),
    _furniture("sofa", "wall", ((5, 7), (3, 3))),
    _furniture("tvstand", "wall", ((4, 5), (2, 2)), surface=True),
    _furniture("bookshelf", "wall", ((3, 4), (2, 2)), occludes=True),
    _furniture("bed", "wall", ((6, 8), (6, 7)), surface=True),
    _furniture("desk", "wall", ((4, 5), (3, 3)), surface=True),
    _furniture("dresser", "wall", ((3, 5), (2, 2)), surface=True),
    _furniture("toilet", "wall", ((2, 2), (3, 3))),
    _furniture("sinkcounter", "wall", ((3, 5), (2, 2)), surface=True),
    _item("apple", 0.08, 0.08, pickable=True),
    _item("tomato", 0.08, 0.08, pickable=True),
    _item("potato", 0.09, 0.07, pickable=True),
    _item("bread", 0.2, 0.12, pickable=True),
    _item("mug", 0.1, 0.1, pickable=True),
    _item("bowl", 0.15, 0.15, pickable=True),
    _item("book", 0.2, 0.15, pickable=True),
    _item("cellphone", 0.08, 0.14, pickable=True),
    _item("remotecontrol", 0.05, 0.15, pickable=True),
    _item("pillow", 0.3, 0.2, pickable=True),
    _item("alarmclock", 0.1, 0.1, pickable=True),
    _item("soapbar", 0.08, 0.06, pickable=True),
    _item("spraybottle", 0.08, 0.08, pickable=True),
    _item("candle", 0.07, 0.07, pickable=True),
    _item("towel", 0.25, 0.15, pickable=True),
    _item("television", 0.6, 0.12),
    _item("laptop", 0.3, 0.22, openable=True),
    _item("microwave", 0.45, 0.3, openable=True),
]}


@dataclass(frozen=True)
class SceneProfile:
    name: str
    width: tuple[int, int]
    height: tuple[int, int]
    furniture: tuple[tuple[str, int, int], ...]
    items: tuple[tuple[str, int, int], ...]  # per-type min/max counts
    item_total: tuple[int, int] = (3, 6)
    partitions: tuple[int, int] = (0, 0)


SCENE_PROFILES: dict[str, SceneProfile] = {p.name: p for p in [
    SceneProfile("kitchen", (18, 24), (16, 22),
                 (("countertop", 1, 2), ("table", 1, 1), ("fridge", 1, 1),
                  ("cabinet", 1, 2), ("drawer", 1, 2)),
                 (("apple", 1, 2), ("tomato", 0, 2), ("potato", 0, 2), ("bread", 0, 1),
                  ("mug", 0, 2), ("bowl", 0, 1), ("microwave", 0, 1)),
                 item_total=(3, 7), partitions=(0, 1)),
    SceneProfile("livingroom", (20, 26), (18, 24),
                 (("sofa", 1, 1), ("table", 1, 1), ("tvstand", 1, 1), ("box", 1, 2),
                  ("bookshelf", 0, 1), ("drawer", 0, 1)),
                 (("television", 1, 1), ("laptop", 0, 1), ("book", 0, 2),
                  ("remotecontrol", 0, 2), ("mug", 0, 1), ("cellphone", 0, 1)),
                 item_total=(3, 6), partitions=(0, 1)),
    SceneProfile("bedroom", (18, 24), (18, 22),
                 (("bed", 1, 1), ("desk", 1, 1), ("dresser", 0, 1), ("drawer", 1, 2),
                  ("box", 0, 1)),
                 (("laptop", 0, 1), ("book", 0, 2), ("cellphone", 0, 1),
                  ("alarmclock", 0, 1), ("pillow", 0, 2), ("mug", 0, 1)),
                 item_total=(3, 6)),
    SceneProfile("bathroom", (14, 18), (12, 16),
                 (("sinkcounter", 1, 1), ("toilet", 1, 1), ("cabinet", 1, 1), ("drawer", 1, 1)),
                 (("soapbar", 0, 2), ("spraybottle", 0, 1), ("candle", 0, 2), ("towel", 0, 1)),
                 item_total=(2, 5)),
    SceneProfile("apartment", (30, 36), (26, 32),
                 (("countertop", 1, 1), ("table", 1, 2), ("fridge", 1, 1), ("sofa", 1, 1),
                  ("tvstand", 1, 1), ("bed", 0, 1), ("desk", 0, 1), ("drawer", 1, 2),
                  ("box", 1, 2), ("bookshelf", 0, 1)),
                 (("apple", 0, 2), ("mug", 0, 2), ("book", 0, 2), ("television", 0, 1),
                  ("laptop", 0, 1), ("bowl", 0, 1), ("cellphone", 0, 1), ("alarmclock", 0, 1)),
                 item_total=(5, 9), partitions=(1, 2)),
]}

ITHOR_SCENES = ("kitchen", "livingroom", "bedroom", "bathroom")


@dataclass(frozen=True)
class WorldObject:
    id: str
    object_type: str
    position: tuple[float, float]
    footprint: Rect
    pickable: bool = False
    openable: bool = False
    is_open: bool = False
    surface: bool = False
    obstacle: bool = False
    occludes: bool = False
    resting_on: str | None = None
    props: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        if not self.footprint.contains(*self.position, margin=1e-9):
            raise ValueError(f"{self.id}: footprint does not contain position")
        if self.is_open and not self.openable:
            raise ValueError(f"{self.id}: only openable objects can be open")


@dataclass(frozen=True)
class Observation:
    detections_raw: tuple  # RawDetection tuples
    depth_scan: tuple[float, ...]
    agent_pose: AgentPose
    last_op_success: bool | None
    holding: bool = False


@dataclass(frozen=True)
class RawDetection:
    object_id: str
    object_type: str
    position: tuple[float, float]  # start frame
    distance: float
    size: tuple[float, float]


@dataclass(frozen=True)
class WorldState:
    objects: tuple[WorldObject, ...]
    agent: AgentPose  # world frame
    start: AgentPose
    room: Rect
    walls: tuple[Rect, ...] = ()
    held: str | None = None
    params: SimParams = SimParams()
    rng_seed: int = 0
    profile: str = ""
    tick: int = 0

    def __post_init__(self):
        surfaces = [o for o in self.objects if o.surface and o.id != self.held]
        for i, a in enumerate(surfaces):
            for b in surfaces[i + 1:]:
                if a.footprint.overlaps(b.footprint):
                    raise ValueError(f"surfaces {a.id} and {b.id} overlap")
        if self.held is not None and self.get(self.held).resting_on is not None:
            raise ValueError("held object cannot rest on a surface")

    def get(self, object_id: str) -> WorldObject:
        for o in self.objects:
            if o.id == object_id:
                return o
        raise KeyError(object_id)

    def replace_object(self, obj: WorldObject) -> "WorldState":
        return dataclasses.replace(
            self, objects=tuple(obj if o.id == obj.id else o for o in self.objects))

    def with_objects(self, objects) -> "WorldState":
        return dataclasses.replace(self, objects=tuple(objects))

    # frames ---------------------------------------------------------------
    def to_start_frame(self, x: float, y: float) -> tuple[float, float]:
        h = math.radians(self.start.heading)
        dx, dy = x - self.start.x, y - self.start.y
        c, s = math.cos(h), math.sin(h)
        return (_clean(c * dx + s * dy), _clean(-s * dx + c * dy))

    def to_world_frame(self, x: float, y: float) -> tuple[float, float]:
        h = math.radians(self.start.heading)
        c, s = math.cos(h), math.sin(h)
        return (_clean(self.start.x + c * x - s * y), _clean(self.start.y + s * x + c * y))

    def relative_pose(self) -> AgentPose:
        x, y = self.to_start_frame(self.agent.x, self.agent.y)
        return AgentPose(x, y, (self.agent.heading - self.start.heading) % 360)

    # geometry -------------------------------------------------------------
    def obstacle_rects(self, exclude: str | None = None) -> list[Rect]:
        rects = list(self.walls)
        rects += [o.footprint for o in self.objects
                  if o.obstacle and o.id != self.held and o.id != exclude]
        return rects

    def occluder_rects(self) -> tuple[list[Rect], list[str | None]]:
        rects, owners = [], []
        for w in self.walls:
            rects.append(w)
            owners.append(None)
        for o in self.objects:
            if o.occludes and o.id != self.held:
                rects.append(o.footprint)
                owners.append(o.id)
        return rects, owners

    def carry_radius(self) -> float:
        r = self.params.agent_radius
        if self.held is not None:
            r += self.get(self.held).footprint.half_diagonal()
        return r

    def to_text(self) -> str:
        return format_world(self)


def _clean(v: float) -> float:
    r = round(v, 9)
    return 0.0 if r == 0 else r


# --------------------------------------------------------------------------
# low-level operation execution

OpHandler = Callable[[WorldState, Op], tuple[WorldState, bool]]


def _move_ahead(world: WorldState, op: Op):
    p = world.params
    a = world.agent.position
    b = world.agent.ahead(p.step_length)
    b = (_clean(b[0]), _clean(b[1]))
    r = world.carry_radius()
    room = world.room

    def wall_clearance(px, py):
        return min(px - room.x0, room.x1 - px, py - room.y0, room.y1 - py)

    # a disc already intruding (e.g. just after picking something up) may back out,
    # but no motion may bring it closer to what it overlaps
    ca, cb = wall_clearance(*a), wall_clearance(*b)
    if cb < r and cb <= ca + 1e-12:
        return world, False
    for rect in world.obstacle_rects():
        d = segment_rect_distance(a, b, rect)
        if d >= r:
            continue
        da, db = rect.distance_to_point(*a), rect.distance_to_point(*b)
        if not (d >= da - 1e-12 and db > da + 1e-12):
            return world, False
    return dataclasses.replace(world, agent=AgentPose(b[0], b[1], world.agent.heading)), True


def _rotate(sign: int, world: WorldState, op: Op):
    h = (world.agent.heading + sign * world.params.rotation_step) % 360
    return dataclasses.replace(world, agent=AgentPose(world.agent.x, world.agent.y, h)), True


def _reachable(world: WorldState, x: float, y: float) -> bool:
    return math.dist(world.agent.position, (x, y)) < world.params.manipulation_distance


def _nearest(world: WorldState, x: float, y: float, pred) -> WorldObject | None:
    best, best_d = None, math.inf
    for o in world.objects:
        if o.id == world.held or not pred(o):
            continue
        d = math.dist(o.position, (x, y))
        if d <= world.params.grasp_tolerance and d < best_d:
            best, best_d = o, d
    return best


def _pick_up(world: WorldState, op: Op):
    if world.held is not None:
        return world, False
    x, y = world.to_world_frame(op.x, op.y)
    obj = _nearest(world, x, y, lambda o: o.pickable)
    if obj is None or not _reachable(world, *obj.position):
        return world, False
    world = world.replace_object(dataclasses.replace(obj, resting_on=None))
    return dataclasses.replace(world, held=obj.id), True


def _put_at(world: WorldState, op: Op):
    if world.held is None:
        return world, False
    x, y = world.to_world_frame(op.x, op.y)
    if not _reachable(world, x, y):
        return world, False
    held = world.get(world.held)
    fp = held.footprint.moved_to(x, y)
    for s in world.objects:
        if not s.surface or s.id == held.id or not s.footprint.contains_rect(fp):
            continue
        if any(o.resting_on == s.id and o.footprint.overlaps(fp) for o in world.objects):
            continue
        placed = dataclasses.replace(held, position=(x, y), footprint=fp, resting_on=s.id)
        objs = tuple(placed if o.id == held.id else o for o in world.objects)
        return dataclasses.replace(world, objects=objs, held=None), True
    return world, False


def _set_open(value: bool, world: WorldState, op: Op):
    x, y = world.to_world_frame(op.x, op.y)
    obj = _nearest(world, x, y, _openable)
    if obj is None or not _reachable(world, *obj.position):
        return world, False
    if world.params.actuator_failure_rate > 0:
        u = np.random.default_rng([world.rng_seed, world.tick]).random()
        if u < world.params.actuator_failure_rate:
            return world, False
    return world.replace_object(dataclasses.replace(obj, is_open=value)), True


def _openable(o: WorldObject) -> bool:
    return o.openable


# partials of module-level functions, so registries pickle for worker processes
BUILTIN_OPS: dict[str, OpHandler] = {
    "MoveAhead": _move_ahead,
    "RotateLeft": partial(_rotate, +1),
    "RotateRight": partial(_rotate, -1),
    "PickUp": _pick_up,
    "PutAt": _put_at,
    "OpenAt": partial(_set_open, True),
    "CloseAt": partial(_set_open, False),
}


def step(world: WorldState, op: Op,
         handlers: Mapping[str, OpHandler] | None = None) -> tuple[WorldState, bool]:
    """Execute one operation; never raises for a registered op name."""
    handlers = BUILTIN_OPS if handlers is None else handlers
    try:
        handler = handlers[op.name]
    except KeyError:
        raise ValueError(f"unknown low-level operation {op.name!r}") from None
    new, ok = handler(world, op)
    return dataclasses.replace(new, tick=world.tick + 1), ok


# --------------------------------------------------------------------------
# sensing

def visible_objects(world: WorldState, max_range: float | None = None) -> list[WorldObject]:
    p = world.params
    max_range = p.max_range if max_range is None else max_range
    ax, ay = world.agent.position
    cands = []
    for o in world.objects:
        if o.id == world.held:
            continue
        dx, dy = o.position[0] - ax, o.position[1] - ay
        d = math.hypot(dx, dy)
        if d > max_range:
            continue
        if d > 1e-9 and abs(angle_diff(bearing(dx, dy), world.agent.heading)) > p.fov / 2 + 1e-9:
            continue
        cands.append(o)
    if not cands:
        return []
    rects, owners = world.occluder_rects()
    if not rects:
        return cands
    ends = np.array([o.position for o in cands])
    starts = np.repeat(np.array([[ax, ay]]), len(cands), axis=0)
    hits = segments_hit_rects(starts, ends, np.array(rects))
    own = np.array([[owner == o.id for owner in owners] for o in cands])
    blocked = (hits & ~own).any(axis=1)
    return [o for o, b in zip(cands, blocked) if not b]


def depth_scan(world: WorldState) -> np.ndarray:
    p = world.params
    angles = world.agent.heading + p.ray_offsets()
    rects = world.obstacle_rects()
    return cast_rays(world.agent.position, angles, np.array(rects) if rects else np.zeros((0, 4)),
                     world.room, p.max_range)


def sense(world: WorldState, last_op_success: bool | None = None) -> Observation:
    ax, ay = world.agent.position
    raw = []
    # the start heading is an axis direction, so footprints stay axis-aligned in its frame
    swap = world.start.heading % 180 == 90
    for o in visible_objects(world):
        size = (o.footprint.width, o.footprint.height)
        raw.append(RawDetection(o.id, o.object_type, world.to_start_frame(*o.position),
                                math.dist((ax, ay), o.position), size[::-1] if swap else size))
    raw.sort(key=lambda r: r.object_id)
    scan = tuple(float(round(d, 9)) for d in depth_scan(world))
    return Observation(tuple(raw), scan, world.relative_pose(), last_op_success,
                       holding=world.held is not None)


# --------------------------------------------------------------------------
# ground-truth lattice

def lattice_cell(x: float, y: float) -> tuple[int, int]:
    return (int(round(x / LATTICE)), int(round(y / LATTICE)))


def free_cells(world: WorldState, radius: float | None = None) -> set[tuple[int, int]]:
    """Lattice cell centres where the agent disc fits (world frame)."""
    r = world.params.agent_radius if radius is None else radius
    room = world.room
    i0, j0 = lattice_cell(room.x0, room.y0)
    i1, j1 = lattice_cell(room.x1, room.y1)
    rects = [o.footprint for o in world.objects if o.obstacle and o.id != world.held]
    rects += list(world.walls)
    out = set()
    for i in range(i0, i1 + 1):
        x = i * LATTICE
        if not room.x0 + r <= x <= room.x1 - r:
            continue
        for j in range(j0, j1 + 1):
            y = j * LATTICE
            if not room.y0 + r <= y <= room.y1 - r:
                continue
            if all(rect.distance_to_point(x, y) >= r for rect in rects):
                out.add((i, j))
    return out


def bfs_distances(free: set[tuple[int, int]], start: tuple[int, int]) -> dict[tuple[int, int], int]:
    dist = {start: 0}
    queue = deque([start])
    while queue:
        c = queue.popleft()
        for n in ((c[0] + 1, c[1]), (c[0] - 1, c[1]), (c[0], c[1] + 1), (c[0], c[1] - 1)):
            if n in free and n not in dist:
                dist[n] = dist[c] + 1
                queue.append(n)
    return dist


def has_line_of_sight(world: WorldState, src: tuple[float, float], obj: WorldObject) -> bool:
    rects, owners = world.occluder_rects()
    if not rects:
        return True
    hits = segments_hit_rects(np.array([src]), np.array([obj.position]), np.array(rects))[0]
    return not any(h and owner != obj.id for h, owner in zip(hits, owners))


def viewing_cells(world: WorldState, obj: WorldObject, free: set[tuple[int, int]],
                  distance: float) -> list[tuple[int, int]]:
    """Free lattice cells closer than ``distance`` to ``obj`` with line of sight."""
    out = []
    ox, oy = obj.position
    reach = int(math.ceil(distance / LATTICE))
    ci, cj = lattice_cell(ox, oy)
    for i in range(ci - reach, ci + reach + 1):
        for j in range(cj - reach, cj + reach + 1):
            if (i, j) not in free:
                continue
            c = (i * LATTICE, j * LATTICE)
            if math.dist(c, (ox, oy)) < distance and has_line_of_sight(world, c, obj):
                out.append((i, j))
    return out


# --------------------------------------------------------------------------
# scene generation

def _cells_rect(i0, j0, w, h) -> Rect:
    return Rect((i0 - 0.5) * LATTICE + FACE_INSET, (j0 - 0.5) * LATTICE + FACE_INSET,
                (i0 + w - 0.5) * LATTICE - FACE_INSET, (j0 + h - 0.5) * LATTICE - FACE_INSET)


def _randint(rng, lo, hi) -> int:
    return int(rng.integers(lo, hi + 1))


class _Layout:
    def __init__(self, W: int, H: int):
        self.W, self.H = W, H
        self.blocked = np.zeros((W, H), dtype=bool)

    def fits(self, i0, j0, w, h, margin=1) -> bool:
        if i0 < 0 or j0 < 0 or i0 + w > self.W or j0 + h > self.H:
            return False
        a0, b0 = max(i0 - margin, 0), max(j0 - margin, 0)
        a1, b1 = min(i0 + w + margin, self.W), min(j0 + h + margin, self.H)
        return not self.blocked[a0:a1, b0:b1].any()

    def take(self, i0, j0, w, h):
        self.blocked[i0:i0 + w, j0:j0 + h] = True


def _place_furniture(rng, layout: _Layout, otype: ObjectType):
    (wl, wh), (hl, hh) = otype.size
    long_side, short_side = _randint(rng, wl, wh), _randint(rng, hl, hh)
    for _ in range(200):
        if otype.placement == "wall":
            side = int(rng.integers(4))
            if side in (0, 1):  # south / north wall: long side along x
                w, h = long_side, short_side
                i0 = _randint(rng, 0, layout.W - w)
                j0 = 0 if side == 0 else layout.H - h
            else:
                w, h = short_side, long_side
                j0 = _randint(rng, 0, layout.H - h)
                i0 = 0 if side == 2 else layout.W - w
        else:
            w, h = (long_side, short_side) if rng.random() < 0.5 else (short_side, long_side)
            i0 = _randint(rng, 2, max(2, layout.W - w - 2))
            j0 = _randint(rng, 2, max(2, layout.H - h - 2))
        if layout.fits(i0, j0, w, h):
            layout.take(i0, j0, w, h)
            return _cells_rect(i0, j0, w, h)
    return None


def _place_partition(rng, layout: _Layout) -> Rect | None:
    """A one-cell-thick wall from one side of the room, leaving a doorway."""
    vertical = rng.random() < 0.5
    span, other = (layout.W, layout.H) if vertical else (layout.H, layout.W)
    for _ in range(50):
        k = _randint(rng, span // 3, 2 * span // 3)
        gap = _randint(rng, 4, max(4, other // 3))
        start = 0 if rng.random() < 0.5 else gap
        i0, j0, w, h = (k, start, 1, other - gap) if vertical else (start, k, other - gap, 1)
        if layout.fits(i0, j0, w, h):
            layout.take(i0, j0, w, h)
            return _cells_rect(i0, j0, w, h)
    return None


def _place_item(rng, otype: ObjectType, surface: WorldObject, objects) -> WorldObject | None:
    w, h = otype.size
    if rng.random() < 0.5:
        w, h = h, w
    fp = surface.footprint
    if fp.width < w + 0.04 or fp.height < h + 0.04:
        return None
    siblings = [o.footprint for o in objects if o.resting_on == surface.id]
    for _ in range(60):
        cx = float(rng.uniform(fp.x0 + w / 2 + 0.02, fp.x1 - w / 2 - 0.02))
        cy = float(rng.uniform(fp.y0 + h / 2 + 0.02, fp.y1 - h / 2 - 0.02))
        cand = Rect.around(round(cx, 4), round(cy, 4), w, h)
        grown = Rect(cand.x0 - 0.06, cand.y0 - 0.06, cand.x1 + 0.06, cand.y1 + 0.06)
        if any(grown.overlaps(s) for s in siblings):
            continue
        return cand
    return None


def generate_world(seed: int, profile: str = "kitchen", params: SimParams | None = None,
                   types: Mapping[str, ObjectType] | None = None,
                   max_attempts: int = 1000) -> WorldState:
    """Random but reproducible scene; every object is viewable from the start's free space."""
    if profile not in SCENE_PROFILES:
        raise UnknownProfile(profile)
    params = params or SimParams()
    types = OBJECT_TYPES if types is None else types
    attempt_seed = int(seed)
    for round_ in range(10):
        rng = np.random.default_rng(attempt_seed)
        for _ in range(max_attempts):
            world = _try_generate(rng, SCENE_PROFILES[profile], params, types, seed)
            if world is not None:
                return world
        log.warning("seed %s: no valid layout after %d attempts, perturbing", attempt_seed,
                    max_attempts)
        attempt_seed = int(np.random.SeedSequence([int(seed), round_ + 1]).generate_state(1)[0])
    raise RuntimeError(f"could not generate a {profile} world for seed {seed}")


def _try_generate(rng, prof: SceneProfile, params: SimParams, types, seed) -> WorldState | None:
    W, H = _randint(rng, *prof.width), _randint(rng, *prof.height)
    layout = _Layout(W, H)
    room = Rect(-0.5 * LATTICE - FACE_INSET, -0.5 * LATTICE - FACE_INSET,
                (W - 0.5) * LATTICE + FACE_INSET, (H - 0.5) * LATTICE + FACE_INSET)
    walls = []
    for _ in range(_randint(rng, *prof.partitions)):
        r = _place_partition(rng, layout)
        if r is not None:
            walls.append(r)
    objects: list[WorldObject] = []
    counters: dict[str, int] = {}

    def new_id(tname):
        k = counters.get(tname, 0)
        counters[tname] = k + 1
        return f"{tname}_{k}"

    for tname, lo, hi in prof.furniture:
        otype = types[tname]
        for _ in range(_randint(rng, lo, hi)):
            fp = _place_furniture(rng, layout, otype)
            if fp is None:
                if lo > 0:
                    return None
                continue
            objects.append(_make(otype, new_id(tname), fp, rng))
    surfaces = [o for o in objects if o.surface]
    if not surfaces:
        return None
    # items: every per-type minimum first, then fill up to the drawn total
    wanted = []
    for tname, lo, hi in prof.items:
        wanted += [tname] * lo
    total = _randint(rng, *prof.item_total)
    optional = [t for t, lo, hi in prof.items for _ in range(hi - lo)]
    rng.shuffle(optional)
    wanted += optional[:max(0, total - len(wanted))]
    for tname in wanted:
        otype = types[tname]
        order = rng.permutation(len(surfaces))
        for k in order:
            s = surfaces[int(k)]
            fp = _place_item(rng, otype, s, objects)
            if fp is not None:
                objects.append(_make(otype, new_id(tname), fp, rng, resting_on=s.id))
                break
        else:
            if tname in [t for t, lo, hi in prof.items if lo > 0]:
                return None
    world = WorldState(tuple(objects), AgentPose(), AgentPose(), room, tuple(walls),
                       params=params, rng_seed=int(seed), profile=prof.name)
    free = free_cells(world)
    if not free:
        return None
    # largest connected component of free space
    remaining, best = set(free), set()
    while remaining:
        c = min(remaining)
        comp = set(bfs_distances(remaining, c))
        remaining -= comp
        if len(comp) > len(best):
            best = comp
    for o in objects:
        if not viewing_cells(world, o, best, params.manipulation_distance):
            return None
    cells = sorted(best)
    si, sj = cells[int(rng.integers(len(cells)))]
    heading = int(rng.choice([0, 90, 180, 270]))
    start = AgentPose(si * LATTICE, sj * LATTICE, heading)
    return dataclasses.replace(world, agent=start, start=start)


def _make(otype: ObjectType, oid: str, fp: Rect, rng, resting_on=None) -> WorldObject:
    is_open = bool(otype.openable and rng.random() < 0.5)
    return WorldObject(oid, otype.name, fp.center, fp, pickable=otype.pickable,
                       openable=otype.openable, is_open=is_open, surface=otype.surface,
                       obstacle=otype.obstacle, occludes=otype.occludes,
                       resting_on=resting_on, props=dict(otype.props))


def place_object(world: WorldState, otype: ObjectType, rng, surface_id: str | None = None
                 ) -> WorldState:
    """Add one item of ``otype`` on a surface (any surface with room if none given)."""
    surfaces = [o for o in world.objects if o.surface and (surface_id is None or o.id == surface_id)]
    n = sum(o.object_type == otype.name for o in world.objects)
    for k in rng.permutation(len(surfaces)):
        s = surfaces[int(k)]
        fp = _place_item(rng, otype, s, world.objects)
        if fp is not None:
            obj = _make(otype, f"{otype.name}_{n}", fp, rng, resting_on=s.id)
            return world.with_objects(world.objects + (obj,))
    raise ValueError(f"no surface can hold a {otype.name}")


# --------------------------------------------------------------------------
# text serialization: one object per line

def _flags(o: WorldObject) -> str:
    f = []
    for name in ("pickable", "openable", "surface", "obstacle", "occludes"):
        if getattr(o, name):
            f.append(name)
    if o.is_open:
        f.append("open")
    if o.resting_on:
        f.append(f"on={o.resting_on}")
    for k, v in sorted(o.props.items()):
        f.append(f"{k}={v}")
    return ",".join(f) or "-"


def format_world(world: WorldState) -> str:
    r, s, a = world.room, world.start, world.agent
    lines = [f"# world seed={world.rng_seed} profile={world.profile}",
             f"room {r.x0:.4f} {r.y0:.4f} {r.x1:.4f} {r.y1:.4f}",
             f"start {s.x:.4f} {s.y:.4f} {s.heading}",
             f"agent {a.x:.4f} {a.y:.4f} {a.heading}",
             f"held {world.held or '-'}"]
    for w in world.walls:
        lines.append(f"wall {w.x0:.4f} {w.y0:.4f} {w.x1:.4f} {w.y1:.4f}")
    for o in world.objects:
        fp = o.footprint
        lines.append(f"object {o.id} {o.object_type} {o.position[0]:.4f} {o.position[1]:.4f} "
                     f"{fp.width:.4f} {fp.height:.4f} {_flags(o)}")
    return "\n".join(lines) + "\n"


def _parse_value(v: str):
    if v in ("True", "False"):
        return v == "True"
    try:
        return float(v)
    except ValueError:
        return v


def parse_world(text: str, params: SimParams | None = None) -> WorldState:
    seed, profile = 0, ""
    room = start = agent = None
    held = None
    walls, objects = [], []
    for line in text.splitlines():
        if not line.strip():
            continue
        if line.startswith("#"):
            for tok in line[1:].split():
                if tok.startswith("seed="):
                    seed = int(tok[5:])
                elif tok.startswith("profile="):
                    profile = tok[8:]
            continue
        parts = line.split()
        kind = parts[0]
        if kind == "room":
            room = Rect(*map(float, parts[1:5]))
        elif kind in ("start", "agent"):
            pose = AgentPose(float(parts[1]), float(parts[2]), int(parts[3]))
            if kind == "start":
                start = pose
            else:
                agent = pose
        elif kind == "held":
            held = None if parts[1] == "-" else parts[1]
        elif kind == "wall":
            walls.append(Rect(*map(float, parts[1:5])))
        elif kind == "object":
            oid, otype = parts[1], parts[2]
            x, y, w, h = map(float, parts[3:7])
            flags = {} if parts[7] == "-" else dict(
                (f.split("=", 1) + [True])[:2] for f in parts[7].split(","))
            props = {k: _parse_value(v) for k, v in flags.items()
                     if k not in {"pickable", "openable", "surface", "obstacle", "occludes",
                                  "open", "on"}}
            objects.append(WorldObject(
                oid, otype, (x, y), Rect.around(x, y, w, h),
                pickable="pickable" in flags, openable="openable" in flags,
                is_open="open" in flags, surface="surface" in flags,
                obstacle="obstacle" in flags, occludes="occludes" in flags,
                resting_on=flags.get("on"), props=props))
        else:
            raise ValueError(f"unknown world line {line!r}")
    if room is None or start is None:
        raise ValueError("world text lacks room or start")
    return WorldState(tuple(objects), agent or start, start, room, tuple(walls), held,
                      params or SimParams(), seed, profile)
