"""The agent's belief: anchored constants, their features, and a thresholded symbolic state."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

import numpy as np

from .geometry import angle_diff, bearing
from .navigation import OccupancyGrid, grid_line_of_sight
from .pddl import Atom, GroundAction
from .perception import (Detection, PredictorSet, predict_close_to_agent, predict_on,
                         predict_open)
from .world import OBJECT_TYPES, AgentPose, ObjectType, WorldState

CLOSE = "closetoagent"
VISIBLE = "visible"
HANDFREE = "handfree"
HOLDING = "holding"
ON = "on"
ISOPEN = "isopen"
ISCLOSED = "isclosed"
CAPABILITIES = ("pickable", "openable", "surface")


class AnchoringError(KeyError):
    """An action mentions a constant the belief does not know."""


@dataclass
class ObjectRecord:
    constant: str
    est_position: tuple[float, float]
    object_type: str
    confidence: float
    last_seen_step: int
    est_size: tuple[float, float] = (0.1, 0.1)
    weight: float = 0.0
    type_votes: Counter = field(default_factory=Counter)
    source_votes: Counter = field(default_factory=Counter)
    misses: int = 0
    order: int = 0

    @property
    def source_id(self) -> str | None:
        # most frequent provenance; Counter keeps first-seen order on ties
        return self.source_votes.most_common(1)[0][0] if self.source_votes else None

    def absorb(self, det: Detection, step: int) -> None:
        w = det.confidence
        tot = self.weight + w
        x = (self.weight * self.est_position[0] + w * det.est_position[0]) / tot
        y = (self.weight * self.est_position[1] + w * det.est_position[1]) / tot
        sx = (self.weight * self.est_size[0] + w * det.est_size[0]) / tot
        sy = (self.weight * self.est_size[1] + w * det.est_size[1]) / tot
        self.est_position, self.est_size, self.weight = (x, y), (sx, sy), tot
        self.confidence = max(self.confidence, det.confidence)
        self.type_votes[det.object_type] += 1
        self.source_votes[det.source_id] += 1
        self.object_type = self.type_votes.most_common(1)[0][0]
        self.last_seen_step = step
        self.misses = 0


@dataclass
class StateFeatures:
    pose: AgentPose = field(default_factory=AgentPose)
    last_op_success: bool | None = None
    occupancy: OccupancyGrid = field(default_factory=OccupancyGrid)
    holding: bool = False


# extension predicate: (belief, record, world object or None, rng) -> probability
PredicateFn = Callable[["BeliefState", ObjectRecord, object, np.random.Generator], float]


@dataclass(frozen=True)
class UnaryPredictor:
    name: str
    types: frozenset[str]
    fn: PredicateFn


@dataclass
class BeliefState:
    predictors: PredictorSet = field(default_factory=PredictorSet)
    epsilon: float = 0.5
    types: Mapping[str, ObjectType] = field(default_factory=lambda: OBJECT_TYPES)
    records: dict[str, ObjectRecord] = field(default_factory=dict)
    state: set[Atom] = field(default_factory=set)
    features: StateFeatures = field(default_factory=StateFeatures)
    extra_predictors: tuple[UnaryPredictor, ...] = ()
    same_type_merge: bool = False
    fov: float = 90.0
    evict_after: int = 3
    evict_radius: float = 0.5
    touch_radius: float = 0.5
    held: str | None = None
    # bookkeeping for the next predict_state call
    _updated: set[str] = field(default_factory=set)
    _touched: set[str] = field(default_factory=set)
    _moved: bool = False
    _visible: set[str] = field(default_factory=set)
    _was_visible: set[str] = field(default_factory=set)
    _hand_dirty: bool = True
    _counters: Counter = field(default_factory=Counter)
    _created: int = 0
    last_new: list[str] = field(default_factory=list)
    last_evicted: list[str] = field(default_factory=list)
    last_merged: list[tuple[str, str]] = field(default_factory=list)
    # every constant ever created: (type, provenance) at creation
    anchors: dict[str, tuple[str, str | None]] = field(default_factory=dict)

    @property
    def constants(self) -> list[str]:
        return list(self.records)

    def capabilities(self, object_type: str) -> set[str]:
        t = self.types.get(object_type)
        if t is None:
            return set()
        return {c for c in CAPABILITIES if getattr(t, c)}

    def position(self, constant: str) -> tuple[float, float]:
        return self.records[constant].est_position

    def snapshot(self) -> dict:
        p = self.features.pose
        return {
            "pose": [round(p.x, 6), round(p.y, 6), p.heading],
            "constants": [[r.constant, r.object_type, round(r.est_position[0], 6),
                           round(r.est_position[1], 6), round(r.confidence, 6)]
                          for r in self.records.values()],
            "atoms": sorted(str(a) for a in self.state),
        }

    def _touch_near(self, point: tuple[float, float]) -> None:
        for c, r in self.records.items():
            if math.dist(r.est_position, point) <= self.touch_radius:
                self._touched.add(c)


def init_belief(predictors: PredictorSet | None = None, epsilon: float = 0.5,
                **kw) -> BeliefState:
    return BeliefState(predictors or PredictorSet(), epsilon, **kw)


def set_features(belief: BeliefState, pose: AgentPose, last_op_success: bool | None,
                 holding: bool, last_op: str | None = None) -> BeliefState:
    f = belief.features
    if (pose.x, pose.y) != (f.pose.x, f.pose.y) or last_op == "MoveAhead":
        belief._moved = True
    if holding != f.holding:
        belief._hand_dirty = True
    f.pose, f.last_op_success, f.holding = pose, last_op_success, holding
    if belief.held is not None and belief.held in belief.records:
        belief.records[belief.held].est_position = (pose.x, pose.y)
    return belief


def update_objects(belief: BeliefState, detections: Iterable[Detection], step: int,
                   evict: bool = True) -> BeliefState:
    """Anchor detections to constants by nearest estimated position.

    A detection merges into the nearest record strictly closer than the
    merge distance (older record on ties); otherwise it founds a constant.
    Each record takes at most one detection per frame.  Afterwards records
    of the same type that drifted together are merged, and stale records
    are evicted.
    """
    md = belief.predictors.merge_distance
    belief.last_new, belief.last_evicted, belief.last_merged = [], [], []
    dets = sorted(detections, key=lambda d: -d.confidence)
    claimed: set[str] = set()
    matched: set[str] = set()
    for det in dets:
        best, best_key = None, None
        for c, r in belief.records.items():
            if c in claimed:
                continue
            if belief.same_type_merge and r.object_type != det.object_type:
                continue
            d = math.dist(r.est_position, det.est_position)
            if d < md and (best_key is None or (d, r.order) < best_key):
                best, best_key = r, (d, r.order)
        if best is None:
            k = belief._counters[det.object_type]
            belief._counters[det.object_type] += 1
            name = f"{det.object_type}{k}"
            best = ObjectRecord(name, det.est_position, det.object_type, det.confidence, step,
                                det.est_size, order=belief._created)
            belief._created += 1
            best.weight = det.confidence
            best.type_votes[det.object_type] += 1
            best.source_votes[det.source_id] += 1
            belief.records[name] = best
            belief.last_new.append(name)
            belief.anchors[name] = (det.object_type, det.source_id)
        else:
            best.absorb(det, step)
        claimed.add(best.constant)
        matched.add(best.constant)
        belief._updated.add(best.constant)
    _merge_duplicates(belief, matched)
    belief._was_visible = belief._visible
    belief._visible = {c for c in matched if c in belief.records}
    if evict:
        _evict_stale(belief, dets)
    return belief


def _merge_duplicates(belief: BeliefState, candidates: set[str]) -> None:
    md = belief.predictors.merge_distance
    for c in sorted(candidates, key=lambda c: belief.records[c].order if c in belief.records else 0):
        if c not in belief.records:
            continue
        r = belief.records[c]
        for o in list(belief.records.values()):
            if o.constant == c or o.object_type != r.object_type:
                continue
            if math.dist(o.est_position, r.est_position) < md:
                keep, drop = (o, r) if o.order < r.order else (r, o)
                if drop.constant == belief.held:
                    keep, drop = drop, keep
                tot = keep.weight + drop.weight
                keep.est_position = tuple(
                    (keep.weight * a + drop.weight * b) / tot
                    for a, b in zip(keep.est_position, drop.est_position))
                keep.weight = tot
                keep.confidence = max(keep.confidence, drop.confidence)
                keep.type_votes.update(drop.type_votes)
                keep.source_votes.update(drop.source_votes)
                keep.object_type = keep.type_votes.most_common(1)[0][0]
                keep.last_seen_step = max(keep.last_seen_step, drop.last_seen_step)
                _drop_constant(belief, drop.constant)
                belief._updated.add(keep.constant)
                belief.last_merged.append((keep.constant, drop.constant))
                if drop is r:
                    break
                r = keep


def _drop_constant(belief: BeliefState, c: str) -> None:
    del belief.records[c]
    belief.state = {a for a in belief.state if c not in a.args}
    for s in (belief._updated, belief._touched, belief._visible, belief._was_visible):
        s.discard(c)


def _evict_stale(belief: BeliefState, dets: list[Detection]) -> None:
    """A constant expected in view at close range but not seen collects a miss."""
    pose = belief.features.pose
    grid = belief.features.occupancy
    for c, r in list(belief.records.items()):
        if c in belief._visible or c == belief.held:
            continue
        dx, dy = r.est_position[0] - pose.x, r.est_position[1] - pose.y
        d = math.hypot(dx, dy)
        if d >= belief.predictors.close_distance or d < 1e-9:
            continue
        if abs(angle_diff(bearing(dx, dy), pose.heading)) > belief.fov / 2 - 5:
            continue
        if not grid_line_of_sight(grid, pose.position, r.est_position, ignore_radius=0.3):
            continue
        if any(math.dist(det.est_position, r.est_position) < belief.evict_radius for det in dets):
            r.misses = 0
            continue
        r.misses += 1
        if r.misses >= belief.evict_after:
            _drop_constant(belief, c)
            belief.last_evicted.append(c)


def _world_object(world: WorldState | None, record: ObjectRecord):
    if world is None or record.source_id is None:
        return None
    try:
        return world.get(record.source_id)
    except KeyError:
        return None


def predict_state(belief: BeliefState, world: WorldState | None,
                  rng: np.random.Generator) -> dict[Atom, float]:
    """Probabilities for the atoms whose inputs changed since the last call.

    ``world`` is the ground-truth oracle behind the flip-noise predictors;
    only records carrying a real provenance consult it.
    """
    out: dict[Atom, float] = {}
    recs = belief.records
    pose = belief.features.pose
    held_world = world.held if world is not None else None
    updated = {c for c in belief._updated if c in recs}
    touched = {c for c in belief._touched if c in recs}

    for c in updated:
        r = recs[c]
        for t in r.type_votes:
            out[Atom(t, (c,))] = r.confidence if t == r.object_type else 0.0
        caps = belief.capabilities(r.object_type)
        voted = set().union(*(belief.capabilities(t) for t in r.type_votes))
        for cap in voted | caps:
            out[Atom(cap, (c,))] = r.confidence if cap in caps else 0.0
    for c in updated | belief._was_visible:
        if c in recs:
            out[Atom(VISIBLE, (c,))] = 1.0 if c in belief._visible else 0.0
    close_set = set(recs) if belief._moved else updated
    for c in close_set:
        out[Atom(CLOSE, (c,))] = predict_close_to_agent(recs[c].est_position, pose,
                                                        belief.predictors)
    if belief._hand_dirty:
        out[Atom(HANDFREE, ())] = 0.0 if belief.features.holding else 1.0

    for c in sorted(updated | touched, key=lambda c: recs[c].order):
        r = recs[c]
        if "openable" in belief.capabilities(r.object_type):
            obj = _world_object(world, r)
            p = predict_open(obj, belief.predictors, rng)
            out[Atom(ISOPEN, (c,))] = p
            out[Atom(ISCLOSED, (c,))] = 1.0 - p
        for ext in belief.extra_predictors:
            if r.object_type in ext.types:
                p = float(ext.fn(belief, r, _world_object(world, r), rng))
                out[Atom(ext.name, (c,))] = p

    # on(x, y): pickable-typed x, surface-typed y, with either member refreshed
    dirty = updated | touched
    pick = [c for c in recs if "pickable" in belief.capabilities(recs[c].object_type)]
    surf = [c for c in recs if "surface" in belief.capabilities(recs[c].object_type)]
    surf_set = set(surf)
    for x in sorted(pick, key=lambda c: recs[c].order):
        for y in surf:
            if x == y or not (x in dirty or y in dirty):
                continue
            ox, oy = _world_object(world, recs[x]), _world_object(world, recs[y])
            out[Atom(ON, (x, y))] = predict_on(ox, oy, belief.predictors, rng, held_world)
    # atoms naming constants that lost the needed capability
    for a in belief.state:
        if a.predicate == ON and len(a.args) == 2 and a not in out:
            x, y = a.args
            if x not in pick or y not in surf_set:
                out[a] = 0.0

    belief._updated = set()
    belief._was_visible = set()
    belief._touched = set()
    belief._moved = False
    belief._hand_dirty = False
    return out


def decide_state(belief: BeliefState, probabilities: Mapping[Atom, float]) -> BeliefState:
    threshold = 1.0 - belief.epsilon
    for a, p in probabilities.items():
        if any(c not in belief.records for c in a.args):
            continue
        # certainty is always admitted, so epsilon = 0 keeps exactly the sure atoms
        if p > threshold or p >= 1.0:
            belief.state.add(a)
        else:
            belief.state.discard(a)
    return belief


def apply_effects(belief: BeliefState, action: GroundAction) -> BeliefState:
    missing = [c for c in action.binding if c not in belief.records]
    if missing:
        raise AnchoringError(f"{action} mentions unknown constants {missing}")
    belief.state |= action.add
    belief.state -= action.delete
    for a in action.add:
        if a.predicate == HOLDING and a.args:
            belief.held = a.args[0]
    for a in action.delete:
        if a.predicate == HOLDING and a.args and belief.held == a.args[0]:
            belief.held = None
    return belief


def note_manipulation(belief: BeliefState, point: tuple[float, float]) -> None:
    """Schedule re-evaluation of relations of constants near a manipulation target."""
    belief._touch_near(point)
