"""Worked extension: lamps that can be switched on.

Everything here goes through the public :class:`~ogamus.registry.Registry`
API. A new object type, a new predicate with its predictor, a new action
schema with its compiler, and a new low-level op are enough to pose and
solve ``(exists (?x) (and (lamp ?x) (turned_on ?x)))``.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from .compilation import CompileContext, Compiled
from .pddl import GoalFormula, GroundAction, parse_goal
from .registry import Registry, default_registry
from .world import ObjectType, Op, WorldState, generate_world, place_object

LAMP = ObjectType("lamp", "surface", (0.2, 0.2), props=(("turned_on", False),))

TURN_ON_PDDL = """\
(:action turn_on
  :parameters (?x)
  :precondition (and (lamp ?x) (closetoagent ?x) (visible ?x))
  :effect (and (turned_on ?x)))"""

LAMP_GOAL = "(exists (?x) (and (lamp ?x) (turned_on ?x)))"


def toggle_on(world: WorldState, op: Op) -> tuple[WorldState, bool]:
    """ToggleOn(x, y): switch on the nearest switchable object under the point, if in reach."""
    x, y = world.to_world_frame(op.x, op.y)
    p = world.params
    best = None
    for o in world.objects:
        d = math.dist(o.position, (x, y))
        if "turned_on" in o.props and d <= p.grasp_tolerance and (best is None or d < best[0]):
            best = (d, o)
    if best is None or math.dist(world.agent.position, best[1].position) >= p.manipulation_distance:
        return world, False
    lit = dataclasses.replace(best[1], props={**best[1].props, "turned_on": True})
    return world.replace_object(lit), True


def turned_on_predictor(belief, record, obj, rng) -> float:
    # a false-positive lamp has no world object behind it and is never lit
    return 1.0 if obj is not None and obj.props.get("turned_on") else 0.0


def compile_turn_on(action: GroundAction, ctx: CompileContext) -> Compiled:
    x, y = ctx.position(action.binding[0])
    return Compiled([Op("ToggleOn", x, y)], [], (x, y))


def lamp_registry(base: Registry | None = None) -> Registry:
    reg = base if base is not None else default_registry()
    reg.register_type(LAMP)
    reg.register_predicate("turned_on", turned_on_predictor, ["lamp"])
    reg.register_op("ToggleOn", toggle_on)
    reg.register_action(TURN_ON_PDDL, compile_turn_on)
    return reg


def lamp_goal() -> GoalFormula:
    return parse_goal(LAMP_GOAL)


def lamp_world(seed: int, profile: str = "livingroom") -> WorldState:
    """A generated scene with one unlit lamp added on a surface."""
    for attempt in range(20):
        world = generate_world(seed if attempt == 0 else seed + 7919 * attempt, profile)
        try:
            return place_object(world, LAMP, np.random.default_rng([seed, attempt]))
        except ValueError:
            continue
    raise ValueError(f"no {profile} scene near seed {seed} has room for a lamp")
