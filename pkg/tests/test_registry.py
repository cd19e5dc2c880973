import numpy as np
import pytest

from ogamus.agent import AgentConfig, SUCCESS, run_episode
from ogamus.lamp import LAMP, lamp_goal, lamp_registry, lamp_world
from ogamus.pddl import format_domain, parse_domain, parse_goal
from ogamus.registry import RegistryError, default_registry
from ogamus.world import ObjectType


def test_extension_is_visible_to_parsing():
    reg = lamp_registry()
    assert "turned_on" in {p.name for p in reg.domain.predicates}
    assert "turn_on" in {a.name for a in reg.domain.actions}
    assert parse_domain(format_domain(reg.domain)) == reg.domain
    assert lamp_goal() == parse_goal("(exists (?x) (and (lamp ?x) (turned_on ?x)))")


@pytest.mark.parametrize("seed", range(3))
def test_lamp_episode_is_solvable(seed):
    world = lamp_world(seed)
    out = run_episode(world, AgentConfig(goal=lamp_goal(), registry=lamp_registry()), seed)
    assert out.status == SUCCESS
    assert any(o.props.get("turned_on") for o in out.final_world.objects if o.object_type == "lamp")


def test_default_registry_is_untouched():
    lamp_registry()
    assert "lamp" not in default_registry().types


def test_duplicate_predicate_rejected():
    reg = lamp_registry()
    with pytest.raises(RegistryError, match="already exists"):
        reg.register_predicate("turned_on", lambda b, r, o, g: 0.5, ["lamp"])
    with pytest.raises(RegistryError):
        default_registry().register_predicate("visible", lambda b, r, o, g: 0.5, ["apple"])


def test_out_of_range_predictor_rejected():
    with pytest.raises(RegistryError, match="outside"):
        default_registry().register_predicate("ripe", lambda b, r, o, g: 1.2, ["apple"])


def test_crashing_predictor_rejected():
    def broken(b, r, o, g):
        return o.props["ripe"]  # fails on the None probe
    with pytest.raises(RegistryError, match="probe"):
        default_registry().register_predicate("ripe", broken, ["apple"])


def test_name_collisions():
    reg = default_registry()
    with pytest.raises(RegistryError):
        reg.register_type(ObjectType("apple", "surface", (0.1, 0.1)))
    with pytest.raises(RegistryError):
        reg.register_op("MoveAhead", lambda w, op: (w, True))
    reg.register_type(LAMP)
    with pytest.raises(RegistryError, match="unknown predicate"):
        reg.register_action("(:action zap :parameters (?x) :precondition (lamp ?x) "
                            ":effect (and (zapped ?x)))", lambda a, c: [])
    with pytest.raises(RegistryError, match="already exists"):
        reg.register_action("(:action gocloseto :parameters (?x) :precondition () "
                            ":effect (and (visible ?x)))", lambda a, c: [])
