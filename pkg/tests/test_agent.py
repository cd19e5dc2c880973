import json

import numpy as np
import pytest

from ogamus.agent import FAIL, SUCCESS, AgentConfig, run_episode
from ogamus.domains import reference_domain, task_goal
from ogamus.geometry import Rect
from ogamus.harness import generate_episodes, ground_truth_success, run_one, trace_lines, evaluate
from ogamus.pddl import PlanningProblem, atom, entails, ground_action
from ogamus.planner import plan, validate_plan
from ogamus.world import AgentPose, WorldObject, WorldState

DOM = reference_domain()


def apple_world():
    apple = WorldObject("apple_0", "apple", (1.0, 0.0), Rect.around(1.0, 0.0, 0.08, 0.08),
                        pickable=True)
    return WorldState((apple,), AgentPose(), AgentPose(), Rect(-1.0, -1.0, 6.0, 6.0))


def test_apple_in_view_is_found_quickly():
    out = run_episode(apple_world(), AgentConfig(goal=task_goal("objnav", "apple")), 0)
    assert out.status == SUCCESS and out.steps_used <= 5
    assert ground_truth_success(out.final_world, _objnav_task())
    assert entails(out.belief.state, out.belief.constants, task_goal("objnav", "apple"))


def _objnav_task():
    from ogamus.harness import TaskSpec
    return TaskSpec("objnav", "apple")


def test_zero_iterations_fail_at_once():
    out = run_episode(apple_world(), AgentConfig(goal=task_goal("objnav", "apple"), max_iter=0), 0)
    assert out.status == FAIL and out.steps_used == 0 and out.trace == []


def test_config_validation():
    with pytest.raises(ValueError):
        AgentConfig(max_iter=-1)
    with pytest.raises(ValueError):
        AgentConfig(policy="greedy")
    with pytest.raises(ValueError):
        run_episode(apple_world(), AgentConfig(), 0)


@pytest.mark.parametrize("family", ["objnav", "on"])
def test_seeded_traces_are_byte_identical(family):
    ep = generate_episodes(family, 1, 123)[0]
    a = run_one(ep)
    lines = [trace_lines(ep, run_episode(ep.world, ep.config, ep.agent_seed), a) for _ in range(2)]
    assert lines[0] == lines[1]


@pytest.mark.parametrize("family", ["objnav", "open", "close", "on"])
def test_episode_invariants(family):
    for ep in generate_episodes(family, 3, 5):
        out = run_episode(ep.world, ep.config, ep.agent_seed)
        rec = evaluate(ep, out)
        assert out.steps_used <= ep.config.max_iter
        # one op per iteration
        assert len(out.trace) == len(out.op_log) == out.steps_used
        moves = sum(1 for r in out.trace if r.get("op") == "MoveAhead" and r.get("ok"))
        assert out.path_length == pytest.approx(0.25 * moves)
        if out.success:
            assert entails(out.belief.state, out.belief.constants, ep.config.goal) is not None
            assert rec.ground_truth_success  # perfect perception
        assert all(c in out.belief.records for a in out.belief.state for c in a.args)


def test_effect_atoms_hold_right_after_an_action():
    ep = generate_episodes("on", 1, 2)[0]
    out = run_episode(ep.world, ep.config, ep.agent_seed)
    done = [r for r in out.trace if "effects" in r]
    assert done
    dom = ep.config.model
    for r in done:
        # snapshots are taken after the effects are applied
        name = r["effects"]
        schema = dom.schema(name[:name.index("(")])
        g = ground_action(schema, name[name.index("(") + 1:-1].split(","))
        atoms = set(r["belief"]["atoms"])
        assert {str(a) for a in g.add} <= atoms
        assert not {str(a) for a in g.delete} & atoms


def test_random_policy_ignores_belief_and_stops():
    cfg = AgentConfig(goal=task_goal("objnav", "apple"), policy="random")
    out = run_episode(apple_world(), cfg, 4)
    assert all(r["mode"] == "random" for r in out.trace)
    assert out.status == SUCCESS and out.op_log[-1] == "Stop"


def _solve(family, state, constants, *types):
    goal = task_goal(family, *types)
    p = plan(DOM, constants, state, goal)
    assert validate_plan(PlanningProblem(DOM, tuple(constants), frozenset(state), goal), p)
    return [str(s) for s in p]


def test_reference_domain_solves_three_families():
    assert _solve("objnav", {atom("apple", "a")}, ["a"], "apple") == ["gocloseto(a)"]
    assert _solve("open", {atom("box", "b"), atom("openable", "b")}, ["b"], "box") == \
        ["gocloseto(b)", "openobj(b)"]
    s = {atom("apple", "a"), atom("pickable", "a"), atom("table", "t"), atom("surface", "t"),
         atom("handfree")}
    assert _solve("on", s, ["a", "t"], "apple", "table") == \
        ["gocloseto(a)", "pickup(a)", "gocloseto(t)", "puton(a,t)"]
