import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ogamus.belief import (AnchoringError, apply_effects, decide_state, init_belief, predict_state,
                           set_features, update_objects)
from ogamus.domains import reference_domain
from ogamus.pddl import atom, ground_action
from ogamus.perception import Detection, PredictorSet, detect, on_ground_truth
from ogamus.world import NAVIGATION_OPS, AgentPose, generate_world, sense, step

DOM = reference_domain()
RNG = np.random.default_rng(0)


def apple(x, y, conf=1.0):
    return Detection("apple", (x, y), conf)


def fresh(*dets, **kw):
    b = init_belief(**kw)
    update_objects(b, list(dets), 0)
    return b


def test_init_is_empty():
    b = init_belief()
    assert len(b.constants) == 0 and len(b.state) == 0
    assert b.features.pose == AgentPose(0.0, 0.0, 0)
    assert b.features.last_op_success is None


def test_init_occupancy_is_all_traversable():
    grid = init_belief().features.occupancy
    assert all(grid.is_traversable((i, j)) for i in range(-30, 31, 3) for j in range(-30, 31, 3))


def test_close_detection_merges():
    b = fresh(apple(1.10, 2.00))
    update_objects(b, [apple(1.00, 2.00)], 1)
    assert b.constants == ["apple0"] and b.last_new == []
    assert b.records["apple0"].est_position == pytest.approx((1.05, 2.00))
    assert b.records["apple0"].last_seen_step == 1


def test_far_detection_founds_a_constant():
    b = fresh(apple(1.00, 2.00))
    update_objects(b, [apple(1.30, 2.00)], 1)
    assert b.constants == ["apple0", "apple1"]


def test_distance_exactly_threshold_is_not_a_match():
    b = fresh(apple(0.0, 0.0))
    update_objects(b, [apple(0.2, 0.0)], 1)
    assert len(b.constants) == 2


def test_nearest_record_wins_and_ties_go_to_older():
    b = fresh(apple(0.0, 0.0), apple(1.0, 0.0))
    update_objects(b, [Detection("mug", (0.9, 0.0), 1.0)], 1)
    assert b.records["apple1"].type_votes["mug"] == 1
    b = fresh(Detection("mug", (0.0, 0.0), 1.0), apple(0.3, 0.0))
    update_objects(b, [Detection("bowl", (0.15, 0.0), 1.0)], 1)
    assert b.records["mug0"].type_votes["bowl"] == 1 and "bowl" not in b.records["apple0"].type_votes


def test_matching_is_one_to_one_within_a_frame():
    b = fresh(Detection("mug", (0.0, 0.0), 1.0))
    update_objects(b, [Detection("bowl", (0.05, 0.0), 0.9), Detection("cup", (-0.05, 0.0), 0.8)], 1)
    assert len(b.constants) == 2


def test_higher_confidence_detection_claims_first():
    b = fresh(Detection("mug", (0.0, 0.0), 1.0))
    update_objects(b, [Detection("cup", (0.01, 0.0), 0.6), Detection("bowl", (0.1, 0.0), 0.9)], 1)
    assert b.records["mug0"].type_votes["bowl"] == 1


def test_confidence_weighted_average():
    b = fresh(apple(0.0, 0.0, 0.9))
    update_objects(b, [apple(0.1, 0.0, 0.3)], 1)
    assert b.records["apple0"].est_position[0] == pytest.approx(0.3 * 0.1 / 1.2)


def test_move_recomputes_every_close_atom():
    b = fresh(apple(1.0, 0.0), apple(3.0, 0.0), apple(0.0, 2.0))
    decide_state(b, predict_state(b, None, RNG))
    set_features(b, AgentPose(0.25, 0.0, 0), True, False, "MoveAhead")
    delta = predict_state(b, None, RNG)
    assert sorted(map(str, delta)) == [f"(closetoagent apple{k})" for k in range(3)]


def test_no_change_gives_empty_delta():
    b = fresh(apple(1.0, 0.0))
    predict_state(b, None, RNG)
    assert predict_state(b, None, RNG) == {}


def test_merge_reevaluates_survivor():
    b = fresh(apple(1.0, 0.0), apple(1.3, 0.0))
    predict_state(b, None, RNG)
    for t in range(1, 10):
        update_objects(b, [apple(1.15, 0.0)], t)
        if b.last_merged:
            break
    assert b.last_merged == [("apple0", "apple1")]
    delta = predict_state(b, None, RNG)
    assert {str(a) for a in delta} >= {"(apple apple0)", "(pickable apple0)", "(visible apple0)",
                                      "(closetoagent apple0)"}
    assert all("apple1" not in a.args for a in delta)
    assert all("apple1" not in a.args for a in b.state)


@pytest.mark.parametrize("p,eps,admitted", [(0.95, 0.1, True), (0.9, 0.1, False),
                                            (1.0, 0.0, True), (0.999, 0.0, False)])
def test_decide_threshold(p, eps, admitted):
    b = fresh(apple(1.0, 0.0), epsilon=eps)
    a = atom("visible", "apple0")
    decide_state(b, {a: p})
    assert (a in b.state) == admitted


def test_decide_leaves_unevaluated_atoms():
    b = fresh(apple(1.0, 0.0))
    decide_state(b, {atom("visible", "apple0"): 1.0})
    decide_state(b, {atom("apple", "apple0"): 1.0})
    assert atom("visible", "apple0") in b.state
    decide_state(b, {atom("visible", "apple0"): 0.2})
    assert atom("visible", "apple0") not in b.state


def test_goto_effects():
    b = fresh(apple(3.0, 0.0))
    b.state = {atom("apple", "apple0")}
    apply_effects(b, ground_action(DOM.schema("gocloseto"), ["apple0"]))
    assert b.state >= {atom("closetoagent", "apple0"), atom("visible", "apple0")}


def test_pickup_effects():
    b = fresh(apple(1.0, 0.0))
    b.state = {atom("handfree")}
    apply_effects(b, ground_action(DOM.schema("pickup"), ["apple0"]))
    assert atom("holding", "apple0") in b.state and atom("handfree") not in b.state
    assert b.held == "apple0"


def test_effects_override_perception():
    b = fresh(Detection("box", (1.0, 0.0), 1.0))
    decide_state(b, {atom("isopen", "box0"): 0.0, atom("isclosed", "box0"): 1.0})
    apply_effects(b, ground_action(DOM.schema("openobj"), ["box0"]))
    assert atom("isopen", "box0") in b.state and atom("isclosed", "box0") not in b.state


def test_effects_on_unknown_constant_raise():
    with pytest.raises(AnchoringError):
        apply_effects(init_belief(), ground_action(DOM.schema("gocloseto"), ["ghost"]))


# a frame of well separated detections: nothing in it can be a duplicate of anything else
frames = st.lists(st.tuples(st.integers(-8, 8), st.integers(-8, 8), st.floats(0.05, 1.0),
                            st.sampled_from(["apple", "mug", "box"])),
                  max_size=8, unique_by=lambda t: (t[0], t[1]))


@settings(max_examples=100, deadline=None)
@given(frames)
def test_repeated_frame_is_idempotent(frame):
    dets = [Detection(t, (0.5 * i, 0.5 * j), c) for i, j, c, t in frame]
    b = fresh(*dets)
    before = {c: r.est_position for c, r in b.records.items()}
    update_objects(b, dets, 1)
    assert b.last_new == [] and set(b.records) == set(before)
    for c, pos in before.items():
        assert math.dist(pos, b.records[c].est_position) <= 1e-9


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 1000), st.lists(st.tuples(st.floats(-3, 3), st.floats(-3, 3), st.floats(0.1, 1),
                                                st.sampled_from(["apple", "mug", "table", "box"])),
                                      max_size=5), st.integers(1, 6))
def test_state_never_mentions_unknown_constants(seed, frame, repeats):
    rng = np.random.default_rng(seed)
    b = init_belief(PredictorSet())
    for t in range(repeats):
        dets = [Detection(ty, (x + rng.normal(0, 0.1), y + rng.normal(0, 0.1)), c)
                for x, y, c, ty in frame if rng.random() < 0.7]
        set_features(b, AgentPose(float(rng.integers(-4, 5)) * 0.25, 0.0, 30 * int(rng.integers(12))),
                     True, False, "MoveAhead")
        update_objects(b, dets, t)
        decide_state(b, predict_state(b, None, rng))
        assert all(c in b.records for a in b.state for c in a.args)


@pytest.mark.parametrize("seed", range(4))
def test_noiseless_belief_is_true_in_the_world(seed):
    from ogamus.perception import DETECTOR_PRESETS, PREDICTOR_PRESETS
    world = generate_world(seed, "kitchen")
    rng = np.random.default_rng(seed)
    b = init_belief(PREDICTOR_PRESETS["perfect"], 0.5)
    moves = np.random.default_rng(100 + seed).integers(0, 3, 60)
    for t, k in enumerate(moves):
        world, ok = step(world, NAVIGATION_OPS[k])
        obs = sense(world, ok)
        set_features(b, obs.agent_pose, ok, obs.holding, NAVIGATION_OPS[k].name)
        update_objects(b, detect(obs, DETECTOR_PRESETS["perfect"], rng), t)
        decide_state(b, predict_state(b, world, rng))
        seen = {d.object_id for d in obs.detections_raw}
        ax, ay = world.agent.position
        for a in b.state:
            objs = [world.get(b.records[c].source_id) for c in a.args]
            if a.predicate == "visible":
                assert objs[0].id in seen
            elif a.predicate == "closetoagent":
                assert math.dist(objs[0].position, (ax, ay)) < 1.5 + 1e-9
            elif a.predicate == "on":
                assert on_ground_truth(objs[0], objs[1])
            elif a.predicate == "isopen":
                assert objs[0].is_open
            elif a.predicate == "isclosed":
                assert not objs[0].is_open
            elif len(objs) == 1 and a.predicate == b.records[a.args[0]].object_type:
                assert objs[0].object_type == a.predicate
