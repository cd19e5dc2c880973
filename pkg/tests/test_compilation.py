import math

from ogamus.belief import ObjectRecord, init_belief
from ogamus.compilation import (CompileContext, close_action, go_close_to, open_action,
                                pick_up_action, put_on_action, put_on_point)
from ogamus.domains import reference_domain
from ogamus.geometry import Rect
from ogamus.pddl import ground_action
from ogamus.world import AgentPose, WorldState, step

DOM = reference_domain()


def ctx_with(*records, pose=AgentPose()):
    b = init_belief()
    for k, (name, otype, pos, size) in enumerate(records):
        b.records[name] = ObjectRecord(name, pos, otype, 1.0, 0, size, weight=1.0, order=k)
    b.features.pose = pose
    return CompileContext(b)


def act(name, *args):
    return ground_action(DOM.schema(name), list(args))


def test_goto_object_three_metres_ahead():
    ctx = ctx_with(("apple0", "apple", (3.0, 0.0), (0.1, 0.1)))
    out = go_close_to(act("gocloseto", "apple0"), ctx)
    assert sum(op.name == "MoveAhead" for op in out.ops) >= 7
    w = WorldState((), AgentPose(), AgentPose(), Rect(-5, -5, 5, 5))
    for op in out.ops:
        w, ok = step(w, op)
        assert ok
    assert math.dist(w.agent.position, (3.0, 0.0)) < 1.5
    bearing = math.degrees(math.atan2(-w.agent.y, 3.0 - w.agent.x))
    assert abs((bearing - w.agent.heading + 180) % 360 - 180) <= 45


def test_goto_from_odd_heading_ends_facing():
    ctx = ctx_with(("mug0", "mug", (0.0, 2.0), (0.1, 0.1)), pose=AgentPose(0.0, 0.0, 210))
    out = go_close_to(act("gocloseto", "mug0"), ctx)
    w = WorldState((), AgentPose(0.0, 0.0, 210), AgentPose(), Rect(-5, -5, 5, 5))
    for op in out.ops:
        w, _ = step(w, op)
    bearing = math.degrees(math.atan2(2.0 - w.agent.y, -w.agent.x))
    assert abs((bearing - w.agent.heading + 180) % 360 - 180) <= 15 + 1e-9


def test_goto_enclosed_object_compiles_empty():
    ctx = ctx_with(("apple0", "apple", (3.0, 0.0), (0.1, 0.1)))
    grid = ctx.belief.features.occupancy
    grid.occupied = {(i, j) for i in range(3, 22) for j in range(-9, 10)
                     if max(abs(i - 12), abs(j)) == 9}
    out = go_close_to(act("gocloseto", "apple0"), ctx)
    assert out.ops == []


def test_pickup_uses_believed_position():
    ctx = ctx_with(("apple0", "apple", (2.0, 1.0), (0.1, 0.1)))
    ops = pick_up_action(act("pickup", "apple0"), ctx).ops
    assert [(o.name, o.x, o.y) for o in ops] == [("PickUp", 2.0, 1.0)]


def test_open_and_close_target_the_estimate():
    ctx = ctx_with(("box0", "box", (1.0, -1.0), (0.3, 0.3)))
    assert str(open_action(act("openobj", "box0"), ctx).ops[0]) == str(
        close_action(act("closeobj", "box0"), ctx).ops[0]).replace("Close", "Open")


def test_put_point_is_on_the_surface_and_nearest():
    ctx = ctx_with(("apple0", "apple", (0.0, 0.0), (0.08, 0.08)),
                   ("table0", "table", (1.0, 0.0), (0.8, 0.6)))
    x, y = put_on_point(ctx, "apple0", "table0")
    assert 0.6 < x < 1.4 and -0.3 < y < 0.3
    assert x < 0.75  # the near edge comes first
    ops = put_on_action(act("puton", "apple0", "table0"), ctx).ops
    assert (ops[0].name, ops[0].x, ops[0].y) == ("PutAt", x, y)


def test_put_point_avoids_items_and_failed_points():
    ctx = ctx_with(("apple0", "apple", (0.0, 0.0), (0.08, 0.08)),
                   ("table0", "table", (1.0, 0.0), (0.8, 0.6)))
    first = put_on_point(ctx, "apple0", "table0")
    ctx.failed_points.append(first)
    assert put_on_point(ctx, "apple0", "table0") != first
    ctx.belief.records["mug0"] = ObjectRecord("mug0", first, "mug", 1.0, 0, (0.1, 0.1), order=9)
    ctx.failed_points.clear()
    p = put_on_point(ctx, "apple0", "table0")
    assert max(abs(p[0] - first[0]), abs(p[1] - first[1])) >= 0.09 + 0.03 - 1e-9


def test_put_out_of_reach_is_empty():
    ctx = ctx_with(("apple0", "apple", (0.0, 0.0), (0.08, 0.08)),
                   ("table0", "table", (4.0, 0.0), (0.8, 0.6)))
    assert put_on_action(act("puton", "apple0", "table0"), ctx).ops == []
