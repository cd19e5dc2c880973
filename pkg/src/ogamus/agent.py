"""The online-grounding agent loop.

Each iteration checks the goal against the belief, (re)plans when needed,
pops exactly one low-level operation from the pending queue, executes it,
and folds the resulting observation back into the belief.  Symbolic effects
of an action are applied once its whole compiled sequence has succeeded.
"""

from __future__ import annotations

import math
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .belief import BeliefState, apply_effects, decide_state, init_belief, note_manipulation
from .belief import predict_state, set_features, update_objects
from .compilation import CompileContext, Compiled, as_compiled
from .navigation import (OccupancyGrid, explore_target, inflate, mark_collision,
                         update_from_depth)
from .pddl import Domain, GoalFormula, GroundAction, entails
from .perception import DETECTOR_PRESETS, PREDICTOR_PRESETS, DetectorProfile, PredictorSet, detect
from .planner import Plan, plan
from .registry import Registry, default_registry
from .world import MOVE_AHEAD, NAVIGATION_OPS, Op, WorldState, sense, step

SUCCESS = "Success"
FAIL = "Fail"
STOP = "Stop"


@dataclass
class AgentConfig:
    goal: GoalFormula | None = None
    max_iter: int = 200
    epsilon: float = 0.5
    detector: DetectorProfile = DETECTOR_PRESETS["perfect"]
    predictors: PredictorSet = PREDICTOR_PRESETS["perfect"]
    manipulation_distance: float = 1.5
    domain: Domain | None = None
    registry: Registry = field(default_factory=default_registry)
    policy: str = "ogamus"  # or "random"
    cell_size: float = 0.25
    fov: float = 90.0
    max_range: float = 5.0
    rotation_step: int = 30
    approach_margin: float = 0.25
    explore_min_radius: float = 5.0
    frontier_bias: float = 0.3
    explore_samples: int = 100
    same_type_merge: bool = False
    max_action_failures: int = 3
    snapshots: bool = True

    def __post_init__(self):
        if self.max_iter < 0:
            raise ValueError("max_iter must be non-negative")
        if self.policy not in ("ogamus", "random"):
            raise ValueError(f"unknown policy {self.policy!r}")

    @property
    def model(self) -> Domain:
        return self.domain if self.domain is not None else self.registry.domain

    @property
    def reach(self) -> float:
        return min(self.manipulation_distance, self.predictors.close_distance) - self.approach_margin


@dataclass
class PendingQueue:
    source: str | GroundAction  # "explore" or the action being executed
    ops: deque
    path: list = field(default_factory=list)
    target: tuple[float, float] | None = None
    executed_ok: list[bool] = field(default_factory=list)

    @property
    def is_explore(self) -> bool:
        return self.source == "explore"

    def advance_path(self, cell) -> None:
        if len(self.path) > 1 and self.path[1] == cell:
            self.path.pop(0)


@dataclass
class EpisodeOutcome:
    status: str
    steps_used: int
    path_length: float
    trace: list[dict]
    final_world: WorldState
    belief: BeliefState
    anchors: dict[str, tuple[str, str | None]] = field(default_factory=dict)
    evicted: set[str] = field(default_factory=set)
    missed: set[str] = field(default_factory=set)
    goto_failures: Counter = field(default_factory=Counter)
    op_log: list[str] = field(default_factory=list)

    @property
    def success(self) -> bool:
        return self.status == SUCCESS


def _r(v: float) -> float:
    return float(round(v, 6))


class _Runner:
    def __init__(self, world: WorldState, config: AgentConfig, rng: np.random.Generator):
        if config.goal is None:
            raise ValueError("the agent needs a goal")
        self.world = world
        self.cfg = config
        self.rng = rng
        reg = config.registry
        self.belief = init_belief(config.predictors, config.epsilon, types=reg.types,
                                  extra_predictors=tuple(reg.predictors),
                                  same_type_merge=config.same_type_merge, fov=config.fov)
        self.belief.features.occupancy = OccupancyGrid(config.cell_size)
        self.ctx = CompileContext(self.belief, config.reach, config.manipulation_distance,
                                  config.rotation_step)
        self.queue: PendingQueue | None = None
        self.blocked: set[str] = set()
        self.failures: Counter = Counter()
        self.out = EpisodeOutcome(FAIL, 0, 0.0, [], world, self.belief)
        self._plan_cache: dict = {}

    # planning -------------------------------------------------------------
    def _plan(self) -> Plan | None:
        b = self.belief
        pose = b.features.pose
        cell = b.features.occupancy.cell_of(pose.x, pose.y)
        key = (frozenset(b.state), tuple(b.records), frozenset(self.blocked), cell,
               tuple(b.records[c].est_position for c in b.records))
        if key in self._plan_cache:
            return self._plan_cache[key]

        def cost(binding):
            return sum(math.dist(pose.position, b.records[c].est_position)
                       for c in binding.values() if c in b.records)

        p = plan(self.cfg.model, b.constants, b.state, self.cfg.goal, cost, exclude=self.blocked)
        if len(self._plan_cache) > 256:
            self._plan_cache.clear()
        self._plan_cache[key] = p
        return p

    def _queue_valid(self) -> bool:
        q = self.queue
        if q is None or not q.ops:
            return False
        grid = self.belief.features.occupancy
        if grid.path_blocked(q.path[1:]):
            return False
        if not q.is_explore and any(c not in self.belief.records for c in q.source.binding):
            return False
        return True

    def _explore(self) -> PendingQueue:
        b = self.belief
        grid, pose = b.features.occupancy, b.features.pose
        blocked = inflate(grid, keep=[grid.cell_of(pose.x, pose.y)]) if b.features.holding else set()
        _, ops, path = explore_target(grid, pose, self.rng, self.cfg.explore_min_radius,
                                      self.cfg.frontier_bias, self.cfg.explore_samples, blocked)
        return PendingQueue("explore", deque(ops), list(path))

    def _compile(self, action: GroundAction) -> Compiled:
        compiler = self.cfg.registry.compilers.get(action.name)
        if compiler is None:
            return Compiled([])
        return as_compiled(compiler(action, self.ctx))

    def _choose(self, rec: dict) -> Op:
        if not self._queue_valid():
            if self.queue is not None and self.queue.is_explore:
                self.blocked.clear()
            self.queue = None
        p = self._plan()
        rec["plan"] = None if p is None else [str(s) for s in p]
        if p is None:
            if self.queue is not None and not self.queue.is_explore:
                self.queue = None
            if self.queue is None:
                self.queue = self._explore()
        else:
            first = p[0]
            # stay committed to an action the new plan still uses, which avoids
            # flip-flopping between equally good first steps
            if self.queue is not None and (self.queue.is_explore or self.queue.source not in p):
                self.queue = None
            if self.queue is None:
                compiled = self._compile(first)
                if not compiled.ops:
                    rec["compile_failure"] = str(first)
                    self._note_goto_failure(first)
                    self.blocked.add(str(first))
                    self.queue = self._explore()
                else:
                    self.queue = PendingQueue(first, deque(compiled.ops), list(compiled.path),
                                              compiled.target)
        rec["mode"] = "explore" if self.queue.is_explore else "plan"
        if not self.queue.is_explore:
            rec["action"] = str(self.queue.source)
        return self.queue.ops.popleft()

    def _note_goto_failure(self, action: GroundAction) -> None:
        if action.name == "gocloseto":
            self.out.goto_failures[action.binding[0]] += 1

    # perception -----------------------------------------------------------
    def _perceive(self, op: Op, ok: bool, it: int) -> None:
        cfg, b = self.cfg, self.belief
        obs = sense(self.world, ok)
        pose = obs.agent_pose
        set_features(b, pose, ok, obs.holding, op.name)
        grid = b.features.occupancy
        update_from_depth(grid, pose, obs.depth_scan, cfg.fov, cfg.max_range)
        if op.name == MOVE_AHEAD.name and not ok:
            mark_collision(grid, pose)
        dets = detect(obs, cfg.detector, self.rng)
        before = {c: r.misses for c, r in b.records.items()}
        update_objects(b, dets, it)
        for c, r in b.records.items():
            if r.misses > before.get(c, 0):
                self.out.missed.add(c)
        self.out.missed.update(b.last_evicted)
        self.out.evicted.update(b.last_evicted)
        for c in b.last_new:
            self.out.anchors[c] = b.anchors[c]
        if op.x is not None:
            note_manipulation(b, (op.x, op.y))
        decide_state(b, predict_state(b, self.world, self.rng))

    # main loop ------------------------------------------------------------
    def run(self) -> EpisodeOutcome:
        cfg, b, out = self.cfg, self.belief, self.out
        moves = 0
        for it in range(cfg.max_iter):
            rec: dict = {"i": it}
            if cfg.policy == "random":
                # the trivial baseline ignores its belief: Stop is just one more uniform draw
                k = int(self.rng.integers(len(NAVIGATION_OPS) + 1))
                if k == len(NAVIGATION_OPS):
                    out.status = SUCCESS
                    out.op_log.append(STOP)
                    out.trace.append({"i": it, "mode": "random", "op": STOP})
                    break
                op = NAVIGATION_OPS[k]
                rec["mode"] = "random"
            elif entails(b.state, b.constants, cfg.goal) is not None:
                out.status = SUCCESS
                break
            else:
                op = self._choose(rec)
            self.world, ok = step(self.world, op, cfg.registry.op_handlers)
            out.steps_used += 1
            out.op_log.append(str(op))
            if op.name == MOVE_AHEAD.name and ok:
                moves += 1
            self._perceive(op, ok, it)
            q = self.queue
            if q is not None:
                q.executed_ok.append(ok)
                pose = b.features.pose
                q.advance_path(b.features.occupancy.cell_of(pose.x, pose.y))
                if not ok:
                    if q.is_explore:
                        self.blocked.clear()
                    else:
                        action = q.source
                        if op.name == "PutAt":
                            self.ctx.failed_points.append((op.x, op.y))
                        self.failures[str(action)] += 1
                        self._note_goto_failure(action)
                        if self.failures[str(action)] >= cfg.max_action_failures:
                            self.blocked.add(str(action))
                            self.failures[str(action)] = 0
                    self.queue = None
                elif not q.ops:
                    if not q.is_explore and all(c in b.records for c in q.source.binding):
                        self._finish_action(q.source, op)
                        rec["effects"] = str(q.source)
                    else:
                        self.blocked.clear()
                    self.queue = None
            rec.update({
                "op": str(op), "ok": ok, "n_constants": len(b.records), "n_atoms": len(b.state),
                "pose": [_r(b.features.pose.x), _r(b.features.pose.y), b.features.pose.heading],
                "new": [[c, out.anchors[c][1]] for c in b.last_new],
                "evicted": list(b.last_evicted),
                "merged": [list(m) for m in b.last_merged],
            })
            if cfg.snapshots:
                rec["belief"] = b.snapshot()
            out.trace.append(rec)
        out.path_length = moves * self.world.params.step_length
        out.final_world = self.world
        return out

    def _finish_action(self, action: GroundAction, last: Op) -> None:
        b = self.belief
        self.failures.pop(str(action), None)
        for a in action.delete:
            # the carried object now rests where it was put
            if a.predicate == "holding" and a.args and a.args[0] in b.records and last.x is not None:
                b.records[a.args[0]].est_position = (last.x, last.y)
        apply_effects(b, action)


def run_episode(world: WorldState, config: AgentConfig,
                rng: np.random.Generator | int | None = None) -> EpisodeOutcome:
    """Run one episode; ``rng`` (a generator or a seed) drives all agent-side randomness."""
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    return _Runner(world, config, rng).run()


def random_config(config: AgentConfig) -> AgentConfig:
    from dataclasses import replace
    return replace(config, policy="random")
