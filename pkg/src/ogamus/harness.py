"""Episode generation, ground-truth scoring, metrics and failure analysis."""

from __future__ import annotations

import dataclasses
import json
import logging
import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .agent import AgentConfig, EpisodeOutcome, run_episode
from .config import RunConfig
from .domains import FAMILIES, task_goal
from .pddl import GoalFormula
from .registry import Registry, default_registry
from .world import (LATTICE, WorldObject, WorldState, _place_item, bfs_distances, free_cells,
                    generate_world, lattice_cell, parse_world, viewing_cells, visible_objects)

log = logging.getLogger(__name__)

CATEGORIES = ("Confused", "NotFound", "NotInspected", "NotReachable", "Others")


@dataclass(frozen=True)
class TaskSpec:
    family: str
    type1: str
    type2: str | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown task family {self.family!r}")
        if (self.type2 is not None) != (self.family == "on"):
            raise ValueError("type2 is given exactly for the on family")

    def goal(self) -> GoalFormula:
        return task_goal(self.family, self.type1, self.type2)

    def goal_types(self) -> tuple[str, ...]:
        return (self.type1,) if self.type2 is None else (self.type1, self.type2)

    def __str__(self) -> str:
        return " ".join(x for x in (self.family, self.type1, self.type2) if x)


@dataclass
class Episode:
    index: int
    seed: int
    world: WorldState
    task: TaskSpec
    config: AgentConfig
    agent_seed: int
    run: RunConfig | None = None


@dataclass
class EpisodeRecord:
    index: int
    seed: int
    task: TaskSpec
    status: str
    ground_truth_success: bool
    shortest_path_len: float
    agent_path_len: float
    final_dts: float
    error_category: str | None
    steps_used: int
    outcome: EpisodeOutcome | None = field(default=None, repr=False, compare=False)

    @property
    def belief_success(self) -> bool:
        return self.status == "Success"

    def to_dict(self) -> dict:
        return {"index": self.index, "seed": self.seed, "task": str(self.task),
                "status": self.status, "ground_truth_success": self.ground_truth_success,
                "shortest_path_len": round(self.shortest_path_len, 6),
                "agent_path_len": round(self.agent_path_len, 6),
                "final_dts": round(self.final_dts, 6), "error_category": self.error_category,
                "steps_used": self.steps_used}

    @classmethod
    def from_dict(cls, d: dict) -> "EpisodeRecord":
        parts = d["task"].split()
        task = TaskSpec(parts[0], parts[1], parts[2] if len(parts) > 2 else None)
        return cls(d["index"], d["seed"], task, d["status"], d["ground_truth_success"],
                   d["shortest_path_len"], d["agent_path_len"], d["final_dts"],
                   d["error_category"], d["steps_used"])


# --------------------------------------------------------------------------
# ground truth

def _near_and_seen(world: WorldState, o: WorldObject, manip: float, seen: set[str]) -> bool:
    return o.id in seen and math.dist(world.agent.position, o.position) < manip


def ground_truth_success(world: WorldState, task: TaskSpec,
                         manipulation_distance: float | None = None) -> bool:
    manip = world.params.manipulation_distance if manipulation_distance is None \
        else manipulation_distance
    if task.family == "on":
        for o in world.objects:
            if o.object_type == task.type1 and o.resting_on is not None \
                    and world.get(o.resting_on).object_type == task.type2:
                return True
        return False
    seen = {o.id for o in visible_objects(world)}
    for o in world.objects:
        if o.object_type != task.type1 or not _near_and_seen(world, o, manip, seen):
            continue
        if task.family == "objnav":
            return True
        if task.family == "open" and o.is_open:
            return True
        if task.family == "close" and not o.is_open:
            return True
    return False


def _goal_cells(world: WorldState, objs: Iterable[WorldObject], free, manip) -> set:
    out = set()
    for o in objs:
        out.update(viewing_cells(world, o, free, manip))
    return out


def shortest_path_length(world: WorldState, task: TaskSpec,
                         manipulation_distance: float | None = None) -> float:
    """Lattice distance (m) from the start to the nearest goal-satisfying cell.

    For the on family: to the nearest viewing cell of a type-1 object, then
    on to the nearest viewing cell of a type-2 surface.
    """
    manip = world.params.manipulation_distance if manipulation_distance is None \
        else manipulation_distance
    free = free_cells(world)
    start = lattice_cell(*world.start.position)
    dist = bfs_distances(free, start)
    firsts = [o for o in world.objects if o.object_type == task.type1 and o.id != world.held]
    cells = _goal_cells(world, firsts, free, manip)
    reach = [(dist[c], c) for c in cells if c in dist]
    if not reach:
        return math.inf
    d1, c1 = min(reach)
    if task.family != "on":
        return d1 * LATTICE
    seconds = [o for o in world.objects if o.object_type == task.type2]
    cells2 = _goal_cells(world, seconds, free, manip)
    dist2 = bfs_distances(free, c1)
    reach2 = [dist2[c] for c in cells2 if c in dist2]
    if not reach2:
        return math.inf
    return (d1 + min(reach2)) * LATTICE


def distance_to_success(world: WorldState, task: TaskSpec, success: bool) -> float:
    if success:
        return 0.0
    agent = world.agent.position
    if task.family == "on":
        best = math.inf
        for o in world.objects:
            if o.object_type != task.type1:
                continue
            pos = agent if o.id == world.held else o.position
            for s in world.objects:
                if s.object_type == task.type2 and s.id != o.id:
                    best = min(best, s.footprint.distance_to_point(*pos))
        return best
    ds = [math.dist(agent, o.position) for o in world.objects if o.object_type == task.type1]
    return min(ds) if ds else math.inf


def classify_failure(outcome: EpisodeOutcome, task: TaskSpec, world: WorldState,
                     ground_truth: bool) -> str | None:
    """One of the five failure categories, or ``None`` for a true success."""
    if ground_truth:
        return None
    if outcome.success:
        return "Confused"
    real: dict[str, set[str]] = {t: set() for t in task.goal_types()}
    for c, (otype, src) in outcome.anchors.items():
        if src is None:
            continue
        try:
            truth = world.get(src).object_type
        except KeyError:
            continue
        if truth == otype and truth in real:
            real[truth].add(c)
    if any(not cs for cs in real.values()):
        return "NotFound"
    anchored = set().union(*real.values())
    if anchored & outcome.missed:
        return "NotInspected"
    if any(outcome.goto_failures.get(c, 0) for c in anchored):
        return "NotReachable"
    return "Others"


# --------------------------------------------------------------------------
# metrics

@dataclass(frozen=True)
class Metrics:
    n: int
    success: float
    dts: float
    spl: float
    belief_success: float
    categories: dict

    def table(self, label: str = "") -> str:
        head = f"{'run':<24}{'N':>6}{'Success':>10}{'DTS':>10}{'SPL':>10}"
        row = f"{label:<24}{self.n:>6}{self.success:>10.4f}{self.dts:>10.4f}{self.spl:>10.4f}"
        cats = "  ".join(f"{k}={self.categories.get(k, 0)}" for k in CATEGORIES)
        return f"{head}\n{row}\nfailures: {cats}\n"


def spl_term(success: bool, p_star: float, p: float) -> float:
    if not success:
        return 0.0
    if p_star <= 0:
        return 1.0
    return p_star / max(p, p_star)


def compute_metrics(records: Sequence[EpisodeRecord]) -> Metrics:
    if not records:
        raise ValueError("no records")
    n = len(records)
    succ = sum(r.ground_truth_success for r in records) / n
    dts = sum(r.final_dts for r in records) / n
    spl = sum(spl_term(r.ground_truth_success, r.shortest_path_len, r.agent_path_len)
              for r in records) / n
    bsucc = sum(r.belief_success for r in records) / n
    cats = Counter(r.error_category for r in records if r.error_category is not None)
    return Metrics(n, succ, dts, spl, bsucc, dict(cats))


# --------------------------------------------------------------------------
# generation and running

def _sub_seed(seed: int, *keys: int) -> int:
    return int(np.random.SeedSequence([int(seed), *keys]).generate_state(1)[0])


def agent_config(run: RunConfig, goal: GoalFormula, registry: Registry | None = None,
                 policy: str = "ogamus", snapshots: bool = True) -> AgentConfig:
    return AgentConfig(goal=goal, max_iter=run.resolved_max_iter(), epsilon=run.epsilon,
                       detector=run.detector(), predictors=run.predictors(),
                       manipulation_distance=run.resolved_manipulation(),
                       registry=registry or default_registry(), policy=policy,
                       cell_size=run.cell_size, same_type_merge=run.same_type_merge,
                       snapshots=snapshots)


def _fits_somewhere(world: WorldState, otype, surfaces) -> bool:
    rng = np.random.default_rng(0)
    return any(_place_item(rng, otype, s, world.objects) is not None for s in surfaces)


def _draw_task(world: WorldState, family: str, rng, registry: Registry) -> TaskSpec | None:
    present = sorted({o.object_type for o in world.objects})
    objs = world.objects
    if family == "objnav":
        pool = present
    elif family in ("open", "close"):
        pool = sorted({o.object_type for o in objs if o.openable})
    else:
        pool = sorted({o.object_type for o in objs if o.pickable})
    if not pool:
        return None
    t1 = pool[int(rng.integers(len(pool)))]
    if family != "on":
        return TaskSpec(family, t1)
    types = registry.types
    surfaces_by_type: dict[str, list] = {}
    for o in objs:
        if o.surface:
            surfaces_by_type.setdefault(o.object_type, []).append(o)
    t2_pool = []
    for t2, surfs in sorted(surfaces_by_type.items()):
        if any(o.object_type == t1 and o.resting_on is not None
               and world.get(o.resting_on).object_type == t2 for o in objs):
            continue
        if _fits_somewhere(world, types[t1], surfs):
            t2_pool.append(t2)
    if not t2_pool:
        return None
    return TaskSpec(family, t1, t2_pool[int(rng.integers(len(t2_pool)))])


def _prepare_world(world: WorldState, task: TaskSpec) -> WorldState:
    if task.family not in ("open", "close"):
        return world
    want_open = task.family == "close"
    objs = [dataclasses.replace(o, is_open=want_open) if o.object_type == task.type1 else o
            for o in world.objects]
    return world.with_objects(objs)


def generate_episodes(family: str, count: int, seed: int, run: RunConfig | None = None,
                      registry: Registry | None = None, policy: str = "ogamus",
                      snapshots: bool = True) -> list[Episode]:
    """Deterministic list of feasible episodes for one task family."""
    if count <= 0:
        raise ValueError("count must be positive")
    run = run or RunConfig()
    registry = registry or default_registry()
    scenes = run.resolved_scenes()
    params = run.sim_params()
    out = []
    for k in range(count):
        for attempt in range(100):
            ep_seed = _sub_seed(seed, k, attempt)
            rng = np.random.default_rng(ep_seed)
            scene = scenes[int(rng.integers(len(scenes)))]
            world = generate_world(ep_seed, scene, params, registry.types)
            task = _draw_task(world, family, rng, registry)
            if task is None:
                continue
            world = _prepare_world(world, task)
            if not math.isfinite(shortest_path_length(world, task)):
                continue
            cfg = agent_config(run, task.goal(), registry, policy, snapshots)
            out.append(Episode(k, ep_seed, world, task, cfg,
                               _sub_seed(ep_seed, run.agent_seed_offset), run))
            break
        else:
            raise RuntimeError(f"no feasible {family} episode for index {k}")
    return out


def evaluate(episode: Episode, outcome: EpisodeOutcome) -> EpisodeRecord:
    final = outcome.final_world
    manip = episode.config.manipulation_distance
    gt = ground_truth_success(final, episode.task, manip)
    p_star = shortest_path_length(episode.world, episode.task, manip)
    return EpisodeRecord(
        episode.index, episode.seed, episode.task, outcome.status, gt, p_star,
        outcome.path_length, distance_to_success(final, episode.task, gt),
        classify_failure(outcome, episode.task, final, gt), outcome.steps_used, outcome)


def _json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def trace_lines(episode: Episode, outcome: EpisodeOutcome, record: EpisodeRecord) -> list[str]:
    cfg = episode.config
    header = {"type": "header", "index": episode.index, "seed": episode.seed,
              "agent_seed": episode.agent_seed, "task": str(episode.task),
              "goal": [str(a) for a in cfg.goal.atoms], "policy": cfg.policy,
              "config": {"max_iter": cfg.max_iter, "epsilon": cfg.epsilon,
                         "manipulation_distance": cfg.manipulation_distance,
                         "detector": dataclasses.asdict(cfg.detector),
                         "predictors": dataclasses.asdict(cfg.predictors)},
              "run": None if episode.run is None else episode.run.to_dict(),
              "world": episode.world.to_text()}
    lines = [_json(header)]
    for rec in outcome.trace:
        lines.append(_json({"type": "step", **rec}))
    b = outcome.belief
    pose = b.features.pose
    grid = b.features.occupancy
    end = {"type": "end", "record": record.to_dict(), "ops": outcome.op_log,
           "occupancy": grid.to_text(grid.cell_of(pose.x, pose.y)),
           "final_world": outcome.final_world.to_text()}
    lines.append(_json(end))
    return lines


def run_one(episode: Episode, trace_dir: str | Path | None = None) -> EpisodeRecord:
    outcome = run_episode(episode.world, episode.config, episode.agent_seed)
    record = evaluate(episode, outcome)
    if trace_dir is not None:
        path = Path(trace_dir) / f"episode_{episode.index:05d}.jsonl"
        path.write_text("\n".join(trace_lines(episode, outcome, record)) + "\n", encoding="utf-8")
    return record


def _run_one_light(args) -> EpisodeRecord:
    rec = run_one(*args)
    rec.outcome = None  # keep inter-process traffic small
    return rec


def run_suite(episodes: Sequence[Episode], workers: int = 1,
              trace_dir: str | Path | None = None) -> list[EpisodeRecord]:
    """Run episodes, optionally in parallel; records come back in episode order."""
    if trace_dir is not None:
        Path(trace_dir).mkdir(parents=True, exist_ok=True)
    if workers <= 1:
        return [run_one(e, trace_dir) for e in episodes]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        records = list(pool.map(_run_one_light, [(e, trace_dir) for e in episodes]))
    return sorted(records, key=lambda r: r.index)


def write_records(records: Sequence[EpisodeRecord], path: str | Path) -> None:
    Path(path).write_text("".join(_json(r.to_dict()) + "\n" for r in records), encoding="utf-8")


def read_records(path: str | Path) -> list[EpisodeRecord]:
    return [EpisodeRecord.from_dict(json.loads(line))
            for line in Path(path).read_text(encoding="utf-8").splitlines() if line.strip()]


def read_trace(path: str | Path) -> tuple[dict, list[dict], dict]:
    """Split a trace file into its header, step records and end record."""
    rows = [json.loads(line) for line in Path(path).read_text(encoding="utf-8").splitlines()
            if line.strip()]
    if not rows or rows[0].get("type") != "header" or rows[-1].get("type") != "end":
        raise ValueError(f"{path} is not an episode trace")
    return rows[0], rows[1:-1], rows[-1]


def episode_from_trace(header: dict, registry: Registry | None = None,
                       snapshots: bool = True) -> Episode:
    """Rebuild the episode a trace was recorded from (default registry unless given)."""
    if header.get("run") is None:
        raise ValueError("trace header carries no run configuration")
    run = RunConfig(**header["run"])
    parts = header["task"].split()
    task = TaskSpec(*parts)
    world = parse_world(header["world"], run.sim_params())
    cfg = agent_config(run, task.goal(), registry, header["policy"], snapshots)
    return Episode(header["index"], header["seed"], world, task, cfg, header["agent_seed"], run)
