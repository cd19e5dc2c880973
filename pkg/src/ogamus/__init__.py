"""Online grounding of symbolic action models for embodied agents.

The agent starts with a lifted STRIPS action model and a goal, discovers
the objects of an unknown 2D household scene from noisy perception,
plans over what it believes, and compiles each symbolic step into
low-level navigation and manipulation operations.
"""

from .agent import AgentConfig, EpisodeOutcome, run_episode
from .belief import BeliefState, init_belief, update_objects
from .config import RunConfig, load_config
from .domains import reference_domain, task_goal
from .harness import (EpisodeRecord, Metrics, TaskSpec, compute_metrics, generate_episodes,
                      run_suite)
from .pddl import Atom, Domain, GoalFormula, entails, parse_domain, parse_goal
from .planner import plan, validate_plan
from .registry import Registry, default_registry
from .world import WorldState, generate_world, step

__version__ = "0.1.0"

__all__ = [
    "AgentConfig", "Atom", "BeliefState", "Domain", "EpisodeOutcome", "EpisodeRecord",
    "GoalFormula", "Metrics", "Registry", "RunConfig", "TaskSpec", "WorldState",
    "compute_metrics", "default_registry", "entails", "generate_episodes", "generate_world",
    "init_belief", "load_config", "parse_domain", "parse_goal", "plan", "reference_domain",
    "run_episode", "run_suite", "step", "task_goal", "update_objects", "validate_plan",
]
