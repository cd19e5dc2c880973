"""Noisy stand-ins for the object detector and the predicate predictors.

The detector keeps each truly visible object with probability ``recall``,
jitters its position, and injects false positives at the rate that makes the
expected precision match the profile.  Predicate predictors are flip-noise
oracles over the simulator's ground truth.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .world import AgentPose, Observation, WorldObject

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class DetectorProfile:
    precision: float = 1.0
    recall: float = 1.0
    position_sigma: float = 0.0
    max_range: float = 5.0
    fov: float = 90.0
    fp_type_pool: tuple[str, ...] = ()

    def __post_init__(self):
        if not (0 < self.precision <= 1 and 0 < self.recall <= 1):
            raise ValueError("precision and recall must lie in (0, 1]")
        if self.position_sigma < 0:
            raise ValueError("position_sigma must be non-negative")


@dataclass(frozen=True)
class PredictorSet:
    on_flip_rate: float = 0.0168
    open_flip_rate: float = 0.075
    close_distance: float = 1.5
    merge_distance: float = 0.2

    def __post_init__(self):
        for rate in (self.on_flip_rate, self.open_flip_rate):
            if not 0 <= rate < 1:
                raise ValueError("flip rates must lie in [0, 1)")
        if self.close_distance <= 0 or self.merge_distance <= 0:
            raise ValueError("distances must be positive")


@dataclass(frozen=True)
class Detection:
    object_type: str
    est_position: tuple[float, float]
    confidence: float
    est_size: tuple[float, float] = (0.1, 0.1)
    # ground-truth provenance: read by the oracle predictors and the metrics, never the planner
    source_id: str | None = field(default=None, compare=False)


DETECTOR_PRESETS = {
    "perfect": DetectorProfile(1.0, 1.0, 0.0),
    "ithor": DetectorProfile(0.5099, 0.6518, 0.05),
    "robothor": DetectorProfile(0.5902, 0.6906, 0.05),
}

PREDICTOR_PRESETS = {
    "perfect": PredictorSet(on_flip_rate=0.0, open_flip_rate=0.0),
    "ithor": PredictorSet(),
    "robothor": PredictorSet(close_distance=1.0),
}


def preset(name: str, fp_type_pool: tuple[str, ...] = ()) -> tuple[DetectorProfile, PredictorSet]:
    try:
        det = DETECTOR_PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown perception profile {name!r}") from None
    return replace(det, fp_type_pool=tuple(fp_type_pool)), PREDICTOR_PRESETS[name]


def detection_confidence(distance: float, max_range: float) -> float:
    return 0.5 + 0.5 * math.exp(-distance / max_range)


def detect(observation: Observation, profile: DetectorProfile,
           rng: np.random.Generator) -> list[Detection]:
    out = []
    raw = observation.detections_raw
    for r in raw:
        if profile.recall < 1.0 and rng.random() >= profile.recall:
            continue
        x, y = r.position
        if profile.position_sigma > 0:
            dx, dy = rng.normal(0.0, profile.position_sigma, 2)
            x, y = x + dx, y + dy
        out.append(Detection(r.object_type, (float(x), float(y)),
                             detection_confidence(r.distance, profile.max_range),
                             tuple(float(s) for s in r.size), r.object_id))
    if profile.precision < 1.0 and raw and profile.fp_type_pool:
        lam = profile.recall * len(raw) * (1 - profile.precision) / profile.precision
        for _ in range(int(rng.poisson(lam))):
            out.append(_false_positive(observation, profile, rng))
    return out


def _false_positive(obs: Observation, profile: DetectorProfile, rng) -> Detection:
    pose = obs.agent_pose
    scan = obs.depth_scan
    k = int(rng.integers(len(scan))) if scan else 0
    offset = -profile.fov / 2 + (profile.fov * k / (len(scan) - 1) if len(scan) > 1 else 0.0)
    free = min(scan[k], profile.max_range) if scan else profile.max_range
    dist = float(rng.uniform(min(0.3, free), max(free, 0.3)))
    h = math.radians(pose.heading + offset)
    x, y = pose.x + dist * math.cos(h), pose.y + dist * math.sin(h)
    otype = profile.fp_type_pool[int(rng.integers(len(profile.fp_type_pool)))]
    size = float(rng.uniform(0.1, 0.5))
    return Detection(otype, (x, y), float(rng.uniform(0.2, 0.6)), (size, size), None)


def _flip_oracle(truth: bool, rate: float, rng) -> float:
    if rate > 0 and rng.random() < rate:
        truth = not truth
    return 1.0 - rate if truth else rate


def on_ground_truth(first: WorldObject | None, second: WorldObject | None,
                    held: str | None = None) -> bool:
    if first is None or second is None or first.id in (held, second.id):
        return False
    if not second.surface or first.obstacle:
        return False
    if first.resting_on == second.id:
        return True
    # unsupported but lying on the footprint (2D reading of "just above it")
    return first.resting_on is None and second.footprint.contains(*first.position, margin=0.05)


def predict_on(first: WorldObject | None, second: WorldObject | None, predictors: PredictorSet,
               rng: np.random.Generator, held: str | None = None) -> float:
    """Probability that ``first`` rests on ``second``; objects come from the anchor oracle."""
    return _flip_oracle(on_ground_truth(first, second, held), predictors.on_flip_rate, rng)


def predict_open(obj: WorldObject | None, predictors: PredictorSet,
                 rng: np.random.Generator) -> float:
    if obj is None:
        # a phantom constant: the classifier still answers, from noise alone
        return _flip_oracle(False, predictors.open_flip_rate, rng)
    if not obj.openable:
        log.warning("open predictor queried on non-openable %s", obj.object_type)
        return 0.0
    return _flip_oracle(obj.is_open, predictors.open_flip_rate, rng)


def predict_close_to_agent(est_position: tuple[float, float], pose: AgentPose,
                           predictors: PredictorSet) -> float:
    d = math.dist(est_position, (pose.x, pose.y))
    return 1.0 if d < predictors.close_distance else 0.0
