"""Run configuration: named profiles plus YAML overrides for every threshold."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .perception import DETECTOR_PRESETS, PREDICTOR_PRESETS, DetectorProfile, PredictorSet
from .world import ITHOR_SCENES, OBJECT_TYPES, SCENE_PROFILES, SimParams

PROFILES = ("perfect", "ithor", "robothor")


@dataclass
class RunConfig:
    profile: str = "perfect"
    max_iter: int | None = None  # 200, or 500 for robothor
    epsilon: float = 0.5
    cell_size: float = 0.25
    merge_distance: float = 0.2
    manipulation_distance: float | None = None  # 1.5, or 1.0 for robothor
    close_distance: float | None = None  # follows the manipulation distance
    precision: float | None = None
    recall: float | None = None
    position_sigma: float | None = None
    on_flip_rate: float | None = None
    open_flip_rate: float | None = None
    scenes: tuple[str, ...] | None = None
    same_type_merge: bool = False
    actuator_failure_rate: float = 0.0
    workers: int = 1
    agent_seed_offset: int = 1

    def __post_init__(self):
        if self.profile not in PROFILES:
            raise ValueError(f"unknown profile {self.profile!r}; choose one of {PROFILES}")
        if self.scenes is not None:
            self.scenes = tuple(self.scenes)
            for s in self.scenes:
                if s not in SCENE_PROFILES:
                    raise ValueError(f"unknown scene profile {s!r}")
        if abs(self.cell_size - SimParams().step_length) > 1e-12:
            raise ValueError("cell_size must equal the 0.25 m step so one MoveAhead spans one cell")

    @property
    def robothor(self) -> bool:
        return self.profile == "robothor"

    def resolved_max_iter(self) -> int:
        if self.max_iter is not None:
            return self.max_iter
        return 500 if self.robothor else 200

    def resolved_manipulation(self) -> float:
        if self.manipulation_distance is not None:
            return self.manipulation_distance
        return 1.0 if self.robothor else 1.5

    def resolved_scenes(self) -> tuple[str, ...]:
        if self.scenes:
            return self.scenes
        return ("apartment",) if self.robothor else ITHOR_SCENES

    def fp_type_pool(self) -> tuple[str, ...]:
        names = set()
        for s in self.resolved_scenes():
            prof = SCENE_PROFILES[s]
            names |= {t for t, _, _ in prof.furniture} | {t for t, _, _ in prof.items}
        return tuple(sorted(n for n in names if n in OBJECT_TYPES))

    def detector(self) -> DetectorProfile:
        base = DETECTOR_PRESETS[self.profile]
        kw = {k: getattr(self, k) for k in ("precision", "recall", "position_sigma")
              if getattr(self, k) is not None}
        return dataclasses.replace(base, fp_type_pool=self.fp_type_pool(), **kw)

    def predictors(self) -> PredictorSet:
        base = PREDICTOR_PRESETS[self.profile]
        kw = {k: getattr(self, k) for k in ("on_flip_rate", "open_flip_rate")
              if getattr(self, k) is not None}
        close = self.close_distance if self.close_distance is not None \
            else self.resolved_manipulation()
        return dataclasses.replace(base, close_distance=close,
                                   merge_distance=self.merge_distance, **kw)

    def sim_params(self) -> SimParams:
        return SimParams(manipulation_distance=self.resolved_manipulation(),
                         actuator_failure_rate=self.actuator_failure_rate)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        if d["scenes"] is not None:
            d["scenes"] = list(d["scenes"])
        return d


def load_config(path: str | Path | None = None, **overrides) -> RunConfig:
    data: dict = {}
    if path is not None:
        loaded = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
        if not isinstance(loaded, dict):
            raise ValueError("config file must hold a mapping")
        data.update(loaded)
    data.update({k: v for k, v in overrides.items() if v is not None})
    known = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return RunConfig(**data)
