"""Extension points: new object types, predicate predictors, actions and low-level ops.

A :class:`Registry` bundles everything an episode consults, so a new task
(say, switching on lamps) is added by registering pieces rather than by
editing the core modules.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .belief import CAPABILITIES, ObjectRecord, PredicateFn, UnaryPredictor
from .compilation import DEFAULT_COMPILERS, Compiler
from .domains import reference_domain
from .pddl import ActionSchema, Domain, PredicateSignature, UndeclaredPredicate, parse_domain
from .world import BUILTIN_OPS, OBJECT_TYPES, ObjectType, OpHandler, WorldObject
from .geometry import Rect


class RegistryError(ValueError):
    pass


@dataclass
class Registry:
    types: dict[str, ObjectType] = field(default_factory=lambda: dict(OBJECT_TYPES))
    domain: Domain = field(default_factory=reference_domain)
    compilers: dict[str, Compiler] = field(default_factory=lambda: dict(DEFAULT_COMPILERS))
    op_handlers: dict[str, OpHandler] = field(default_factory=lambda: dict(BUILTIN_OPS))
    predictors: list[UnaryPredictor] = field(default_factory=list)

    # names the belief derives from perception or the built-in predictors
    RESERVED = frozenset({"closetoagent", "visible", "handfree", "holding", "on", "isopen",
                          "isclosed"} | set(CAPABILITIES))

    def predicate_names(self) -> set[str]:
        return {p.name for p in self.domain.predicates} | set(self.types) | set(self.RESERVED)

    def register_type(self, otype: ObjectType) -> "Registry":
        if otype.name in self.types or otype.name in self.predicate_names():
            raise RegistryError(f"name {otype.name!r} is already taken")
        self.types[otype.name] = otype
        return self

    def register_predicate(self, name: str, fn: PredicateFn, types, arity: int = 1) -> "Registry":
        """Add a unary predicate predicted for constants of the given types.

        ``fn(belief, record, world_object_or_None, rng)`` must return a
        probability; it is probed on synthetic inputs before acceptance.
        """
        name = name.lower()
        if arity != 1:
            raise RegistryError("extension predicates are unary")
        if name in self.predicate_names():
            raise RegistryError(f"predicate {name!r} already exists")
        types = frozenset(t.lower() for t in types)
        unknown = types - set(self.types)
        if unknown:
            raise RegistryError(f"unknown object types {sorted(unknown)}")
        for t in sorted(types):
            for v in _probe_values(fn, self.types[t]):
                if not 0.0 <= v <= 1.0:
                    raise RegistryError(f"predictor {name!r} returned {v!r}, outside [0, 1]")
        self.predictors.append(UnaryPredictor(name, types, fn))
        self.domain = self.domain.extended(predicates=[PredicateSignature(name, 1)])
        return self

    def register_action(self, schema: ActionSchema | str, compiler: Compiler) -> "Registry":
        """Add an action schema (object or PDDL ``(:action ...)`` text) and its compiler."""
        if isinstance(schema, str):
            try:
                schema = _parse_schema(schema, self.domain, self.types)
            except UndeclaredPredicate as exc:
                raise RegistryError(f"action uses unknown predicate {exc.name!r}") from exc
        if any(a.name == schema.name for a in self.domain.actions):
            raise RegistryError(f"action {schema.name!r} already exists")
        known = {p.name for p in self.domain.predicates} | set(self.types)
        for a in schema.pre | schema.add | schema.delete:
            if a.predicate not in known:
                raise RegistryError(f"action {schema.name!r} uses unknown predicate {a.predicate!r}")
        # type names used as predicates get declared, so the domain text stays parseable
        declared = {p.name for p in self.domain.predicates}
        used = sorted({a.predicate for a in schema.pre | schema.add | schema.delete} - declared)
        self.domain = self.domain.extended(predicates=[PredicateSignature(t, 1) for t in used],
                                           actions=[schema])
        self.compilers[schema.name] = compiler
        return self

    def register_op(self, name: str, handler: OpHandler) -> "Registry":
        if name in self.op_handlers:
            raise RegistryError(f"low-level op {name!r} already exists")
        self.op_handlers[name] = handler
        return self


def _probe_values(fn: PredicateFn, otype: ObjectType) -> list[float]:
    from .belief import init_belief
    belief = init_belief()
    w, h = (0.1, 0.1) if otype.placement == "surface" else (0.5, 0.5)
    rec = ObjectRecord(f"{otype.name}0", (0.0, 0.0), otype.name, 0.9, 0, (w, h))
    obj = WorldObject(f"{otype.name}_0", otype.name, (0.0, 0.0), Rect.around(0, 0, w, h),
                      pickable=otype.pickable, openable=otype.openable, surface=otype.surface,
                      obstacle=otype.obstacle, occludes=otype.occludes, props=dict(otype.props))
    rng = np.random.default_rng(0)
    out = []
    for o in (obj, None):
        try:
            out.append(float(fn(belief, rec, o, rng)))
        except Exception as exc:  # noqa: BLE001 - any failure disqualifies the predictor
            raise RegistryError(f"predictor probe failed: {exc}") from exc
    return out


def _parse_schema(text: str, domain: Domain, types) -> ActionSchema:
    sigs = [(p.name, p.arity) for p in domain.predicates]
    sigs += [(t, 1) for t in types if t not in {n for n, _ in sigs}]
    preds = " ".join(f"({n}" + "".join(f" ?a{i}" for i in range(k)) + ")" for n, k in sigs)
    wrapper = f"(define (domain probe) (:requirements :strips) (:predicates {preds}) {text})"
    return parse_domain(wrapper).actions[0]


def default_registry() -> Registry:
    return Registry()


def with_prop(obj: WorldObject, **props) -> WorldObject:
    return dataclasses.replace(obj, props={**obj.props, **props})
