"""Grounded forward search over the agent's current constants, and a plan checker."""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

from .pddl import (Atom, Domain, GoalFormula, GroundAction, PlanningProblem,
                   ground_action)

DEFAULT_MAX_EXPANSIONS = 20000


@dataclass(frozen=True)
class Plan:
    steps: tuple[GroundAction, ...]

    def __len__(self) -> int:
        return len(self.steps)

    def __iter__(self):
        return iter(self.steps)

    def __getitem__(self, i):
        return self.steps[i]

    def to_text(self) -> str:
        return "".join(f"{s}\n" for s in self.steps)


@dataclass(frozen=True)
class Validation:
    valid: bool
    failed_step: int | None = None  # 1-based; None when valid or when only the goal fails
    reason: str = ""

    def __bool__(self) -> bool:
        return self.valid


def static_predicates(model: Domain) -> frozenset[str]:
    changing = {a.predicate for s in model.actions for a in s.add | s.delete}
    used = {a.predicate for s in model.actions for a in s.pre | s.add | s.delete}
    used |= {p.name for p in model.predicates}
    return frozenset(used - changing)


def _match(pre: list[Atom], index: dict[str, set[tuple[str, ...]]], sub: dict[str, str]):
    if not pre:
        yield dict(sub)
        return
    first, rest = pre[0], pre[1:]
    for args in index.get(first.predicate, ()):
        if len(args) != len(first.args):
            continue
        new = dict(sub)
        for term, value in zip(first.args, args):
            if term.startswith("?"):
                if new.setdefault(term, value) != value:
                    break
            elif term != value:
                break
        else:
            yield from _match(rest, index, new)


def ground_actions(model: Domain, constants: Sequence[str],
                   state: Iterable[Atom]) -> list[GroundAction]:
    """Ground actions whose preconditions are reachable under delete relaxation.

    Bindings come from joining preconditions against the relaxed-reachable
    atoms, so a parameter guarded by a type atom only ranges over constants
    of that type.  Parameters absent from the precondition range over all
    constants.
    """
    reached = set(state)
    index: dict[str, set[tuple[str, ...]]] = {}
    for a in reached:
        index.setdefault(a.predicate, set()).add(a.args)
    found: dict[tuple[str, tuple[str, ...]], GroundAction] = {}
    changed = True
    while changed:
        changed = False
        for schema in model.actions:
            # most selective (fewest reached atoms) precondition first
            pre = sorted(schema.pre, key=lambda a: (len(index.get(a.predicate, ())), a))
            free = [p for p in schema.params if not any(p in a.args for a in pre)]
            for sub in list(_match(pre, index, {})):
                for extra in itertools.product(constants, repeat=len(free)):
                    full = dict(sub, **dict(zip(free, extra)))
                    binding = tuple(full[p] for p in schema.params)
                    key = (schema.name, binding)
                    if key in found:
                        continue
                    g = ground_action(schema, binding)
                    found[key] = g
                    for q in g.add:
                        if q not in reached:
                            reached.add(q)
                            index.setdefault(q.predicate, set()).add(q.args)
                            changed = True
    # deterministic order, which is also the successor order behind FIFO tie-breaking:
    # actions with more preconditions (exploiting the current state) first, then
    # schema order, then constant order
    rank = {c: i for i, c in enumerate(constants)}
    order = {s.name: i for i, s in enumerate(model.actions)}
    return sorted(found.values(), key=lambda g: (-len(g.pre), order[g.name],
                                                 tuple(rank.get(c, -1) for c in g.binding)))


def _relevant(actions: list[GroundAction], goal: frozenset[Atom]) -> list[GroundAction]:
    wanted = set(goal)
    keep: set[int] = set()
    changed = True
    while changed:
        changed = False
        for i, a in enumerate(actions):
            if i not in keep and a.add & wanted:
                keep.add(i)
                wanted |= a.pre
                changed = True
    return [a for i, a in enumerate(actions) if i in keep]


def h_add(state: frozenset[Atom], goal: frozenset[Atom],
          actions: Sequence[GroundAction]) -> float:
    """Additive delete-relaxation estimate; ``inf`` when relaxed-unreachable."""
    cost = dict.fromkeys(state, 0.0)
    changed = True
    while changed:
        changed = False
        for a in actions:
            c = 0.0
            for p in a.pre:
                v = cost.get(p)
                if v is None:
                    break
                c += v
            else:
                c += 1.0
                for q in a.add:
                    if cost.get(q, math.inf) > c:
                        cost[q] = c
                        changed = True
    total = 0.0
    for g in goal:
        v = cost.get(g)
        if v is None:
            return math.inf
        total += v
    return total


class _Relaxed:
    """Facts and actions indexed once so h_add runs as a generalized Dijkstra."""

    def __init__(self, actions: Sequence[GroundAction]):
        ids: dict[Atom, int] = {}
        for a in actions:
            for q in itertools.chain(a.pre, a.add):
                ids.setdefault(q, len(ids))
        self.ids = ids
        self.npre = [len(a.pre) for a in actions]
        self.adds = [[ids[q] for q in a.add] for a in actions]
        self.pre_of: list[list[int]] = [[] for _ in ids]
        for k, a in enumerate(actions):
            for q in a.pre:
                self.pre_of[ids[q]].append(k)
        self.free = [k for k, n in enumerate(self.npre) if n == 0]

    def h(self, state: frozenset[Atom], goal: frozenset[Atom]) -> float:
        ids = self.ids
        goal_ids = set()
        for g in goal:
            if g in state:
                continue
            if g not in ids:
                return math.inf
            goal_ids.add(ids[g])
        if not goal_ids:
            return 0.0
        best = [math.inf] * len(ids)
        heap = []
        for f in state:
            i = ids.get(f)
            if i is not None:
                best[i] = 0.0
                heap.append((0.0, i))
        for k in self.free:
            for q in self.adds[k]:
                if best[q] > 1.0:
                    best[q] = 1.0
                    heap.append((1.0, q))
        heapq.heapify(heap)
        pending = list(self.npre)
        acc = [0.0] * len(pending)
        done = [False] * len(ids)
        total, left = 0.0, len(goal_ids)
        while heap:
            c, i = heapq.heappop(heap)
            if done[i]:
                continue
            done[i] = True
            if i in goal_ids:
                total += c
                left -= 1
                if not left:
                    return total
            for k in self.pre_of[i]:
                acc[k] += c
                pending[k] -= 1
                if pending[k] == 0:
                    ca = acc[k] + 1.0
                    for q in self.adds[k]:
                        if ca < best[q]:
                            best[q] = ca
                            heapq.heappush(heap, (ca, q))
        return math.inf


def _gbfs(init: frozenset[Atom], goal: frozenset[Atom], actions: list[GroundAction],
          max_expansions: int | None) -> tuple[GroundAction, ...] | None:
    if goal <= init:
        return ()
    relaxed = _Relaxed(actions)
    h0 = relaxed.h(init, goal)
    if math.isinf(h0):
        return None
    tie = itertools.count()
    frontier = [(h0, next(tie), init, ())]
    seen = {init}
    expansions = 0
    while frontier:
        _, _, state, path = heapq.heappop(frontier)
        expansions += 1
        if max_expansions is not None and expansions > max_expansions:
            return None
        for a in actions:
            if not a.pre <= state:
                continue
            nxt = (state | a.add) - a.delete
            if nxt in seen:
                continue
            seen.add(nxt)
            npath = path + (a,)
            if goal <= nxt:
                return npath
            h = relaxed.h(nxt, goal)
            if not math.isinf(h):
                heapq.heappush(frontier, (h, next(tie), nxt, npath))
    return None


def goal_bindings(model: Domain, constants: Sequence[str], state: Iterable[Atom],
                  goal: GoalFormula):
    """Yield bindings of the goal variables that the unchanging atoms of ``state`` allow."""
    changing = {x.predicate for s in model.actions for x in s.add | s.delete}
    by_pred: dict[str, set[tuple[str, ...]]] = {}
    for a in state:
        by_pred.setdefault(a.predicate, set()).add(a.args)
    domains = []
    for v in goal.exvars:
        guards = [a.predicate for a in goal.atoms
                  if a.args == (v,) and a.predicate not in changing]
        domains.append([c for c in constants
                        if all((c,) in by_pred.get(g, ()) for g in guards)])
    fixed = [a for a in goal.atoms if a.predicate not in changing]
    pairs = [tuple(p) for p in goal.diseqs]
    for combo in itertools.product(*domains):
        b = dict(zip(goal.exvars, combo))
        if any(b[x] == b[y] for x, y in pairs):
            continue
        if all(a.substitute(b).args in by_pred.get(a.predicate, ()) for a in fixed):
            yield b


def plan(model: Domain, constants: Sequence[str], state: Iterable[Atom],
         goal: GoalFormula, binding_cost: Callable[[dict[str, str]], float] | None = None,
         max_expansions: int | None = DEFAULT_MAX_EXPANSIONS,
         exclude: Iterable[str] = ()) -> Plan | None:
    """First plan found over goal bindings ordered by ``binding_cost``.

    Each binding turns the goal into a ground conjunction that greedy
    best-first search with the additive heuristic tries to reach.  Returns
    ``None`` when no binding yields a plan, in particular when some goal
    variable has no candidate constant at all.  Ground actions whose text
    form is in ``exclude`` are never used.
    """
    state = frozenset(state)
    constants = list(constants)
    bindings = list(goal_bindings(model, constants, state, goal))
    if not bindings:
        return None
    if binding_cost is not None:
        # stable sort keeps enumeration order on equal cost
        bindings.sort(key=binding_cost)
    all_actions = ground_actions(model, constants, state)
    banned = set(exclude)
    if banned:
        all_actions = [a for a in all_actions if str(a) not in banned]
    for b in bindings:
        target = goal.substitute(b)
        if target <= state:
            return Plan(())
        actions = _relevant(all_actions, target)
        steps = _gbfs(state, target, actions, max_expansions)
        if steps is not None:
            return Plan(steps)
    return None


def validate_plan(problem: PlanningProblem, plan: Plan | Sequence[GroundAction]) -> Validation:
    """Replay ``plan`` from the problem's initial state against the lifted model."""
    state = set(problem.init)
    known = set(problem.constants)
    for i, step in enumerate(plan, start=1):
        try:
            schema = problem.model.schema(step.name)
        except KeyError:
            return Validation(False, i, f"unknown operator {step.name}")
        if len(step.binding) != len(schema.params):
            return Validation(False, i, "arity mismatch")
        if not set(step.binding) <= known:
            return Validation(False, i, "binding uses unknown constants")
        sub = dict(zip(schema.params, step.binding))

        def inst(atoms):
            return {Atom(a.predicate, tuple(sub.get(t, t) for t in a.args)) for a in atoms}

        pre = inst(schema.pre)
        if not pre <= state:
            missing = sorted(map(str, pre - state))
            return Validation(False, i, f"unmet precondition {', '.join(missing)}")
        state = (state | inst(schema.add)) - inst(schema.delete)
    goal = problem.goal
    names = list(problem.constants)
    for combo in itertools.product(names, repeat=len(goal.exvars)):
        b = dict(zip(goal.exvars, combo))
        if any(b[x] == b[y] for x, y in (tuple(p) for p in goal.diseqs)):
            continue
        if all(Atom(a.predicate, tuple(b.get(t, t) for t in a.args)) in state
               for a in goal.atoms):
            return Validation(True)
    return Validation(False, None, "final state does not entail the goal")
