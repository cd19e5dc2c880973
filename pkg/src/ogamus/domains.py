"""The shipped household action model and goal templates for the four task families."""

from __future__ import annotations

from functools import lru_cache

from .pddl import Domain, GoalFormula, parse_domain, parse_goal

REFERENCE_DOMAIN_PDDL = """\
(define (domain household)
  (:requirements :strips)
  (:predicates
    (closetoagent ?x) (visible ?x) (handfree) (holding ?x)
    (pickable ?x) (surface ?x) (openable ?x)
    (on ?x ?y) (isopen ?x) (isclosed ?x))
  (:action gocloseto
    :parameters (?x)
    :precondition ()
    :effect (and (closetoagent ?x) (visible ?x)))
  (:action pickup
    :parameters (?x)
    :precondition (and (closetoagent ?x) (visible ?x) (handfree) (pickable ?x))
    :effect (and (holding ?x) (not (handfree))))
  (:action puton
    :parameters (?x ?y)
    :precondition (and (holding ?x) (closetoagent ?y) (surface ?y))
    :effect (and (on ?x ?y) (handfree) (not (holding ?x))))
  (:action openobj
    :parameters (?x)
    :precondition (and (closetoagent ?x) (visible ?x) (openable ?x))
    :effect (and (isopen ?x) (not (isclosed ?x))))
  (:action closeobj
    :parameters (?x)
    :precondition (and (closetoagent ?x) (visible ?x) (openable ?x))
    :effect (and (isclosed ?x) (not (isopen ?x)))))
"""

FAMILIES = ("objnav", "open", "close", "on")


@lru_cache(maxsize=None)
def reference_domain() -> Domain:
    return parse_domain(REFERENCE_DOMAIN_PDDL)


def goal_text(family: str, type1: str, type2: str | None = None) -> str:
    family = family.lower()
    if family == "objnav":
        return f"(exists (?x) (and ({type1} ?x) (closetoagent ?x) (visible ?x)))"
    if family == "open":
        return f"(exists (?x) (and ({type1} ?x) (isopen ?x)))"
    if family == "close":
        return f"(exists (?x) (and ({type1} ?x) (isclosed ?x)))"
    if family == "on":
        if type2 is None:
            raise ValueError("the on family needs a second type")
        return f"(exists (?x ?y) (and ({type1} ?x) ({type2} ?y) (on ?x ?y)))"
    raise ValueError(f"unknown task family {family!r}")


def task_goal(family: str, type1: str, type2: str | None = None) -> GoalFormula:
    return parse_goal(goal_text(family, type1, type2))
