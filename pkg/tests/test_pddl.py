import random

import pytest
from hypothesis import given, settings, strategies as st

from ogamus.domains import REFERENCE_DOMAIN_PDDL, reference_domain
from ogamus.pddl import (ArityError, Atom, GoalFormula, PddlSyntaxError, UndeclaredPredicate,
                         UnsupportedFormula, UnsupportedRequirement, atom, entails,
                         format_domain, format_goal, ground_action, is_variable, parse_domain,
                         parse_goal)

from oracles import brute_entails, random_domain, random_goal, random_state

MINIMAL = """
(define (domain tiny)
  (:requirements :strips)
  (:predicates (closetoagent ?x) (visible ?x))
  (:action gocloseto
    :parameters (?x)
    :precondition ()
    :effect (and (closetoagent ?x) (visible ?x))))
"""


def test_minimal_domain_has_one_schema():
    d = parse_domain(MINIMAL)
    assert len(d) == 1
    s = d.schema("gocloseto")
    assert s.pre == frozenset()
    assert s.add == {atom("closetoagent", "?x"), atom("visible", "?x")}


def test_undeclared_predicate_rejected():
    text = MINIMAL.replace("(visible ?x))))", "(on ?x ?x))))")
    with pytest.raises(UndeclaredPredicate, match="undeclared predicate"):
        parse_domain(text)


def test_reference_domain_is_variable_closed():
    d = reference_domain()
    assert [a.name for a in d.actions] == ["gocloseto", "pickup", "puton", "openobj", "closeobj"]
    for s in d.actions:
        for a in s.pre | s.add | s.delete:
            assert all(t in s.params for t in a.args if is_variable(t))


def test_unsupported_requirement_named():
    text = MINIMAL.replace(":strips", ":strips :fluents")
    with pytest.raises(UnsupportedRequirement) as err:
        parse_domain(text)
    assert err.value.flag == ":fluents"


def test_syntax_error_has_position():
    with pytest.raises(PddlSyntaxError) as err:
        parse_domain("(define (domain x)\n  (:predicates (p ?x)")
    assert err.value.line >= 1 and err.value.column >= 1


def test_trailing_paren_is_syntax_error():
    with pytest.raises(PddlSyntaxError, match="line 1"):
        parse_goal("(and (p ?x)))")


def test_objnav_goal_shape():
    g = parse_goal("(exists (?x) (and (Apple ?x) (CloseToAgent ?x) (Visible ?x)))")
    assert g.exvars == ("?x",)
    assert len(g.atoms) == 3 and not g.diseqs
    assert atom("apple", "?x") in g.atoms  # names are case-insensitive


def test_two_apples_goal_shape():
    g = parse_goal("(exists (?x ?y ?z) (and (On ?x ?z) (On ?y ?z) (Apple ?x) (Apple ?y) "
                   "(Table ?z) (not (= ?x ?y))))")
    assert len(g.exvars) == 3 and len(g.atoms) == 5
    assert g.diseqs == {frozenset(("?x", "?y"))}


@pytest.mark.parametrize("text", [
    "(exists (?x) (or (Apple ?x)))",
    "(exists (?x) (and (apple ?x) (not (visible ?x))))",
    "(forall (?x) (apple ?x))",
])
def test_goal_outside_fragment_rejected(text):
    with pytest.raises(UnsupportedFormula):
        parse_goal(text)


def test_free_goal_variable_rejected():
    with pytest.raises(ValueError):
        parse_goal("(exists (?x) (and (on ?x ?y)))")


def test_ground_gocloseto():
    g = ground_action(reference_domain().schema("gocloseto"), ["apple1"])
    assert g.pre == frozenset()
    assert g.add == {atom("closetoagent", "apple1"), atom("visible", "apple1")}
    assert str(g) == "gocloseto(apple1)"


def test_ground_puton():
    g = ground_action(reference_domain().schema("puton"), ("apple1", "table0"))
    assert atom("on", "apple1", "table0") in g.add
    assert atom("holding", "apple1") in g.delete


def test_ground_wrong_arity():
    with pytest.raises(ArityError):
        ground_action(reference_domain().schema("puton"), ("apple1",))


OBJNAV = parse_goal("(exists (?x) (and (apple ?x) (closetoagent ?x) (visible ?x)))")
TWO_APPLES = parse_goal("(exists (?x ?y ?z) (and (on ?x ?z) (on ?y ?z) (apple ?x) (apple ?y) "
                        "(table ?z) (not (= ?x ?y))))")


def test_entails_objnav():
    s = {atom("apple", "a"), atom("closetoagent", "a"), atom("visible", "a")}
    assert entails(s, ["a"], OBJNAV) == {"?x": "a"}


def test_entails_empty_state():
    assert entails(set(), ["a", "b"], OBJNAV) is None


def test_entails_respects_disequality():
    s = {atom("apple", "a"), atom("table", "t"), atom("on", "a", "t")}
    assert entails(s, ["a", "t"], TWO_APPLES) is None
    s |= {atom("apple", "b"), atom("on", "b", "t")}
    b = entails(s, ["a", "b", "t"], TWO_APPLES)
    assert b is not None and b["?x"] != b["?y"]


def test_entails_ground_goal_and_empty_conjunction():
    g = parse_goal("(and (handfree))")
    assert entails({atom("handfree")}, [], g) == {}
    assert entails(set(), [], g) is None
    assert entails(set(), [], parse_goal("(and)")) == {}


def test_reference_domain_roundtrip():
    d = reference_domain()
    assert parse_domain(format_domain(d)) == d
    assert parse_domain(REFERENCE_DOMAIN_PDDL) == d


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10_000))
def test_entails_matches_enumeration(seed):
    rng = random.Random(seed)
    d = random_domain(rng, 3, 1)
    constants = [f"c{i}" for i in range(rng.randint(0, 5))]
    state = random_state(rng, d, constants, 0.4)
    goal = random_goal(rng, d, rng.randint(0, 3), rng.randint(1, 3))
    got = entails(state, constants, goal)
    assert (got is not None) == brute_entails(state, constants, goal)
    if got is not None:
        assert goal.substitute(got) <= state
        assert all(got[x] != got[y] for x, y in (tuple(p) for p in goal.diseqs))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10_000))
def test_goal_format_roundtrip(seed):
    rng = random.Random(seed)
    d = random_domain(rng, 3, 1)
    g = random_goal(rng, d, rng.randint(1, 3), rng.randint(1, 3))
    back = parse_goal(format_goal(g))
    assert back.exvars == g.exvars
    assert set(back.atoms) == set(g.atoms) and back.diseqs == g.diseqs


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10_000))
def test_domain_format_roundtrip(seed):
    d = random_domain(random.Random(seed))
    assert parse_domain(format_domain(d)) == d


def test_atom_hash_agrees_with_equality():
    assert hash(Atom("p", ("a",))) == hash(atom("P", "A"))
    assert len({Atom("p", ("a",)), atom("p", "a"), Atom("p", ("b",))}) == 2


def test_goal_rejects_repeated_variable():
    with pytest.raises(ValueError):
        GoalFormula(("?x", "?x"), ())
