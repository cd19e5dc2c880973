"""Lifted STRIPS vocabulary, a small PDDL reader/printer, grounding and goal entailment.

Supported fragment: ``:strips`` domains with untyped parameters, positive
preconditions and add/delete effects.  Object types are plain unary
predicates.  Goals are existentially quantified conjunctions of positive
atoms plus pairwise disequalities.  All identifiers are case-insensitive and
stored lower-case.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

SUPPORTED_REQUIREMENTS = frozenset({":strips", ":equality"})


class PddlError(ValueError):
    """Base class for everything the reader rejects."""


class PddlSyntaxError(PddlError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class UnsupportedRequirement(PddlError):
    def __init__(self, flag: str):
        super().__init__(f"unsupported requirement {flag}")
        self.flag = flag


class UndeclaredPredicate(PddlError):
    def __init__(self, name: str, action: str):
        super().__init__(f"undeclared predicate {name!r} used in action {action!r}")
        self.name = name
        self.action = action


class UnsupportedFormula(PddlError):
    pass


class ArityError(ValueError):
    pass


def is_variable(term: str) -> bool:
    return term.startswith("?")


@dataclass(frozen=True, order=True)
class Atom:
    predicate: str
    args: tuple[str, ...] = ()
    _hash: int = field(default=0, init=False, repr=False, compare=False)

    def __post_init__(self):
        # atoms live in many sets; hashing once pays off during search
        object.__setattr__(self, "_hash", hash((self.predicate, self.args)))

    def __hash__(self) -> int:
        return self._hash

    def __str__(self) -> str:
        if not self.args:
            return f"({self.predicate})"
        return f"({self.predicate} {' '.join(self.args)})"

    def substitute(self, mapping: Mapping[str, str]) -> "Atom":
        return Atom(self.predicate, tuple(mapping.get(a, a) for a in self.args))

    @property
    def is_ground(self) -> bool:
        return not any(is_variable(a) for a in self.args)


def atom(predicate: str, *args: str) -> Atom:
    """Shorthand constructor, lower-casing like the reader does."""
    return Atom(predicate.lower(), tuple(a.lower() for a in args))


@dataclass(frozen=True)
class PredicateSignature:
    name: str
    arity: int

    def __post_init__(self):
        if self.arity < 0:
            raise ValueError("arity must be non-negative")


@dataclass(frozen=True)
class ActionSchema:
    name: str
    params: tuple[str, ...]
    pre: frozenset[Atom] = frozenset()
    add: frozenset[Atom] = frozenset()
    delete: frozenset[Atom] = frozenset()

    def __post_init__(self):
        params = set(self.params)
        if len(params) != len(self.params):
            raise PddlError(f"action {self.name!r} repeats a parameter")
        for part in (self.pre, self.add, self.delete):
            for a in part:
                for term in a.args:
                    if is_variable(term) and term not in params:
                        raise PddlError(
                            f"variable {term} in action {self.name!r} is not a parameter"
                        )
        clash = self.add & self.delete
        if clash:
            raise PddlError(
                f"action {self.name!r} both adds and deletes {sorted(map(str, clash))}"
            )


@dataclass(frozen=True)
class GroundAction:
    name: str
    binding: tuple[str, ...]
    pre: frozenset[Atom]
    add: frozenset[Atom]
    delete: frozenset[Atom]

    def __str__(self) -> str:
        return f"{self.name}({','.join(self.binding)})"

    @property
    def constants(self) -> frozenset[str]:
        return frozenset(self.binding)


@dataclass(frozen=True)
class Domain:
    """An action model together with its declared predicate set."""

    name: str
    predicates: tuple[PredicateSignature, ...]
    actions: tuple[ActionSchema, ...]
    requirements: tuple[str, ...] = (":strips",)

    def __post_init__(self):
        names = [p.name for p in self.predicates]
        if len(set(names)) != len(names):
            raise PddlError("duplicate predicate declaration")
        ops = [a.name for a in self.actions]
        if len(set(ops)) != len(ops):
            raise PddlError("duplicate action name")

    def schema(self, name: str) -> ActionSchema:
        for a in self.actions:
            if a.name == name:
                return a
        raise KeyError(name)

    def __len__(self) -> int:
        return len(self.actions)

    def extended(self, predicates: Iterable[PredicateSignature] = (),
                 actions: Iterable[ActionSchema] = ()) -> "Domain":
        return Domain(self.name, self.predicates + tuple(predicates),
                      self.actions + tuple(actions), self.requirements)


@dataclass(frozen=True)
class GoalFormula:
    exvars: tuple[str, ...]
    atoms: tuple[Atom, ...]
    diseqs: frozenset[frozenset[str]] = frozenset()

    def __post_init__(self):
        declared = set(self.exvars)
        if len(declared) != len(self.exvars):
            raise PddlError("goal repeats an existential variable")
        for a in self.atoms:
            for t in a.args:
                if is_variable(t) and t not in declared:
                    raise PddlError(f"free variable {t} in goal")
        for pair in self.diseqs:
            if len(pair) != 2:
                raise PddlError("disequality needs two distinct variables")
            for t in pair:
                if not is_variable(t) or t not in declared:
                    raise PddlError(f"disequality over undeclared term {t}")

    @property
    def constants(self) -> frozenset[str]:
        return frozenset(t for a in self.atoms for t in a.args if not is_variable(t))

    def substitute(self, binding: Mapping[str, str]) -> frozenset[Atom]:
        return frozenset(a.substitute(binding) for a in self.atoms)


@dataclass(frozen=True)
class PlanningProblem:
    model: Domain
    constants: tuple[str, ...]
    init: frozenset[Atom]
    goal: GoalFormula

    def __post_init__(self):
        known = set(self.constants)
        for a in self.init:
            missing = set(a.args) - known
            if missing:
                raise PddlError(f"init atom {a} mentions unknown constants {sorted(missing)}")
        missing = self.goal.constants - known
        if missing:
            raise PddlError(f"goal mentions unknown constants {sorted(missing)}")


# --------------------------------------------------------------------------
# s-expression reader

@dataclass
class _Token:
    text: str
    line: int
    col: int


@dataclass
class _List:
    items: list = field(default_factory=list)
    line: int = 1
    col: int = 1


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    line, col = 1, 1
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line, col = line + 1, 1
            i += 1
            continue
        if ch.isspace():
            i += 1
            col += 1
            continue
        if ch == ";":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if ch in "()":
            tokens.append(_Token(ch, line, col))
            i += 1
            col += 1
            continue
        start, start_col = i, col
        while i < n and not text[i].isspace() and text[i] not in "();":
            i += 1
            col += 1
        tokens.append(_Token(text[start:i].lower(), line, start_col))
    return tokens


def _read(text: str):
    tokens = _tokenize(text)
    if not tokens:
        raise PddlSyntaxError("empty input", 1, 1)
    stack: list[_List] = []
    root = None
    for tok in tokens:
        if tok.text == "(":
            stack.append(_List([], tok.line, tok.col))
        elif tok.text == ")":
            if not stack:
                raise PddlSyntaxError("unbalanced ')'", tok.line, tok.col)
            done = stack.pop()
            if stack:
                stack[-1].items.append(done)
            elif root is None:
                root = done
            else:
                raise PddlSyntaxError("trailing expression", done.line, done.col)
        else:
            if not stack:
                raise PddlSyntaxError(f"unexpected token {tok.text!r}", tok.line, tok.col)
            stack[-1].items.append(tok)
    if stack:
        raise PddlSyntaxError("missing ')'", stack[-1].line, stack[-1].col)
    return root


def _word(node, what: str) -> str:
    if not isinstance(node, _Token):
        raise PddlSyntaxError(f"expected {what}", node.line, node.col)
    return node.text


def _pos(node):
    return node.line, node.col


def _atom(node, allow_vars: bool = True) -> Atom:
    if not isinstance(node, _List) or not node.items:
        line, col = _pos(node)
        raise PddlSyntaxError("expected an atom", line, col)
    head = _word(node.items[0], "predicate name")
    if head in {"and", "or", "not", "imply", "exists", "forall", "when", "="}:
        raise UnsupportedFormula(f"connective {head!r} not allowed here (line {node.line})")
    args = tuple(_word(t, "term") for t in node.items[1:])
    if not allow_vars and any(is_variable(a) for a in args):
        raise PddlSyntaxError("variables not allowed here", node.line, node.col)
    return Atom(head, args)


def _conjuncts(node) -> list:
    if isinstance(node, _List) and not node.items:
        return []
    if isinstance(node, _List) and node.items and isinstance(node.items[0], _Token) \
            and node.items[0].text == "and":
        return node.items[1:]
    return [node]


def _variables(node) -> tuple[str, ...]:
    if not isinstance(node, _List):
        line, col = _pos(node)
        raise PddlSyntaxError("expected a parameter list", line, col)
    out = []
    for item in node.items:
        name = _word(item, "variable")
        if name == "-":
            raise UnsupportedRequirement(":typing")
        if not is_variable(name):
            raise PddlSyntaxError(f"expected a variable, got {name!r}", item.line, item.col)
        out.append(name)
    return tuple(out)


def _parse_action(node: _List, declared: dict[str, int] | None) -> ActionSchema:
    items = node.items
    name = _word(items[1], "action name") if len(items) > 1 else None
    if name is None:
        raise PddlSyntaxError("action without a name", node.line, node.col)
    params: tuple[str, ...] = ()
    pre: list[Atom] = []
    add: list[Atom] = []
    delete: list[Atom] = []
    i = 2
    while i < len(items):
        key = _word(items[i], "action keyword")
        if i + 1 >= len(items):
            raise PddlSyntaxError(f"{key} without a value", items[i].line, items[i].col)
        value = items[i + 1]
        if key == ":parameters":
            params = _variables(value)
        elif key == ":precondition":
            for c in _conjuncts(value):
                if isinstance(c, _List) and c.items and isinstance(c.items[0], _Token) \
                        and c.items[0].text == "not":
                    raise UnsupportedRequirement(":negative-preconditions")
                pre.append(_atom(c))
        elif key == ":effect":
            for c in _conjuncts(value):
                if isinstance(c, _List) and c.items and isinstance(c.items[0], _Token) \
                        and c.items[0].text == "not":
                    if len(c.items) != 2:
                        raise PddlSyntaxError("malformed negative effect", c.line, c.col)
                    delete.append(_atom(c.items[1]))
                else:
                    add.append(_atom(c))
        else:
            raise PddlSyntaxError(f"unknown action keyword {key!r}", items[i].line, items[i].col)
        i += 2
    if declared is not None:
        for a in pre + add + delete:
            if a.predicate not in declared:
                raise UndeclaredPredicate(a.predicate, name)
            if declared[a.predicate] != len(a.args):
                raise PddlError(f"predicate {a.predicate!r} used with wrong arity in {name!r}")
    return ActionSchema(name, params, frozenset(pre), frozenset(add), frozenset(delete))


def parse_domain(text: str) -> Domain:
    """Read a STRIPS domain from PDDL text."""
    root = _read(text)
    items = root.items
    if len(items) < 2 or _word(items[0], "define") != "define":
        raise PddlSyntaxError("expected (define (domain ...) ...)", root.line, root.col)
    header = items[1]
    if not isinstance(header, _List) or len(header.items) != 2 \
            or _word(header.items[0], "domain") != "domain":
        raise PddlSyntaxError("expected (domain NAME)", header.line, header.col)
    name = _word(header.items[1], "domain name")
    requirements: tuple[str, ...] = (":strips",)
    predicates: list[PredicateSignature] = []
    declared: dict[str, int] | None = None
    actions = []
    for section in items[2:]:
        if not isinstance(section, _List) or not section.items:
            line, col = _pos(section)
            raise PddlSyntaxError("expected a domain section", line, col)
        key = _word(section.items[0], "section keyword")
        if key == ":requirements":
            requirements = tuple(_word(t, "requirement") for t in section.items[1:])
            for flag in requirements:
                if flag not in SUPPORTED_REQUIREMENTS:
                    raise UnsupportedRequirement(flag)
        elif key == ":predicates":
            for p in section.items[1:]:
                if not isinstance(p, _List) or not p.items:
                    line, col = _pos(p)
                    raise PddlSyntaxError("expected a predicate declaration", line, col)
                pname = _word(p.items[0], "predicate name")
                predicates.append(PredicateSignature(pname, len(_variables(_List(p.items[1:], p.line, p.col)))))
            declared = {p.name: p.arity for p in predicates}
        elif key == ":action":
            actions.append(section)
        elif key in (":types", ":constants", ":functions"):
            raise UnsupportedRequirement({":types": ":typing", ":constants": ":constants",
                                          ":functions": ":fluents"}[key])
        else:
            raise PddlSyntaxError(f"unknown domain section {key!r}", section.line, section.col)
    schemas = tuple(_parse_action(a, declared if declared is not None else {}) for a in actions)
    return Domain(name, tuple(predicates), schemas, requirements)


def parse_goal(text: str) -> GoalFormula:
    """Read ``(exists (vars) (and ...))``, optionally wrapped in ``(:goal ...)``."""
    node = _read(text)
    if node.items and isinstance(node.items[0], _Token) and node.items[0].text == ":goal":
        if len(node.items) != 2:
            raise PddlSyntaxError("(:goal ...) takes one formula", node.line, node.col)
        node = node.items[1]
    exvars: tuple[str, ...] = ()
    if isinstance(node, _List) and node.items and isinstance(node.items[0], _Token) \
            and node.items[0].text == "exists":
        if len(node.items) != 3:
            raise PddlSyntaxError("malformed exists", node.line, node.col)
        exvars = _variables(node.items[1])
        node = node.items[2]
    atoms: list[Atom] = []
    diseqs = set()
    for c in _conjuncts(node):
        if isinstance(c, _List) and c.items and isinstance(c.items[0], _Token):
            head = c.items[0].text
            if head == "not":
                inner = c.items[1] if len(c.items) == 2 else None
                if isinstance(inner, _List) and len(inner.items) == 3 \
                        and isinstance(inner.items[0], _Token) and inner.items[0].text == "=":
                    x, y = _word(inner.items[1], "term"), _word(inner.items[2], "term")
                    if x == y:
                        raise PddlError(f"disequality {x} != {x} is unsatisfiable")
                    diseqs.add(frozenset((x, y)))
                    continue
                raise UnsupportedFormula(f"negation of non-equality atoms is not supported (line {c.line})")
            if head in {"or", "imply", "forall", "exists", "="}:
                raise UnsupportedFormula(f"{head!r} is outside the supported goal fragment (line {c.line})")
        atoms.append(_atom(c))
    return GoalFormula(exvars, tuple(atoms), frozenset(diseqs))


# --------------------------------------------------------------------------
# printer

def _format_atoms(atoms: Iterable[Atom], indent: str) -> str:
    ordered = sorted(atoms)
    if not ordered:
        return "(and)"
    return "(and\n" + "".join(f"{indent}  {a}\n" for a in ordered) + f"{indent})"


def format_domain(domain: Domain) -> str:
    lines = [f"(define (domain {domain.name})",
             f"  (:requirements {' '.join(domain.requirements)})",
             "  (:predicates"]
    for p in domain.predicates:
        args = "".join(f" ?a{i}" for i in range(p.arity))
        lines.append(f"    ({p.name}{args})")
    lines.append("  )")
    for a in domain.actions:
        effects = sorted(a.add) + [None] + sorted(a.delete)
        body = []
        for e in effects:
            if e is None:
                continue
            body.append(str(e) if e in a.add else f"(not {e})")
        lines.append(f"  (:action {a.name}")
        lines.append(f"    :parameters ({' '.join(a.params)})")
        lines.append(f"    :precondition {_format_atoms(a.pre, '    ')}")
        if body:
            lines.append("    :effect (and\n" + "".join(f"      {b}\n" for b in body) + "    ))")
        else:
            lines.append("    :effect (and))")
    lines.append(")")
    return "\n".join(lines) + "\n"


def format_goal(goal: GoalFormula) -> str:
    parts = [str(a) for a in goal.atoms]
    for pair in sorted(tuple(sorted(p)) for p in goal.diseqs):
        parts.append(f"(not (= {pair[0]} {pair[1]}))")
    body = "(and\n" + "".join(f"    {p}\n" for p in parts) + "  )"
    if not goal.exvars:
        return body + "\n"
    return f"(exists ({' '.join(goal.exvars)})\n  {body})\n"


# --------------------------------------------------------------------------
# grounding and entailment

def ground_action(schema: ActionSchema, binding: Sequence[str]) -> GroundAction:
    binding = tuple(binding)
    if len(binding) != len(schema.params):
        raise ArityError(
            f"{schema.name} takes {len(schema.params)} arguments, got {len(binding)}"
        )
    sub = dict(zip(schema.params, binding))
    return GroundAction(
        schema.name,
        binding,
        frozenset(a.substitute(sub) for a in schema.pre),
        frozenset(a.substitute(sub) for a in schema.add),
        frozenset(a.substitute(sub) for a in schema.delete),
    )


def entails(state: Iterable[Atom], constants: Sequence[str],
            goal: GoalFormula) -> dict[str, str] | None:
    """Closed-world satisfaction: first witness binding, or ``None``.

    Constants are tried in the order given, variables in declaration order.
    """
    state = state if isinstance(state, (set, frozenset)) else set(state)
    constants = list(constants)
    order = list(goal.exvars)
    # atoms checked as soon as their last variable (in declaration order) is bound
    rank = {v: i for i, v in enumerate(order)}
    checks: list[list[Atom]] = [[] for _ in order]
    for a in goal.atoms:
        vs = [rank[t] for t in a.args if is_variable(t)]
        if not vs:
            if a not in state:
                return None
        else:
            checks[max(vs)].append(a)
    diseq_at: list[list[str]] = [[] for _ in order]
    for pair in goal.diseqs:
        x, y = sorted(pair, key=rank.__getitem__)
        diseq_at[rank[y]].append(x)

    binding: dict[str, str] = {}

    def search(k: int) -> bool:
        if k == len(order):
            return True
        var = order[k]
        for c in constants:
            if any(binding[other] == c for other in diseq_at[k]):
                continue
            binding[var] = c
            if all(a.substitute(binding) in state for a in checks[k]) and search(k + 1):
                return True
        binding.pop(var, None)
        return False

    return dict(binding) if search(0) else None
