"""PDDL2.1 reader: s-expression lexer, domain/problem parser and printer.

Only the fragment needed for durative STRIPS-style domains is accepted:
typing, constants, predicates, instantaneous and durative actions. Other
requirement flags are parsed and reported as warnings.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterator, Optional, Union

log = logging.getLogger(__name__)

HONORED_REQUIREMENTS = frozenset({":typing", ":durative-actions"})


class ParseError(Exception):
    """Malformed input. Carries a 1-based line/column when known."""

    def __init__(self, message: str, line: int = 0, col: int = 0):
        super().__init__(message)
        self.message = message
        self.line = line
        self.col = col

    def __str__(self) -> str:
        if self.line:
            return f"{self.line}:{self.col}: {self.message}"
        return self.message


class UndeclaredPredicate(ParseError):
    pass


# ---------------------------------------------------------------------------
# s-expressions

@dataclass
class Node:
    """A symbol (value is str) or a list (value is list of Node)."""

    value: Union[str, list]
    line: int
    col: int

    @property
    def is_list(self) -> bool:
        return isinstance(self.value, list)

    def head(self) -> Optional[str]:
        if self.is_list and self.value and not self.value[0].is_list:
            return self.value[0].value
        return None

    def to_data(self):
        if self.is_list:
            return tuple(n.to_data() for n in self.value)
        return self.value


def _tokens(text: str) -> Iterator[tuple[str, int, int]]:
    line, col, i, n = 1, 1, 0, len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line, col, i = line + 1, 1, i + 1
        elif ch.isspace():
            i, col = i + 1, col + 1
        elif ch == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif ch in "()":
            yield ch, line, col
            i, col = i + 1, col + 1
        else:
            start, scol = i, col
            while i < n and not text[i].isspace() and text[i] not in "();":
                i += 1
            col += i - start
            yield text[start:i].lower(), line, scol


def read_sexprs(text: str) -> list[Node]:
    """Read every top-level s-expression in ``text``."""
    stack: list[Node] = []
    out: list[Node] = []
    for tok, line, col in _tokens(text):
        if tok == "(":
            stack.append(Node([], line, col))
        elif tok == ")":
            if not stack:
                raise ParseError("unbalanced ')'", line, col)
            node = stack.pop()
            (stack[-1].value if stack else out).append(node)
        else:
            leaf = Node(tok, line, col)
            if not stack:
                raise ParseError(f"unexpected symbol '{tok}' at top level", line, col)
            stack[-1].value.append(leaf)
    if stack:
        node = stack[-1]
        raise ParseError("unclosed '('", node.line, node.col)
    return out


# ---------------------------------------------------------------------------
# formulas

@dataclass(frozen=True)
class Atom:
    relation: str
    args: tuple[str, ...]
    pos: tuple[int, int] = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class Not:
    body: "Formula"


@dataclass(frozen=True)
class And:
    parts: tuple["Formula", ...]


@dataclass(frozen=True)
class Or:
    parts: tuple["Formula", ...]


@dataclass(frozen=True)
class Forall:
    variables: tuple[tuple[str, str], ...]
    body: "Formula"


@dataclass(frozen=True)
class Exists:
    variables: tuple[tuple[str, str], ...]
    body: "Formula"


@dataclass(frozen=True)
class When:
    condition: "Formula"
    effect: "Formula"


@dataclass(frozen=True)
class Equals:
    left: str
    right: str


@dataclass(frozen=True)
class Timed:
    """Temporal annotation: ``when`` is one of start, all, end."""

    when: str
    body: "Formula"


Formula = Union[Atom, Not, And, Or, Forall, Exists, When, Equals, Timed]


@dataclass(frozen=True)
class RawAction:
    name: str
    parameters: tuple[tuple[str, str], ...]
    kind: str  # "instantaneous" or "durative"
    condition: Optional[Formula]
    effect: Optional[Formula]
    duration: Optional[tuple] = None
    pos: tuple[int, int] = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class RawDomain:
    name: str
    requirements: tuple[str, ...]
    types: dict  # type -> parent
    constants: tuple[tuple[str, str], ...]
    predicates: tuple[tuple[str, tuple[tuple[str, str], ...]], ...]
    actions: tuple[RawAction, ...]

    def arity(self, relation: str) -> Optional[int]:
        for name, params in self.predicates:
            if name == relation:
                return len(params)
        return None


@dataclass(frozen=True)
class RawProblem:
    name: str
    domain_name: str
    objects: tuple[tuple[str, str], ...]
    init: frozenset[Atom]
    goal: Optional[Formula]


# ---------------------------------------------------------------------------
# parsing helpers

def _sym(node: Node, what: str) -> str:
    if node.is_list:
        raise ParseError(f"expected {what}, found a list", node.line, node.col)
    return node.value


def _typed_list(nodes: list[Node]) -> list[tuple[str, str]]:
    """Parse ``a b - t c`` into [(a, t), (b, t), (c, object)]."""
    out: list[tuple[str, str]] = []
    pending: list[str] = []
    i = 0
    while i < len(nodes):
        tok = _sym(nodes[i], "name")
        if tok == "-":
            if i + 1 >= len(nodes):
                raise ParseError("type expected after '-'", nodes[i].line, nodes[i].col)
            tnode = nodes[i + 1]
            if tnode.is_list:
                raise ParseError("'either' types are not supported", tnode.line, tnode.col)
            out.extend((p, tnode.value) for p in pending)
            pending = []
            i += 2
            continue
        pending.append(tok)
        i += 1
    out.extend((p, "object") for p in pending)
    return out


class _Parser:
    def __init__(self, predicates: Optional[dict[str, int]] = None, strict: bool = True):
        self.predicates = predicates or {}
        self.strict = strict

    def atom(self, node: Node) -> Atom:
        items = node.value
        rel = _sym(items[0], "relation name")
        args = tuple(_sym(a, "argument") for a in items[1:])
        if self.strict:
            arity = self.predicates.get(rel)
            if arity is None:
                raise UndeclaredPredicate(f"undeclared predicate '{rel}'", node.line, node.col)
            if arity != len(args):
                raise ParseError(
                    f"predicate '{rel}' expects {arity} arguments, got {len(args)}",
                    node.line, node.col)
        return Atom(rel, args, (node.line, node.col))

    def formula(self, node: Node, timed: bool = False) -> Formula:
        if not node.is_list:
            raise ParseError(f"expected a formula, found '{node.value}'", node.line, node.col)
        if not node.value:
            return And(())
        head = node.head()
        items = node.value
        if head == "and":
            return And(tuple(self.formula(n, timed) for n in items[1:]))
        if head == "or":
            return Or(tuple(self.formula(n, timed) for n in items[1:]))
        if head == "not":
            self._count(node, 2)
            return Not(self.formula(items[1], timed))
        if head in ("forall", "exists"):
            self._count(node, 3)
            if not items[1].is_list:
                raise ParseError(f"'{head}' needs a variable list", items[1].line, items[1].col)
            variables = tuple(_typed_list(items[1].value))
            body = self.formula(items[2], timed)
            return Forall(variables, body) if head == "forall" else Exists(variables, body)
        if head == "when":
            self._count(node, 3)
            return When(self.formula(items[1], timed), self.formula(items[2], timed))
        if head == "=":
            self._count(node, 3)
            return Equals(_sym(items[1], "argument"), _sym(items[2], "argument"))
        if (head in ("at", "over") and timed and len(items) == 3 and not items[1].is_list
                and items[1].value in ("start", "end", "all")):
            tag = f"{head} {items[1].value}"
            when = {"at start": "start", "at end": "end", "over all": "all"}.get(tag)
            if when is None:
                raise ParseError(f"unknown time specifier '{tag}'", node.line, node.col)
            return Timed(when, self.formula(items[2], False))
        if head is None:
            raise ParseError("expected a relation or connective", node.line, node.col)
        return self.atom(node)

    @staticmethod
    def _count(node: Node, n: int) -> None:
        if len(node.value) != n:
            raise ParseError(f"'{node.head()}' expects {n - 1} operands", node.line, node.col)


def _sections(root: Node, kind: str) -> tuple[str, list[Node]]:
    items = root.value if root.is_list else None
    if not items or root.head() != "define" or len(items) < 2:
        raise ParseError("expected (define ...)", root.line, root.col)
    name_node = items[1]
    if not name_node.is_list or name_node.head() != kind or len(name_node.value) != 2:
        raise ParseError(f"expected ({kind} <name>)", name_node.line, name_node.col)
    return _sym(name_node.value[1], f"{kind} name"), items[2:]


def _single_root(text: str) -> Node:
    roots = read_sexprs(text)
    if len(roots) != 1:
        raise ParseError(f"expected one top-level form, found {len(roots)}", 1, 1)
    return roots[0]


# ---------------------------------------------------------------------------
# domain

def parse_domain(text: str) -> RawDomain:
    root = _single_root(text)
    name, sections = _sections(root, "domain")
    requirements: list[str] = []
    types: dict[str, str] = {}
    constants: list[tuple[str, str]] = []
    predicates: list[tuple[str, tuple[tuple[str, str], ...]]] = []
    action_nodes: list[Node] = []
    for sec in sections:
        head = sec.head()
        body = sec.value[1:] if sec.is_list else []
        if head == ":requirements":
            requirements = [_sym(n, "requirement") for n in body]
        elif head == ":types":
            for t, parent in _typed_list(body):
                types[t] = parent
        elif head == ":constants":
            constants = _typed_list(body)
        elif head == ":predicates":
            for p in body:
                if not p.is_list or p.head() is None:
                    raise ParseError("malformed predicate declaration", p.line, p.col)
                pname = p.value[0].value
                if any(pname == q for q, _ in predicates):
                    raise ParseError(f"predicate '{pname}' declared twice", p.line, p.col)
                predicates.append((pname, tuple(_typed_list(p.value[1:]))))
        elif head == ":functions":
            log.warning("numeric functions are ignored")
        elif head in (":action", ":durative-action"):
            action_nodes.append(sec)
        else:
            raise ParseError(f"unknown domain section '{head}'", sec.line, sec.col)
    for req in requirements:
        if req not in HONORED_REQUIREMENTS:
            log.warning("requirement %s is not supported and will be ignored", req)
    known_types = set(types) | {"object"}
    for t, parent in list(types.items()):
        if parent not in known_types:
            raise ParseError(f"undeclared type '{parent}'", root.line, root.col)
    for _, t in constants:
        if t not in known_types:
            raise ParseError(f"undeclared type '{t}'", root.line, root.col)
    for _, params in predicates:
        for _, t in params:
            if t not in known_types:
                raise ParseError(f"undeclared type '{t}'", root.line, root.col)
    parser = _Parser({n: len(ps) for n, ps in predicates})
    actions = tuple(_parse_action(n, parser, known_types) for n in action_nodes)
    seen: set[str] = set()
    for act in actions:
        if act.name in seen:
            raise ParseError(f"action '{act.name}' declared twice", *act.pos)
        seen.add(act.name)
    dom = RawDomain(name, tuple(requirements), types, tuple(constants), tuple(predicates), actions)
    check_scope(dom)
    return dom


def _parse_action(node: Node, parser: _Parser, known_types: set[str]) -> RawAction:
    durative = node.head() == ":durative-action"
    items = node.value
    if len(items) < 2:
        raise ParseError("action name expected", node.line, node.col)
    name = _sym(items[1], "action name")
    fields: dict[str, Node] = {}
    i = 2
    while i < len(items):
        key = _sym(items[i], "action field")
        if i + 1 >= len(items):
            raise ParseError(f"missing value for {key}", items[i].line, items[i].col)
        if key in fields:
            raise ParseError(f"duplicate field {key}", items[i].line, items[i].col)
        fields[key] = items[i + 1]
        i += 2
    allowed = {":parameters", ":duration", ":condition", ":effect"} if durative else \
        {":parameters", ":precondition", ":effect"}
    for key, val in fields.items():
        if key not in allowed:
            raise ParseError(f"unexpected field {key} in action '{name}'", val.line, val.col)
    params: tuple[tuple[str, str], ...] = ()
    if ":parameters" in fields:
        pnode = fields[":parameters"]
        if not pnode.is_list:
            raise ParseError("parameter list expected", pnode.line, pnode.col)
        params = tuple(_typed_list(pnode.value))
        for _, t in params:
            if t not in known_types:
                raise ParseError(f"undeclared type '{t}'", pnode.line, pnode.col)
    cond_key = ":condition" if durative else ":precondition"
    condition = parser.formula(fields[cond_key], durative) if cond_key in fields else None
    effect = parser.formula(fields[":effect"], durative) if ":effect" in fields else None
    for f, what in ((condition, "condition"), (effect, "effect")):
        if f is not None:
            _check_annotations(f, durative, name, what, (node.line, node.col))
    duration = fields[":duration"].to_data() if durative and ":duration" in fields else None
    return RawAction(name, params, "durative" if durative else "instantaneous",
                     condition, effect, duration, (node.line, node.col))


def _check_annotations(f: Formula, durative: bool, name: str, what: str,
                       pos: tuple[int, int]) -> None:
    """Temporal annotations appear at top level iff the action is durative."""
    parts = f.parts if isinstance(f, And) else (f,)
    for p in parts:
        if durative and not isinstance(p, Timed):
            raise ParseError(f"durative action '{name}' has an untimed {what}", *pos)
        if durative and what == "effect" and p.when == "all":
            raise ParseError(f"durative action '{name}' has an over-all effect", *pos)
        if not durative and _has_timed(p):
            raise ParseError(f"instantaneous action '{name}' has a timed {what}", *pos)


def _has_timed(f: Formula) -> bool:
    if isinstance(f, Timed):
        return True
    if isinstance(f, (And, Or)):
        return any(_has_timed(p) for p in f.parts)
    if isinstance(f, (Not, Forall, Exists)):
        return _has_timed(f.body)
    if isinstance(f, When):
        return _has_timed(f.condition) or _has_timed(f.effect)
    return False


def free_variables(f: Optional[Formula]) -> set[str]:
    if isinstance(f, Atom):
        return {a for a in f.args if a.startswith("?")}
    if isinstance(f, Equals):
        return {a for a in (f.left, f.right) if a.startswith("?")}
    if isinstance(f, (And, Or)):
        return set().union(*(free_variables(p) for p in f.parts)) if f.parts else set()
    if isinstance(f, (Not, Timed)):
        return free_variables(f.body)
    if isinstance(f, (Forall, Exists)):
        return free_variables(f.body) - {v for v, _ in f.variables}
    if isinstance(f, When):
        return free_variables(f.condition) | free_variables(f.effect)
    return set()


def check_scope(domain: RawDomain) -> None:
    """Every variable in a formula must be a parameter or quantifier-bound."""
    for act in domain.actions:
        params = {p for p, _ in act.parameters}
        for f in (act.condition, act.effect):
            unbound = free_variables(f) - params
            if unbound:
                raise ParseError(
                    f"unbound variable {sorted(unbound)[0]} in action '{act.name}'", *act.pos)


# ---------------------------------------------------------------------------
# problem

def parse_problem(text: str, domain: Optional[RawDomain] = None) -> RawProblem:
    root = _single_root(text)
    name, sections = _sections(root, "problem")
    domain_name = ""
    objects: list[tuple[str, str]] = []
    init: list[Atom] = []
    goal: Optional[Formula] = None
    preds = {n: len(ps) for n, ps in domain.predicates} if domain else None
    parser = _Parser(preds, strict=domain is not None)
    for sec in sections:
        head = sec.head()
        body = sec.value[1:] if sec.is_list else []
        if head == ":domain":
            domain_name = _sym(body[0], "domain name") if body else ""
        elif head == ":objects":
            objects = _typed_list(body)
        elif head == ":init":
            for n in body:
                if not n.is_list or n.head() in (None, "not", "and", "="):
                    raise ParseError("only positive ground atoms are allowed in :init",
                                     n.line, n.col)
                init.append(parser.atom(n))
        elif head == ":goal":
            goal = parser.formula(body[0]) if body else None
        elif head in (":requirements", ":metric"):
            log.warning("problem section %s is ignored", head)
        else:
            raise ParseError(f"unknown problem section '{head}'", sec.line, sec.col)
    seen: set[str] = set()
    for o, _ in objects:
        if o in seen:
            raise ParseError(f"object '{o}' declared twice", root.line, root.col)
        seen.add(o)
    return RawProblem(name, domain_name, tuple(objects), frozenset(init), goal)


# ---------------------------------------------------------------------------
# printing

def _typed(items) -> str:
    return " ".join(f"{n} - {t}" if t != "object" else n for n, t in items)


def _data(d) -> str:
    if isinstance(d, tuple):
        return "(" + " ".join(_data(x) for x in d) + ")"
    return d


def format_formula(f: Formula) -> str:
    if isinstance(f, Atom):
        return "(" + " ".join((f.relation,) + f.args) + ")"
    if isinstance(f, Not):
        return f"(not {format_formula(f.body)})"
    if isinstance(f, And):
        return "(and" + "".join(" " + format_formula(p) for p in f.parts) + ")"
    if isinstance(f, Or):
        return "(or" + "".join(" " + format_formula(p) for p in f.parts) + ")"
    if isinstance(f, Forall):
        return f"(forall ({_typed(f.variables)}) {format_formula(f.body)})"
    if isinstance(f, Exists):
        return f"(exists ({_typed(f.variables)}) {format_formula(f.body)})"
    if isinstance(f, When):
        return f"(when {format_formula(f.condition)} {format_formula(f.effect)})"
    if isinstance(f, Equals):
        return f"(= {f.left} {f.right})"
    if isinstance(f, Timed):
        tag = {"start": "at start", "end": "at end", "all": "over all"}[f.when]
        return f"({tag} {format_formula(f.body)})"
    raise TypeError(f)


def format_domain(d: RawDomain) -> str:
    lines = [f"(define (domain {d.name})"]
    if d.requirements:
        lines.append(" (:requirements " + " ".join(d.requirements) + ")")
    if d.types:
        lines.append(" (:types " + _typed(d.types.items()) + ")")
    if d.constants:
        lines.append(" (:constants " + _typed(d.constants) + ")")
    preds = " ".join("(" + " ".join([n] + ([_typed(ps)] if ps else [])) + ")"
                     for n, ps in d.predicates)
    lines.append(f" (:predicates {preds})")
    for a in d.actions:
        if a.kind == "durative":
            lines.append(f" (:durative-action {a.name}")
        else:
            lines.append(f" (:action {a.name}")
        lines.append(f"  :parameters ({_typed(a.parameters)})")
        if a.duration is not None:
            lines.append(f"  :duration {_data(a.duration)}")
        if a.condition is not None:
            key = ":condition" if a.kind == "durative" else ":precondition"
            lines.append(f"  {key} {format_formula(a.condition)}")
        if a.effect is not None:
            lines.append(f"  :effect {format_formula(a.effect)}")
        lines[-1] += ")"
    lines.append(")")
    return "\n".join(lines) + "\n"
