"""Canonical action model.

A canonical domain holds instantaneous schemas (four literal sets each) and
durative schemas split into start/invariant/end fragments. Types become
static unary relations ``is-<type>``.

Argument conventions inside a :class:`Literal`:

* ``?name@schema`` is a free variable (a schema parameter),
* ``*0``, ``*1`` ... are universally quantified variables,
* anything else is a constant.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Optional

from . import pddl
from .pddl import And, Atom, Equals, Exists, Forall, Not, Or, RawDomain, Timed, When

log = logging.getLogger(__name__)


class CanonError(Exception):
    def __init__(self, message: str, pos: tuple[int, int] = (0, 0)):
        super().__init__(message)
        self.message = message
        self.line, self.col = pos

    def __str__(self) -> str:
        if self.line:
            return f"{self.line}:{self.col}: {self.message}"
        return self.message


class UnsupportedFeature(CanonError):
    pass


class IllegalDurative(CanonError):
    def __init__(self, schema: str, literal: "Literal", condition: int, pos=(0, 0)):
        super().__init__(
            f"durative action '{schema}' is illegal: {literal} violates condition {condition}",
            pos)
        self.schema = schema
        self.literal = literal
        self.condition = condition


def is_var(arg: str) -> bool:
    return arg.startswith("?")


def is_qvar(arg: str) -> bool:
    return arg.startswith("*")


def is_const(arg: str) -> bool:
    return not (is_var(arg) or is_qvar(arg))


def show_arg(arg: str) -> str:
    if is_var(arg):
        return arg[1:].split("@", 1)[0]
    return arg


@dataclass(frozen=True, order=True)
class Literal:
    relation: str
    args: tuple[str, ...]

    @property
    def arity(self) -> int:
        return len(self.args)

    @property
    def quantified(self) -> frozenset[int]:
        return frozenset(i for i, a in enumerate(self.args) if is_qvar(a))

    @property
    def variables(self) -> frozenset[str]:
        return frozenset(a for a in self.args if is_var(a))

    def rename(self, mapping) -> "Literal":
        return Literal(self.relation, tuple(mapping(a) if is_var(a) else a for a in self.args))

    def __str__(self) -> str:
        body = f"{self.relation}({','.join(show_arg(a) for a in self.args)})"
        if self.quantified:
            qs = sorted({a for a in self.args if is_qvar(a)})
            return f"forall {' '.join(qs)}: {body}"
        return body


LiteralSet = frozenset  # frozenset[Literal]
EMPTY: frozenset = frozenset()


@dataclass(frozen=True)
class InstantaneousSchema:
    name: str
    params: tuple[str, ...]
    pre_plus: frozenset = EMPTY
    pre_minus: frozenset = EMPTY
    eff_plus: frozenset = EMPTY
    eff_minus: frozenset = EMPTY
    param_types: tuple[str, ...] = field(default=(), compare=False)
    role: Optional[str] = field(default=None, compare=False)  # st, inv, end or None
    parent: Optional[str] = field(default=None, compare=False)

    def literals(self) -> frozenset:
        return self.pre_plus | self.pre_minus | self.eff_plus | self.eff_minus

    def restrict(self, keep: frozenset) -> "InstantaneousSchema":
        return InstantaneousSchema(
            self.name, self.params, self.pre_plus & keep, self.pre_minus & keep,
            self.eff_plus & keep, self.eff_minus & keep, self.param_types, self.role,
            self.parent)

    def rename(self, mapping) -> "InstantaneousSchema":
        def r(s):
            return frozenset(l.rename(mapping) for l in s)
        return InstantaneousSchema(
            self.name, tuple(mapping(p) for p in self.params), r(self.pre_plus),
            r(self.pre_minus), r(self.eff_plus), r(self.eff_minus), self.param_types,
            self.role, self.parent)


@dataclass(frozen=True)
class DurativeSchema:
    name: str
    params: tuple[str, ...]
    st: InstantaneousSchema
    inv: InstantaneousSchema
    end: InstantaneousSchema
    duration: Optional[tuple] = field(default=None, compare=False)
    param_types: tuple[str, ...] = field(default=(), compare=False)

    @property
    def fragments(self) -> tuple[InstantaneousSchema, ...]:
        return (self.st, self.inv, self.end)

    def literals(self) -> frozenset:
        return self.st.literals() | self.inv.literals() | self.end.literals()


@dataclass(frozen=True)
class CanonicalDomain:
    name: str
    relations: dict  # name -> arity
    static_relations: frozenset
    inst_schemas: tuple[InstantaneousSchema, ...]
    dur_schemas: tuple[DurativeSchema, ...]
    types: dict = field(default_factory=dict, compare=False)  # type -> parent
    constants: tuple = field(default=(), compare=False)
    predicate_types: dict = field(default_factory=dict, compare=False)

    @property
    def type_relations(self) -> frozenset:
        return frozenset(type_relation(t) for t in self.types)

    @property
    def modifiable_relations(self) -> list[str]:
        return sorted(r for r in self.relations if r not in self.static_relations)

    def all_instantaneous(self) -> list[InstantaneousSchema]:
        """Native instantaneous schemas followed by every durative fragment."""
        out = list(self.inst_schemas)
        for d in self.dur_schemas:
            out.extend(d.fragments)
        return out

    def schema(self, name: str):
        for s in self.inst_schemas + self.dur_schemas:
            if s.name == name:
                return s
        raise KeyError(name)

    def supertypes(self, t: str) -> list[str]:
        out = []
        while t != "object" and t not in out:
            out.append(t)
            t = self.types.get(t, "object")
        return out


def type_relation(t: str) -> str:
    return f"is-{t}"


# ---------------------------------------------------------------------------
# normalization

def normalize_formula(f, positive: bool = True) -> tuple[frozenset, frozenset]:
    """Flatten ``f`` into (positive literals, negative literals).

    Universal quantifiers are kept on single literals. Disjunction,
    existentials, conditional effects, equality and negated universals are
    rejected.
    """
    if isinstance(positive, str):
        positive = positive == "positive"
    plus: set[Literal] = set()
    minus: set[Literal] = set()
    _norm(f, positive, {}, plus, minus)
    return frozenset(plus), frozenset(minus)


def _norm(f, positive: bool, qmap: dict, plus: set, minus: set) -> None:
    if f is None:
        return
    if isinstance(f, Atom):
        args = tuple(qmap.get(a, a) for a in f.args)
        lit = Literal(f.relation, _number_qvars(args))
        (plus if positive else minus).add(lit)
    elif isinstance(f, Not):
        _norm(f.body, not positive, qmap, plus, minus)
    elif isinstance(f, And):
        if not positive and len(f.parts) > 1:
            raise UnsupportedFeature("negated conjunction (a disjunction) is not supported")
        for p in f.parts:
            _norm(p, positive, qmap, plus, minus)
    elif isinstance(f, Or):
        if positive and len(f.parts) > 1:
            raise UnsupportedFeature("disjunction ('or') is not supported")
        for p in f.parts:
            _norm(p, positive, qmap, plus, minus)
    elif isinstance(f, Forall):
        if not positive:
            raise UnsupportedFeature("negated universal quantifier is not supported")
        inner = dict(qmap)
        for v, t in f.variables:
            if t != "object":
                log.warning("typed quantified variable %s - %s ranges over all objects", v, t)
            inner[v] = f"*{v}"
        _norm(f.body, positive, inner, plus, minus)
    elif isinstance(f, Exists):
        raise UnsupportedFeature("existential quantifier ('exists') is not supported")
    elif isinstance(f, When):
        raise UnsupportedFeature("conditional effect ('when') is not supported")
    elif isinstance(f, Equals):
        raise UnsupportedFeature("equality ('=') is not supported")
    elif isinstance(f, Timed):
        raise UnsupportedFeature("nested temporal annotation")
    else:
        raise TypeError(f"not a formula: {f!r}")


def _number_qvars(args: tuple[str, ...]) -> tuple[str, ...]:
    names: dict[str, str] = {}
    out = []
    for a in args:
        if a.startswith("*"):
            if a in names:
                raise UnsupportedFeature(
                    "a quantified variable occurring twice in one literal is not supported")
            names[a] = f"*{len(names)}"
            out.append(names[a])
        else:
            out.append(a)
    return tuple(out)


# ---------------------------------------------------------------------------
# canonicalization

def _split_timed(f) -> dict[str, list]:
    out: dict[str, list] = {"start": [], "all": [], "end": []}
    if f is None:
        return out
    parts = f.parts if isinstance(f, And) else (f,)
    for p in parts:
        out[p.when].append(p.body)
    return out


def _sets(forms: Iterable) -> tuple[frozenset, frozenset]:
    return normalize_formula(And(tuple(forms)))


def _rename_map(schema: str, params: Iterable[str], constants: set[str]):
    names = set(params)

    def mapping(arg: str) -> str:
        if arg in names:
            return f"{arg}@{schema}"
        if arg.startswith("?"):
            raise UnsupportedFeature(f"unbound variable {arg} in '{schema}'")
        return arg
    return mapping


def canonicalize(raw: RawDomain) -> CanonicalDomain:
    relations = {name: len(ps) for name, ps in raw.predicates}
    for t in raw.types:
        if t != "object":
            relations[type_relation(t)] = 1
    types = {t: p for t, p in raw.types.items() if t != "object"}
    constants = {c for c, _ in raw.constants}
    inst: list[InstantaneousSchema] = []
    dur: list[DurativeSchema] = []
    for act in raw.actions:
        try:
            if act.kind == "durative":
                dur.append(_durative(act, types, constants))
            else:
                inst.append(_instantaneous(act, types, constants))
        except CanonError as e:
            if not e.line:
                e.line, e.col = act.pos
            raise
    modified: set[str] = set()
    for s in inst + [f for d in dur for f in d.fragments]:
        modified |= {l.relation for l in s.eff_plus | s.eff_minus}
    for s in inst + [f for d in dur for f in d.fragments]:
        for l in s.literals():
            if l.relation not in relations:
                raise CanonError(f"undeclared relation '{l.relation}' in '{s.name}'")
    static = frozenset(r for r in relations if r not in modified)
    ptypes = {name: tuple(t for _, t in ps) for name, ps in raw.predicates}
    for t in types:
        ptypes[type_relation(t)] = ("object",)
    return CanonicalDomain(raw.name, dict(sorted(relations.items())), static, tuple(inst),
                           tuple(dur), types, tuple(raw.constants), ptypes)


def _type_literals(params, mapping) -> frozenset:
    return frozenset(Literal(type_relation(t), (mapping(v),)) for v, t in params if t != "object")


def _instantaneous(act, types, constants) -> InstantaneousSchema:
    m = _rename_map(act.name, (p for p, _ in act.parameters), constants)
    pp, pm = normalize_formula(act.condition)
    ep, em = normalize_formula(act.effect)
    r = lambda s: frozenset(l.rename(m) for l in s)  # noqa: E731
    params = tuple(m(p) for p, _ in act.parameters)
    return InstantaneousSchema(
        act.name, params, r(pp) | _type_literals(act.parameters, m), r(pm), r(ep), r(em),
        tuple(t for _, t in act.parameters))


def _durative(act, types, constants) -> DurativeSchema:
    m = _rename_map(act.name, (p for p, _ in act.parameters), constants)
    conds = _split_timed(act.condition)
    effs = _split_timed(act.effect)
    if effs["all"]:
        raise UnsupportedFeature("over-all effects are not allowed")
    r = lambda s: frozenset(l.rename(m) for l in s)  # noqa: E731
    params = tuple(m(p) for p, _ in act.parameters)
    ptypes = tuple(t for _, t in act.parameters)
    frags = {}
    for tag, role in (("start", "st"), ("all", "inv"), ("end", "end")):
        pp, pm = _sets(conds[tag])
        ep, em = _sets(effs[tag]) if tag != "all" else (EMPTY, EMPTY)
        if role == "st":
            pp = r(pp) | _type_literals(act.parameters, m)
        else:
            pp = r(pp)
        frags[role] = InstantaneousSchema(
            f"{act.name}-{role}", params, pp, r(pm), r(ep), r(em), ptypes, role, act.name)
    d = DurativeSchema(act.name, params, frags["st"], frags["inv"], frags["end"],
                       act.duration, ptypes)
    check_legal(d)
    return d


def check_legal(d: DurativeSchema) -> None:
    st, inv, end = d.st, d.inv, d.end
    tests = (
        (1, inv.pre_minus, ((st.pre_plus - st.eff_minus) | st.eff_plus)),
        (2, inv.pre_plus, ((st.pre_minus - st.eff_plus) | st.eff_minus)),
        (3, inv.pre_plus, end.pre_minus),
        (4, inv.pre_minus, end.pre_plus),
    )
    for number, a, b in tests:
        bad = sorted(a & b)
        if bad:
            raise IllegalDurative(d.name, bad[0], number)


# ---------------------------------------------------------------------------
# output

def _lit_sexpr(l: Literal, negated: bool = False) -> str:
    args = []
    qvars = []
    for a in l.args:
        if is_var(a):
            args.append("?" + show_arg(a))
        elif is_qvar(a):
            name = "?q" + a[1:]
            args.append(name)
            qvars.append(name)
        else:
            args.append(a)
    body = "(" + " ".join([l.relation] + args) + ")"
    if negated:
        body = f"(not {body})"
    if qvars:
        body = f"(forall ({' '.join(qvars)}) {body})"
    return body


def _conj(items: list[str]) -> str:
    return "(and" + "".join(" " + i for i in items) + ")"


def _signed(pos: frozenset, neg: frozenset) -> list[str]:
    return [_lit_sexpr(l) for l in sorted(pos)] + [_lit_sexpr(l, True) for l in sorted(neg)]


def format_canonical(domain: CanonicalDomain) -> str:
    """Deterministic PDDL rendering of a canonical domain.

    Types are emitted as explicit ``is-<type>`` predicates, so the text
    parses back into the same canonical schemas.
    """
    lines = ["; tempinv-format 1", f"(define (domain {domain.name})"]
    if domain.dur_schemas:
        lines.append(" (:requirements :durative-actions)")
    if domain.constants:
        lines.append(" (:constants " + " ".join(c for c, _ in domain.constants) + ")")
    preds = " ".join("(" + " ".join([r] + [f"?a{i}" for i in range(a)]) + ")"
                     for r, a in domain.relations.items())
    lines.append(f" (:predicates {preds})")
    for s in sorted(domain.inst_schemas, key=lambda s: s.name):
        params = " ".join("?" + show_arg(p) for p in s.params)
        lines.append(f" (:action {s.name}")
        lines.append(f"  :parameters ({params})")
        lines.append(f"  :precondition {_conj(_signed(s.pre_plus, s.pre_minus))}")
        lines.append(f"  :effect {_conj(_signed(s.eff_plus, s.eff_minus))})")
    for d in sorted(domain.dur_schemas, key=lambda d: d.name):
        params = " ".join("?" + show_arg(p) for p in d.params)
        lines.append(f" (:durative-action {d.name}")
        lines.append(f"  :parameters ({params})")
        dur = pddl._data(d.duration) if d.duration is not None else "(= ?duration 1)"
        lines.append(f"  :duration {dur}")
        cond = []
        for tag, frag in (("at start", d.st), ("over all", d.inv), ("at end", d.end)):
            cond += [f"({tag} {x})" for x in _signed(frag.pre_plus, frag.pre_minus)]
        eff = []
        for tag, frag in (("at start", d.st), ("at end", d.end)):
            eff += [f"({tag} {x})" for x in _signed(frag.eff_plus, frag.eff_minus)]
        lines.append(f"  :condition {_conj(cond)}")
        lines.append(f"  :effect {_conj(eff)})")
    lines.append(")")
    return "\n".join(lines) + "\n"


def load_domain(text: str) -> CanonicalDomain:
    return canonicalize(pddl.parse_domain(text))
