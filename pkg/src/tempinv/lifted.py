"""Lifted safety analysis of action schemas against a template.

Everything here works on schemas and literals, never on objects. Weights are
symbolic (:class:`SymWeight`), so a quantified literal weighs "many".
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, Iterator, Optional

from .canon import (CanonicalDomain, DurativeSchema, InstantaneousSchema, Literal, is_const,
                    is_qvar, is_var)
from .templates import SymWeight, Template

Matching = frozenset  # frozenset[tuple[str, str]]: (variable of side 1, variable of side 2)


class Classification(str, enum.Enum):
    UNREACHABLE = "unreachable"
    HEAVY = "heavy"
    IRRELEVANT = "irrelevant"
    BALANCED = "relevant balanced"
    UNBALANCED = "relevant unbalanced"
    BOUNDED = "relevant bounded"
    UNBOUNDED = "relevant unbounded"

    @property
    def relevant(self) -> bool:
        return self.value.startswith("relevant")

    @property
    def strongly_safe(self) -> bool:
        return self in SAFE

    def __str__(self) -> str:
        return self.value


SAFE = frozenset({Classification.UNREACHABLE, Classification.IRRELEVANT,
                  Classification.BALANCED, Classification.BOUNDED})
NEUTRAL = frozenset({Classification.IRRELEVANT, Classification.BALANCED})


class Proof(str, enum.Enum):
    STRONG_SAFETY = "ByCorStrongSafety"
    TYPE_A = "ByCorTypeA"
    STAR_SAFETY = "ByCorStarSafety"
    NON_INTERTWINING = "ByCorNonIntertwining"
    BALANCE = "ByBalance"

    def __str__(self) -> str:
        return self.value


# ---------------------------------------------------------------------------
# literal sets with quantified literals


def _covers(m: Literal, l: Literal) -> bool:
    """Every ground atom of ``l`` is a ground atom of ``m``."""
    if m.relation != l.relation or m.arity != l.arity:
        return False
    return all(is_qvar(a) or (not is_qvar(b) and a == b) for a, b in zip(m.args, l.args))


def overlap(l1: Literal, l2: Literal) -> bool:
    """The two literals share a ground atom under every injective grounding."""
    if l1.relation != l2.relation or l1.arity != l2.arity:
        return False
    return all(is_qvar(a) or is_qvar(b) or a == b for a, b in zip(l1.args, l2.args))


def member(l: Literal, s: Iterable[Literal]) -> bool:
    return any(_covers(m, l) for m in s)


def subset(a: Iterable[Literal], b: frozenset) -> bool:
    return all(member(l, b) for l in a)


def intersects(a: Iterable[Literal], b: Iterable[Literal]) -> bool:
    b = list(b)
    return any(overlap(x, y) for x in a for y in b)


def minus(a: frozenset, b: frozenset) -> frozenset:
    return frozenset(l for l in a if not member(l, b))


def weight(s: Iterable[Literal]) -> SymWeight:
    w = SymWeight.ZERO
    for l in s:
        w = w + (SymWeight.MANY if l.quantified else SymWeight.ONE)
    return w


def gamma_plus(a: InstantaneousSchema) -> frozenset:
    return minus(a.pre_plus, a.eff_minus) | a.eff_plus


def gamma_minus(a: InstantaneousSchema) -> frozenset:
    return minus(a.pre_minus, a.eff_plus) | a.eff_minus


# ---------------------------------------------------------------------------
# classes


def match_component(l: Literal, t: Template) -> Optional[int]:
    for i, c in enumerate(t.components):
        if c.relation == l.relation and c.arity == l.arity:
            q = l.quantified
            if not q or (c.has_counted and q == {c.counted}):
                return i
            return None
    return None


def class_key(l: Literal, t: Template, index: Optional[int] = None) -> tuple:
    if index is None:
        index = match_component(l, t)
    return tuple(l.args[p] for p in t.layout[index])


@dataclass(frozen=True)
class TClass:
    key: tuple
    literals: frozenset

    def component_of(self, l: Literal, t: Template):
        return t.components[match_component(l, t)]

    def __str__(self) -> str:
        return "{" + ", ".join(str(l) for l in sorted(self.literals)) + "}"


def _literals_of(schema) -> frozenset:
    return schema.literals()


def t_classes(schema, t: Template) -> list[TClass]:
    groups: dict[tuple, set] = {}
    for l in _literals_of(schema):
        i = match_component(l, t)
        if i is not None:
            groups.setdefault(class_key(l, t, i), set()).add(l)
    return [TClass(k, frozenset(v)) for k, v in sorted(groups.items())]


def unmatched_additions(schema: InstantaneousSchema, t: Template) -> list[Literal]:
    """Added literals of a template relation that match no component.

    They could add atoms of an instantiation that no class accounts for, so
    any template exposed to one is left unproved.
    """
    return sorted(l for l in schema.eff_plus
                  if l.relation in t.relations and match_component(l, t) is None)


def pure(schema: InstantaneousSchema, tclass: TClass) -> InstantaneousSchema:
    return schema.restrict(tclass.literals)


def covers(lits: Iterable[Literal], t: Template) -> bool:
    """The literals account for the whole instantiation.

    A counted component is covered only by a literal quantified over the
    counted position: a finite set of simple literals cannot sweep an
    unbounded object set.
    """
    lits = list(lits)
    for i, c in enumerate(t.components):
        mine = [l for l in lits if match_component(l, t) == i]
        if c.has_counted:
            if not any(l.quantified for l in mine):
                return False
        elif not mine:
            return False
    return True


def classify_pure(p: InstantaneousSchema, t: Template) -> Classification:
    wp = weight(p.pre_plus)
    we = weight(p.eff_plus)
    if wp.ge2():
        return Classification.UNREACHABLE
    if we.ge2():
        return Classification.HEAVY
    if we.eq0():
        return Classification.IRRELEVANT
    if wp.eq1():
        if subset(p.pre_plus, p.eff_plus | p.eff_minus):
            return Classification.BALANCED
        return Classification.UNBALANCED
    if covers(p.literals(), t):
        return Classification.BOUNDED
    return Classification.UNBOUNDED


def strongly_safe(schema: InstantaneousSchema, t: Template) -> bool:
    if unmatched_additions(schema, t):
        return False
    return all(classify_pure(pure(schema, L), t) in SAFE for L in t_classes(schema, t))


# ---------------------------------------------------------------------------
# auxiliary durative schemas


@dataclass(frozen=True)
class AuxSchema:
    st_star: InstantaneousSchema
    end_star: InstantaneousSchema


def make_aux(d: DurativeSchema) -> AuxSchema:
    st, inv, end = d.st, d.inv, d.end
    st_star = InstantaneousSchema(
        f"{d.name}-st*", d.params,
        st.pre_plus | minus(inv.pre_plus, st.eff_plus),
        st.pre_minus | minus(inv.pre_minus, st.eff_minus),
        st.eff_plus, st.eff_minus, d.param_types, "st*", d.name)
    end_star = InstantaneousSchema(
        f"{d.name}-end*", d.params,
        end.pre_plus | inv.pre_plus, end.pre_minus | inv.pre_minus,
        end.eff_plus, end.eff_minus, d.param_types, "end*", d.name)
    return AuxSchema(st_star, end_star)


def aux_executable(aux: AuxSchema) -> bool:
    s, e = aux.st_star, aux.end_star
    return not intersects(gamma_plus(s), e.pre_minus) and \
        not intersects(gamma_minus(s), e.pre_plus)


def aux_reachable(d: DurativeSchema, L: TClass, aux: Optional[AuxSchema] = None) -> bool:
    aux = aux or make_aux(d)
    if not aux_executable(aux):
        return False
    s = aux.st_star.restrict(L.literals)
    e = aux.end_star.restrict(L.literals)
    return weight(s.pre_plus | minus(e.pre_plus, s.eff_plus)).le1()


def simply_safe_type(d: DurativeSchema, L: TClass, t: Template,
                     aux: Optional[AuxSchema] = None) -> Optional[str]:
    """Return "a", "b", "c" or "d" when the class is simply safe of that type."""
    aux = aux or make_aux(d)
    if not aux_reachable(d, L, aux):
        return None
    s_star = aux.st_star.restrict(L.literals)
    e_star = aux.end_star.restrict(L.literals)
    cs = classify_pure(s_star, t)
    if cs not in SAFE:
        return None
    if classify_pure(e_star, t) is not Classification.UNBOUNDED:
        return None
    end_l = d.end.restrict(L.literals)
    st_l = d.st.restrict(L.literals)
    end_effects = end_l.eff_minus | end_l.eff_plus
    if cs is Classification.IRRELEVANT:
        w = weight(s_star.pre_plus)
        if w.eq1():
            if subset(s_star.pre_plus, s_star.eff_minus):
                return "a"
            if subset(s_star.pre_plus, end_effects):
                return "b"
        elif w.eq0():
            if covers(s_star.pre_minus | s_star.eff_minus | end_effects, t):
                return "c"
        return None
    if cs.relevant and subset(st_l.eff_plus, end_effects):
        return "d"
    return None


# ---------------------------------------------------------------------------
# matchings and reduced alphabets


def _pairs_injective(pairs: Iterable[tuple[str, str]]) -> Optional[frozenset]:
    left: dict[str, str] = {}
    right: dict[str, str] = {}
    for a, b in pairs:
        if left.setdefault(a, b) != b or right.setdefault(b, a) != a:
            return None
    return frozenset(left.items())


def class_matching(L1: TClass, L2: TClass, t: Template) -> Optional[Matching]:
    """Pairs of variables at equivalent fixed positions; None if incoherent."""
    return _key_matching(L1.key, L2.key)


def _key_matching(k1: tuple, k2: tuple) -> Optional[Matching]:
    pairs = []
    for a, b in zip(k1, k2):
        if is_var(a) and is_var(b):
            pairs.append((a, b))
        elif is_const(a) and is_const(b) and a == b:
            continue
        else:
            return None
    return _pairs_injective(pairs)


def reducers(m: Matching) -> tuple[Callable[[str], str], Callable[[str], str]]:
    """Renamings of side 1 and side 2 into one alphabet identifying matched pairs."""
    back = {b: a for a, b in m}

    def r1(v: str) -> str:
        return v + "|1"

    def r2(v: str) -> str:
        return back[v] + "|1" if v in back else v + "|2"
    return r1, r2


def _rs(s: frozenset, r) -> frozenset:
    return frozenset(l.rename(r) for l in s)


def _non_interfering(a: InstantaneousSchema, b: InstantaneousSchema) -> bool:
    return not intersects(a.eff_plus, b.eff_minus) and \
        not intersects(a.pre_plus | a.pre_minus, b.eff_plus | b.eff_minus)


def m_mutex(a1: InstantaneousSchema, a2: InstantaneousSchema, m: Matching) -> bool:
    r1, r2 = reducers(m)
    x, y = a1.rename(r1), a2.rename(r2)
    return not (_non_interfering(x, y) and _non_interfering(y, x))


def _variables(*schemas: InstantaneousSchema) -> set[str]:
    out: set[str] = set()
    for s in schemas:
        for l in s.literals():
            out |= l.variables
    return out


def _extensions(m: Matching, vars1: Iterable[str], vars2: Iterable[str]) -> Iterator[Matching]:
    """All injective matchings containing ``m`` over the given variables."""
    dom = {a for a, _ in m}
    rng = {b for _, b in m}
    free1 = sorted(v for v in set(vars1) if v not in dom)
    free2 = sorted(v for v in set(vars2) if v not in rng)

    def rec(i: int, used: frozenset, acc: list):
        if i == len(free1):
            yield frozenset(m | frozenset(acc))
            return
        yield from rec(i + 1, used, acc)
        for b in free2:
            if b not in used:
                acc.append((free1[i], b))
                yield from rec(i + 1, used | {b}, acc)
                acc.pop()
    yield from rec(0, frozenset(), [])


def _min_weight(m: Matching, side1, side2, fn) -> SymWeight:
    """Minimum of ``fn(reduced side1, reduced side2)`` over every extension of ``m``.

    Weight conditions can only drop when more variables are identified, so a
    weight-based conclusion must hold for every grounding pair, not only for
    the least identifying one.
    """
    best = SymWeight.MANY
    for ext in _extensions(m, _variables(*side1), _variables(*side2)):
        r1, r2 = reducers(ext)
        w = fn([s.rename(r1) for s in side1], [s.rename(r2) for s in side2])
        best = min(best, w)
        if best.eq0():
            break
    return best


def pair_unreachable(kind: str, d1: DurativeSchema, d2: DurativeSchema,
                     L1: TClass, L2: TClass, t: Template) -> bool:
    """Two overlapping executions cannot both be under way for one instance."""
    m = class_matching(L1, L2, t)
    if m is None:
        return True
    if kind == "inv-end":
        a1, a2, b1, b2 = d1.inv, d2.inv, d1.end, d2.end
    elif kind == "st-inv":
        a1, a2, b1, b2 = d1.st, d2.st, d1.inv, d2.inv
    else:
        raise ValueError(kind)
    r1, r2 = reducers(m)
    for x, y in ((a1.rename(r1), b2.rename(r2)), (a2.rename(r2), b1.rename(r1))):
        if intersects(gamma_plus(x), y.pre_minus) or intersects(gamma_minus(x), y.pre_plus):
            return True
    side1 = [a1.restrict(L1.literals), b1.restrict(L1.literals)]
    side2 = [a2.restrict(L2.literals), b2.restrict(L2.literals)]

    def fn(s1, s2):
        (x1, y1), (x2, y2) = s1, s2
        first = x1.pre_plus | x2.pre_plus
        return weight(first | minus(y1.pre_plus | y2.pre_plus, x1.eff_plus | x2.eff_plus))
    return _min_weight(m, side1, side2, fn).ge2()


# ---------------------------------------------------------------------------
# whole-domain analysis


@dataclass(frozen=True)
class Entry:
    """One pure schema: a schema restricted to one of its classes."""

    schema: InstantaneousSchema
    parent: Optional[DurativeSchema]
    tclass: TClass
    pure: InstantaneousSchema
    classification: Classification


@dataclass(frozen=True)
class Failure:
    schema: str
    tclass: str
    classification: str
    entry: Optional[Entry] = field(default=None, compare=False, repr=False)

    def as_dict(self) -> dict:
        return {"schema": self.schema, "class": self.tclass,
                "classification": self.classification}


@dataclass(frozen=True)
class Verdict:
    invariant: bool
    proof: Optional[Proof] = None
    failures: tuple[Failure, ...] = ()

    @property
    def status(self) -> str:
        return "invariant" if self.invariant else "unknown"

    def as_dict(self, t: Optional[Template] = None) -> dict:
        out: dict = {}
        if t is not None:
            out["template"] = t.key
        out["status"] = self.status
        if self.invariant:
            out["proof"] = str(self.proof)
        else:
            out["failures"] = [f.as_dict() for f in self.failures]
        return out


class Analysis:
    """Classes and classifications of every schema against one template."""

    def __init__(self, t: Template, domain: CanonicalDomain):
        self.t = t
        self.domain = domain
        self.entries: list[Entry] = []
        self.unmatched: list[tuple[InstantaneousSchema, Literal]] = []
        self.dur_classes: dict[str, list[TClass]] = {}
        self.aux: dict[str, AuxSchema] = {}
        for s in domain.inst_schemas:
            self._add(s, None, t_classes(s, t))
        for d in domain.dur_schemas:
            classes = t_classes(d, t)
            self.dur_classes[d.name] = classes
            self.aux[d.name] = make_aux(d)
            for frag in d.fragments:
                self._add(frag, d, [L for L in classes if L.literals & frag.literals()])

    def _add(self, s, parent, classes) -> None:
        for l in unmatched_additions(s, self.t):
            self.unmatched.append((s, l))
        for L in classes:
            p = pure(s, L)
            self.entries.append(Entry(s, parent, L, p, classify_pure(p, self.t)))

    @cached_property
    def dangerous(self) -> list[tuple[DurativeSchema, TClass]]:
        out = []
        for d in self.domain.dur_schemas:
            for L in self.dur_classes[d.name]:
                if any(classify_pure(f.restrict(L.literals), self.t) not in SAFE
                       for f in (d.st, d.end)):
                    out.append((d, L))
        return out

    @cached_property
    def dangerous_keys(self) -> frozenset:
        return frozenset((d.name, L.key) for d, L in self.dangerous)

    def is_dangerous_fragment(self, e: Entry, role: str) -> bool:
        return e.parent is not None and e.schema.role == role and \
            (e.parent.name, e.tclass.key) in self.dangerous_keys

    def star(self, d: DurativeSchema, L: TClass) -> tuple[Classification, Classification]:
        aux = self.aux[d.name]
        return (classify_pure(aux.st_star.restrict(L.literals), self.t),
                classify_pure(aux.end_star.restrict(L.literals), self.t))

    def classes_of(self, schema: InstantaneousSchema) -> list[Entry]:
        return [e for e in self.entries if e.schema is schema]

    def failures(self, allowed=SAFE) -> tuple[Failure, ...]:
        out = [Failure(s.name, str(l), "unmatched addition") for s, l in self.unmatched]
        out += [Failure(e.schema.name, str(e.tclass), e.classification.value, e)
                for e in self.entries if e.classification not in allowed]
        return tuple(out)


def relevant_right_isolated(domain: CanonicalDomain, t: Template,
                            an: Optional[Analysis] = None) -> bool:
    an = an or Analysis(t, domain)
    for (d1, L1), (d2, L2) in itertools.product(an.dangerous, repeat=2):
        m = class_matching(L1, L2, t)
        if m is None:
            continue
        r1, r2 = reducers(m)
        e1 = _rs(d1.end.restrict(L1.literals).eff_plus, r1)
        e2 = _rs(d2.end.restrict(L2.literals).eff_plus, r2)
        if weight(e1 | e2).le1():
            continue
        if m_mutex(d1.end, d2.end, m) or m_mutex(d1.inv, d2.inv, m):
            continue
        if pair_unreachable("inv-end", d1, d2, L1, L2, t):
            continue
        return False
    return True


def relevant_left_isolated(domain: CanonicalDomain, t: Template,
                           an: Optional[Analysis] = None) -> bool:
    an = an or Analysis(t, domain)
    for (d1, L1), (d2, L2) in itertools.product(an.dangerous, repeat=2):
        m = class_matching(L1, L2, t)
        if m is None:
            continue
        if m_mutex(d1.st, d2.st, m) or m_mutex(d1.inv, d2.inv, m):
            continue
        if pair_unreachable("st-inv", d1, d2, L1, L2, t):
            continue
        return False
    return True


def _unify(l1: Literal, l2: Literal) -> Optional[Matching]:
    if l1.relation != l2.relation or l1.arity != l2.arity:
        return None
    pairs = []
    for a, b in zip(l1.args, l2.args):
        if is_qvar(a) or is_qvar(b):
            continue
        if is_var(a) and is_var(b):
            pairs.append((a, b))
        elif a != b or is_var(a) or is_var(b):
            return None
    return _pairs_injective(pairs)


def _blocked(l1: Literal, L1: TClass, attr: str, an: Analysis) -> bool:
    """Some irrelevant ground action may undo ``l1`` (delete it or re-add it)."""
    t = an.t
    for s in an.domain.all_instantaneous():
        classes = an.classes_of(s)
        for e in getattr(s, attr):
            theta = _unify(l1, e)
            if theta is None:
                continue
            forced = [c for c in classes
                      if (mx := class_matching(L1, c.tclass, t)) is not None and mx <= theta]
            if not forced or any(c.classification is Classification.IRRELEVANT
                                 for c in forced):
                return True
    return False


def strongly_irrelevant_unreachable(a1: InstantaneousSchema, L1: TClass,
                                    a2: InstantaneousSchema, L2: TClass,
                                    domain: CanonicalDomain, t: Template,
                                    an: Optional[Analysis] = None) -> bool:
    an = an or Analysis(t, domain)
    m = class_matching(L1, L2, t)
    if m is None:
        return True
    r1, r2 = reducers(m)
    for src, tgt, attr in ((gamma_plus(a1), a2.pre_minus, "eff_minus"),
                           (gamma_minus(a1), a2.pre_plus, "eff_plus")):
        for l1 in sorted(src):
            if any(overlap(l1.rename(r1), l2.rename(r2)) for l2 in tgt):
                if not _blocked(l1, L1, attr, an):
                    return True
    side1 = [a1.restrict(L1.literals)]
    side2 = [a2.restrict(L2.literals)]

    def fn(s1, s2):
        x, y = s1[0], s2[0]
        return weight(x.pre_plus | minus(y.pre_plus, x.eff_plus))
    return _min_weight(m, side1, side2, fn).ge2()


def relevant_non_intertwining(domain: CanonicalDomain, t: Template,
                              an: Optional[Analysis] = None) -> bool:
    an = an or Analysis(t, domain)
    if not relevant_left_isolated(domain, t, an):
        return False
    for d1, L1 in an.dangerous:
        for e in an.entries:
            dangerous_start = an.is_dangerous_fragment(e, "st")
            dangerous_end = an.is_dangerous_fragment(e, "end")
            if (not dangerous_end and e.classification is not Classification.IRRELEVANT) \
                    or dangerous_start:
                if not strongly_irrelevant_unreachable(d1.st, L1, e.schema, e.tclass,
                                                       domain, t, an):
                    return False
    return True


def _durative_safe(an: Analysis, d: DurativeSchema) -> bool:
    aux = an.aux[d.name]
    if not aux_executable(aux):
        return False
    for L in an.dur_classes[d.name]:
        cs, ce = an.star(d, L)
        if cs in SAFE and ce in SAFE:
            continue
        if cs in SAFE and not aux_reachable(d, L, aux):
            continue
        if simply_safe_type(d, L, an.t, aux) is not None:
            continue
        return False
    return True


def check_invariance(t: Template, domain: CanonicalDomain) -> Verdict:
    an = Analysis(t, domain)
    failures = an.failures()
    if an.unmatched:
        return Verdict(False, None, failures)
    if not failures:
        return Verdict(True, Proof.STRONG_SAFETY)
    natives_safe = all(e.classification in SAFE for e in an.entries if e.parent is None)

    type_a = all(simply_safe_type(d, L, t, an.aux[d.name]) == "a" for d, L in an.dangerous)
    if type_a and all(e.classification in NEUTRAL for e in an.entries
                      if not (an.is_dangerous_fragment(e, "st")
                              or an.is_dangerous_fragment(e, "end"))):
        return Verdict(True, Proof.TYPE_A)

    if natives_safe:
        star_ok = True
        for d, L in an.dangerous:
            cs, ce = an.star(d, L)
            if not (aux_reachable(d, L, an.aux[d.name]) and cs in SAFE and ce in SAFE):
                star_ok = False
                break
        if star_ok and relevant_right_isolated(domain, t, an):
            return Verdict(True, Proof.STAR_SAFETY)

        if all(_durative_safe(an, d) for d in domain.dur_schemas) and \
                relevant_non_intertwining(domain, t, an):
            return Verdict(True, Proof.NON_INTERTWINING)
    return Verdict(False, None, failures)


def check_simple(t: Template, domain: CanonicalDomain) -> Verdict:
    """Accept only if every pure schema is irrelevant or balanced."""
    an = Analysis(t, domain)
    failures = an.failures(NEUTRAL)
    if failures:
        return Verdict(False, None, failures)
    return Verdict(True, Proof.BALANCE)
