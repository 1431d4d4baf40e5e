"""Templates: components, admissible partitions, instances and weights."""

from __future__ import annotations

import enum
import itertools
import re
from dataclasses import dataclass
from typing import Iterable, Iterator, NamedTuple, Sequence


class SymWeight(enum.IntEnum):
    """Saturating weight: 0, 1 or "many" (two or more, including omega)."""

    ZERO = 0
    ONE = 1
    MANY = 2

    def __add__(self, other):  # type: ignore[override]
        return SymWeight(min(int(self) + int(other), 2))

    __radd__ = __add__

    @classmethod
    def of_count(cls, n: int) -> "SymWeight":
        return cls(min(n, 2))

    def le1(self) -> bool:
        return self <= SymWeight.ONE

    def eq0(self) -> bool:
        return self == SymWeight.ZERO

    def eq1(self) -> bool:
        return self == SymWeight.ONE

    def ge2(self) -> bool:
        return self == SymWeight.MANY


class GroundAtom(NamedTuple):
    relation: str
    args: tuple

    def __str__(self) -> str:
        return f"{self.relation}({','.join(self.args)})"


@dataclass(frozen=True, order=True)
class Component:
    relation: str
    arity: int
    counted: int  # == arity when there is no counted argument

    def __post_init__(self):
        if not 0 <= self.counted <= self.arity:
            raise ValueError(f"counted position {self.counted} out of range for {self.relation}")

    @property
    def has_counted(self) -> bool:
        return self.counted < self.arity

    @property
    def fixed(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.arity) if i != self.counted)


class InadmissiblePartition(ValueError):
    pass


@dataclass(frozen=True)
class Template:
    """Components plus a partition of their fixed positions.

    ``layout[i][j]`` is the fixed position of ``components[i]`` that lies in
    block ``j``. Admissibility (one position per component per block) is
    built into this representation; :meth:`make` validates and normalizes.
    """

    components: tuple[Component, ...]
    layout: tuple[tuple[int, ...], ...]

    @classmethod
    def make(cls, parts: Iterable[tuple[Component, Sequence[int]]]) -> "Template":
        parts = [(c, tuple(order)) for c, order in parts]
        if not parts:
            raise InadmissiblePartition("a template needs at least one component")
        k = len(parts[0][1])
        rels = set()
        for c, order in parts:
            if sorted(order) != list(c.fixed) or len(order) != k:
                raise InadmissiblePartition(
                    f"component {c.relation} does not contribute one position per block")
            if c.relation in rels:
                raise InadmissiblePartition(f"relation {c.relation} used twice")
            rels.add(c.relation)
        parts.sort(key=lambda p: (p[0].relation, p[0].arity, p[0].counted))
        # order blocks by the first component's positions
        perm = sorted(range(k), key=lambda j: parts[0][1][j])
        comps = tuple(c for c, _ in parts)
        layout = tuple(tuple(order[j] for j in perm) for _, order in parts)
        return cls(comps, layout)

    @classmethod
    def single(cls, relation: str, arity: int, counted: int) -> "Template":
        c = Component(relation, arity, counted)
        return cls.make([(c, c.fixed)])

    @property
    def k(self) -> int:
        return len(self.layout[0])

    @property
    def relations(self) -> frozenset:
        return frozenset(c.relation for c in self.components)

    def component_index(self, relation: str) -> int:
        for i, c in enumerate(self.components):
            if c.relation == relation:
                return i
        raise KeyError(relation)

    def extend(self, comp: Component, order: Sequence[int]) -> "Template":
        return Template.make(list(zip(self.components, self.layout)) + [(comp, order)])

    @property
    def trivial(self) -> bool:
        """A single component without a counted argument: always a singleton set."""
        return len(self.components) == 1 and not self.components[0].has_counted

    @property
    def key(self) -> str:
        return template_key(self)

    def __str__(self) -> str:
        return template_key(self)


def template_key(t: Template) -> str:
    parts = []
    for c, order in zip(t.components, t.layout):
        bits = [c.relation] + [str(p) for p in order]
        if c.has_counted:
            bits.append(f"[{c.counted}]")
        parts.append(" ".join(bits))
    return "{" + ", ".join(parts) + "}"


_COMP_RE = re.compile(r"^\s*([^\s\[\]{},]+)((?:\s+\d+)*)(?:\s+\[(\d+)\])?\s*$")


def parse_template_key(text: str, arities: dict) -> Template:
    """Inverse of :func:`template_key`; needs relation arities."""
    body = text.strip()
    if not (body.startswith("{") and body.endswith("}")):
        raise ValueError(f"template must be written as {{...}}: {text!r}")
    parts = []
    for chunk in body[1:-1].split(","):
        m = _COMP_RE.match(chunk)
        if not m:
            raise ValueError(f"malformed component {chunk.strip()!r}")
        rel = m.group(1).lower()
        if rel not in arities:
            raise ValueError(f"unknown relation {rel!r}")
        arity = arities[rel]
        order = [int(x) for x in m.group(2).split()]
        counted = int(m.group(3)) if m.group(3) is not None else arity
        parts.append((Component(rel, arity, counted), order))
    try:
        return Template.make(parts)
    except InadmissiblePartition as e:
        raise ValueError(str(e)) from None


# instances ------------------------------------------------------------------

TemplateInstance = tuple  # gamma: block j -> object


def enumerate_instances(t: Template, objects: Sequence[str]) -> Iterator[TemplateInstance]:
    return itertools.permutations(objects, t.k)


def instantiate(t: Template, gamma: TemplateInstance, objects: Sequence[str]) -> frozenset:
    atoms = set()
    for c, order in zip(t.components, t.layout):
        args: list = [None] * c.arity
        for j, pos in enumerate(order):
            args[pos] = gamma[j]
        if c.has_counted:
            for o in objects:
                args[c.counted] = o
                atoms.add(GroundAtom(c.relation, tuple(args)))
        else:
            atoms.add(GroundAtom(c.relation, tuple(args)))
    return frozenset(atoms)


def instance_weight(state, inst) -> int:
    return len(inst & state) if isinstance(inst, frozenset) else len(set(inst) & set(state))
