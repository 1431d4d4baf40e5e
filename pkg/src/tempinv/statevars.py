"""Multi-valued state variables from invariant instantiations."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from .canon import CanonicalDomain
from .oracle import Task, build_task
from .pddl import RawProblem
from .templates import GroundAtom, Template, enumerate_instances, instantiate

log = logging.getLogger(__name__)

MODES = ("bis", "sis", "tis")
NULL = "<none>"


@dataclass(frozen=True)
class StateVariable:
    id: int
    values: tuple  # GroundAtoms; the null value is implicit and always present
    template: Optional[str] = None  # template key, None for a binary variable
    instance: tuple = ()

    @property
    def binary(self) -> bool:
        return self.template is None

    @property
    def domain_size(self) -> int:
        return len(self.values) + 1

    def as_dict(self) -> dict:
        source = ({"binary": str(self.values[0])} if self.binary
                  else {"template": self.template, "instance": list(self.instance)})
        return {"id": self.id, "values": [str(v) for v in self.values] + [NULL],
                "source": source}

    def __str__(self) -> str:
        return f"var{self.id}: " + " | ".join([str(v) for v in self.values] + [NULL])


@dataclass(frozen=True)
class EncodingStats:
    variable_count: int
    mean_domain_size: Fraction
    multi_valued: int = 0
    dropped_instances: int = 0

    def as_dict(self) -> dict:
        m = self.mean_domain_size
        return {"variable_count": self.variable_count,
                "mean_domain_size": str(m), "mean_domain_size_float": float(m),
                "multi_valued": self.multi_valued,
                "dropped_instances": self.dropped_instances}


def build_state_variables(invariants: Sequence[Template], domain: CanonicalDomain,
                          problem: RawProblem, mode: str = "tis",
                          task: Optional[Task] = None):
    """Greedy cover of the modifiable ground atoms by invariant instantiations.

    Returns ``(variables, stats)``. Invariants are ignored in ``bis`` mode.
    """
    if mode not in MODES:
        raise ValueError(f"unknown encoding mode {mode!r}")
    task = task or build_task(domain, problem, ground=False)
    pool = set(task.modifiable_atoms())
    candidates = []
    dropped = 0
    if mode != "bis":
        for t in sorted(invariants, key=lambda t: t.key):
            for g in enumerate_instances(t, task.objects):
                atoms = instantiate(t, g, task.objects) & pool
                if len(atoms) < 2:
                    continue
                init_hits = atoms & task.init
                if len(init_hits) >= 2:
                    log.warning("dropping %s at (%s): initial state holds %s", t.key,
                                ", ".join(g), ", ".join(map(str, sorted(init_hits))))
                    dropped += 1
                    continue
                candidates.append((t.key, g, atoms))
    chosen = []
    remaining = set(pool)
    while True:
        best = None
        for key, g, atoms in candidates:
            size = len(atoms & remaining)
            if size >= 2 and (best is None or size > best[0]):
                best = (size, key, g, atoms)
        if best is None:
            break
        _, key, g, atoms = best
        chosen.append((key, g, tuple(sorted(atoms & remaining))))
        remaining -= atoms
    chosen.sort(key=lambda c: (c[0], c[1]))
    variables = [StateVariable(i, vals, key, g) for i, (key, g, vals) in enumerate(chosen)]
    for atom in sorted(remaining):
        variables.append(StateVariable(len(variables), (atom,)))
    return variables, _stats(variables, dropped)


def _stats(variables, dropped: int) -> EncodingStats:
    n = len(variables)
    mean = Fraction(sum(v.domain_size for v in variables), n) if n else Fraction(0)
    return EncodingStats(n, mean, sum(not v.binary for v in variables), dropped)


def emit(variables: Sequence[StateVariable], stats: Optional[EncodingStats] = None,
         fmt: str = "text") -> str:
    stats = stats or _stats(variables, 0)
    if fmt == "json":
        doc = {"tempinv-format": 1, "stats": stats.as_dict(),
               "variables": [v.as_dict() for v in variables]}
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if fmt != "text":
        raise ValueError(f"unknown format {fmt!r}")
    lines = ["tempinv-format 1",
             f"# variables {stats.variable_count} mean-domain-size {stats.mean_domain_size}"]
    lines += [str(v) for v in variables]
    return "\n".join(lines) + "\n"


def atom_of(text: str) -> GroundAtom:
    """Parse ``p(a,b)`` back into a ground atom."""
    rel, _, rest = text.partition("(")
    args = tuple(a for a in rest.rstrip(")").split(",") if a)
    return GroundAtom(rel, args)
