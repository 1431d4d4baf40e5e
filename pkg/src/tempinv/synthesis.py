"""Guess, check and repair loop over templates."""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

from .canon import CanonicalDomain, InstantaneousSchema, Literal, is_var
from .lifted import (Classification, Failure, Verdict, check_invariance, check_simple,
                     make_aux, match_component)
from .templates import Component, Template

log = logging.getLogger(__name__)

DEFAULT_REPAIR_CAP = 4


def initial_templates(domain: CanonicalDomain) -> list[Template]:
    out = []
    for r in domain.modifiable_relations:
        a = domain.relations[r]
        out.extend(Template.single(r, a, p) for p in range(a + 1))
    return out


def _candidate_literals(failure: Failure, domain: CanonicalDomain, mode: str) -> list[Literal]:
    e = failure.entry
    alpha: InstantaneousSchema = e.schema
    found = set(alpha.pre_plus & alpha.eff_minus)
    if mode == "tis" and alpha.role == "end" and e.parent is not None:
        aux = make_aux(e.parent)
        found |= aux.st_star.pre_plus & aux.st_star.eff_minus
        found |= aux.st_star.pre_plus & aux.end_star.eff_minus
    return sorted(found)


def repair(t: Template, failure: Failure, domain: CanonicalDomain, mode: str = "tis",
           exhaustive: bool = False) -> list[Template]:
    """Templates extending ``t`` by one component that may fix ``failure``.

    ``failure`` must be a relevant unbounded pure schema.
    """
    e = failure.entry
    if e is None or e.classification is not Classification.UNBOUNDED:
        return []
    (l,) = tuple(e.pure.eff_plus)
    ci = match_component(l, t)
    k = t.k
    fixed_args = [l.args[p] for p in t.layout[ci]]
    if not all(is_var(a) for a in fixed_args) or len(set(fixed_args)) != k:
        return []
    out: list[Template] = []
    seen: set[str] = set()
    for lp in _candidate_literals(failure, domain, mode):
        if lp.relation in t.relations or lp.arity not in (k, k + 1):
            continue
        for comp, order in _placements(lp, fixed_args, exhaustive):
            new = t.extend(comp, order)
            if new.key not in seen:
                seen.add(new.key)
                out.append(new)
    return out


def _placements(lp: Literal, fixed_args: list[str], exhaustive: bool):
    """Ways to read ``lp`` as a component whose block j holds ``fixed_args[j]``."""
    a = lp.arity
    k = len(fixed_args)
    found = []
    for counted in range(a + 1):
        positions = [i for i in range(a) if i != counted]
        if len(positions) != k:
            continue
        if lp.quantified and lp.quantified != {counted}:
            continue
        choices = [[i for i in positions if lp.args[i] == arg] for arg in fixed_args]
        for order in _injective_choices(choices):
            found.append((Component(lp.relation, a, counted), order))
            if not exhaustive:
                return found
    return found


def _injective_choices(choices: list[list[int]]):
    def rec(j, used, acc):
        if j == len(choices):
            yield tuple(acc)
            return
        for i in choices[j]:
            if i not in used:
                yield from rec(j + 1, used | {i}, acc + [i])
    yield from rec(0, frozenset(), [])


@dataclass
class Accepted:
    template: Template
    proof: str
    via_fix: bool

    def as_dict(self) -> dict:
        return {"template": self.template.key, "proof": self.proof, "via_fix": self.via_fix}


@dataclass
class Rejected:
    template: Template
    failures: tuple
    via_fix: bool

    def as_dict(self) -> dict:
        return {"template": self.template.key, "via_fix": self.via_fix,
                "failures": [f.as_dict() for f in self.failures]}


@dataclass
class SynthesisReport:
    mode: str
    accepted: list[Accepted] = field(default_factory=list)
    trivial: list[Accepted] = field(default_factory=list)
    rejected: list[Rejected] = field(default_factory=list)
    pruned_by_cap: list[str] = field(default_factory=list)
    timing: dict = field(default_factory=dict)

    @property
    def stats(self) -> dict:
        return {"inv": len(self.accepted),
                "fix": sum(1 for a in self.accepted if a.via_fix),
                "trivial": len(self.trivial),
                "rejected": len(self.rejected),
                "pruned_by_cap": len(self.pruned_by_cap)}

    def keys(self) -> list[str]:
        return [a.template.key for a in self.accepted]

    def find(self, key: str) -> Optional[Accepted]:
        for a in self.accepted + self.trivial:
            if a.template.key == key:
                return a
        return None

    def as_dict(self, timing: bool = False) -> dict:
        out = {"tempinv-format": 1, "mode": self.mode, "stats": self.stats,
               "accepted": [a.as_dict() for a in self.accepted],
               "trivial": [a.as_dict() for a in self.trivial],
               "rejected": [r.as_dict() for r in self.rejected],
               "pruned_by_cap": self.pruned_by_cap}
        if timing:
            out["timing"] = self.timing
        return out


def _blocks_repair(failures) -> bool:
    return any(f.classification in (Classification.HEAVY.value, Classification.UNBALANCED.value)
               for f in failures)


def synthesize(domain: CanonicalDomain, mode: str = "tis", repair_cap: int = DEFAULT_REPAIR_CAP,
               exhaustive: bool = False, jobs: int = 1) -> SynthesisReport:
    if mode not in ("tis", "sis"):
        raise ValueError(f"unknown synthesis mode {mode!r}")
    check = check_invariance if mode == "tis" else check_simple
    report = SynthesisReport(mode)
    started = time.perf_counter()
    wave = [(t, False) for t in initial_templates(domain)]
    seen = {t.key for t, _ in wave}
    checking = 0.0
    pool = ThreadPoolExecutor(max_workers=jobs) if jobs > 1 else None
    try:
        while wave:
            t0 = time.perf_counter()
            if pool is not None:
                verdicts = list(pool.map(lambda item: check(item[0], domain), wave))
            else:
                verdicts = [check(t, domain) for t, _ in wave]
            checking += time.perf_counter() - t0
            nxt = []
            for (t, via_fix), v in zip(wave, verdicts):
                if v.invariant:
                    acc = Accepted(t, str(v.proof), via_fix)
                    (report.trivial if t.trivial else report.accepted).append(acc)
                    log.info("accepted %s (%s)", t.key, v.proof)
                    continue
                report.rejected.append(Rejected(t, v.failures, via_fix))
                log.info("rejected %s", t.key)
                if _blocks_repair(v.failures):
                    continue
                tried = set()
                for f in v.failures:
                    if f.entry is None or f.entry.classification is not Classification.UNBOUNDED:
                        continue
                    ident = (f.schema, f.tclass)
                    if ident in tried:
                        continue
                    tried.add(ident)
                    for new in repair(t, f, domain, mode, exhaustive):
                        if new.key in seen:
                            continue
                        seen.add(new.key)
                        if len(new.components) > repair_cap:
                            report.pruned_by_cap.append(new.key)
                            continue
                        nxt.append((new, True))
            wave = nxt
    finally:
        if pool is not None:
            pool.shutdown()
    report.timing = {"check": checking, "total": time.perf_counter() - started}
    return report


def check(t: Template, domain: CanonicalDomain, mode: str = "tis") -> Verdict:
    return check_invariance(t, domain) if mode == "tis" else check_simple(t, domain)
