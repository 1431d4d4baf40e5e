"""Ground semantics and brute-force invariance checking.

Durations are abstracted away: the search explores every order of start and
end events, which over-approximates the states any timed plan can reach.
"""

from __future__ import annotations

import itertools
import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Iterable, NamedTuple, Optional, Sequence, Union

from .canon import CanonicalDomain, InstantaneousSchema, Literal, is_qvar, is_var, type_relation
from .lifted import Classification
from .pddl import RawProblem
from .templates import GroundAtom, Template, enumerate_instances, instantiate

log = logging.getLogger(__name__)

DEFAULT_MAX_HAPPENINGS = 8
DEFAULT_MAX_SIMULTANEOUS = 2
DEFAULT_STATE_CAP = 2_000_000


@dataclass(frozen=True)
class GroundAction:
    schema: str
    binding: tuple
    pre_plus: frozenset
    pre_minus: frozenset
    eff_plus: frozenset
    eff_minus: frozenset
    role: Optional[str] = None

    @property
    def pre(self) -> frozenset:
        return self.pre_plus | self.pre_minus

    @property
    def eff(self) -> frozenset:
        return self.eff_plus | self.eff_minus

    def applicable(self, state: frozenset) -> bool:
        return self.pre_plus <= state and not (self.pre_minus & state)

    def __str__(self) -> str:
        return f"{self.schema}({','.join(self.binding)})"


@dataclass(frozen=True)
class GroundDurative:
    schema: str
    binding: tuple
    st: GroundAction
    inv: GroundAction
    end: GroundAction

    def __str__(self) -> str:
        return f"{self.schema}({','.join(self.binding)})"


def ground_literal(l: Literal, gr: dict, objects: Sequence[str]) -> set[GroundAtom]:
    qvars = sorted({a for a in l.args if is_qvar(a)})
    out = set()
    for values in itertools.product(objects, repeat=len(qvars)):
        qmap = dict(zip(qvars, values))
        args = tuple(gr[a] if is_var(a) else qmap.get(a, a) for a in l.args)
        out.add(GroundAtom(l.relation, args))
    return out


def ground_action(schema: InstantaneousSchema, gr: dict, objects: Sequence[str],
                  allow_repeats: bool = False, name: Optional[str] = None) -> GroundAction:
    """Instantiate a schema; quantified literals sweep all objects."""
    if set(schema.params) - set(gr):
        raise ValueError(f"grounding of {schema.name} is not total")
    values = [gr[p] for p in schema.params]
    if not allow_repeats and len(set(values)) != len(values):
        raise ValueError(f"grounding of {schema.name} is not injective")

    def g(s):
        out = set()
        for l in s:
            out |= ground_literal(l, gr, objects)
        return frozenset(out)
    return GroundAction(name or schema.name, tuple(values), g(schema.pre_plus),
                        g(schema.pre_minus), g(schema.eff_plus), g(schema.eff_minus),
                        schema.role)


def interferes(a: GroundAction, b: GroundAction) -> bool:
    return bool(a.pre & b.eff or b.pre & a.eff or a.eff_plus & b.eff_minus
                or b.eff_plus & a.eff_minus)


def progress(state: frozenset, actions: Iterable[GroundAction]) -> frozenset:
    """Joint effect of actions: deletions first, then additions."""
    actions = list(actions)
    dels = frozenset().union(*(a.eff_minus for a in actions))
    adds = frozenset().union(*(a.eff_plus for a in actions))
    return (state - dels) | adds


def classify_ground(a: GroundAction, inst: frozenset) -> Classification:
    pp, pm = a.pre_plus & inst, a.pre_minus & inst
    ep, em = a.eff_plus & inst, a.eff_minus & inst
    if len(pp) >= 2:
        return Classification.UNREACHABLE
    if len(ep) >= 2:
        return Classification.HEAVY
    if not ep:
        return Classification.IRRELEVANT
    if len(pp) == 1:
        return Classification.BALANCED if pp <= ep | em else Classification.UNBALANCED
    if pp | pm | ep | em == inst:
        return Classification.BOUNDED
    return Classification.UNBOUNDED


# ---------------------------------------------------------------------------
# grounded task


@dataclass
class Task:
    domain: CanonicalDomain
    objects: tuple
    init: frozenset
    instantaneous: list = field(default_factory=list)
    durative: list = field(default_factory=list)
    allow_self_overlap: bool = False

    def modifiable_atoms(self) -> list[GroundAtom]:
        """Type-consistent ground atoms over relations that some effect changes."""
        out = []
        for r in self.domain.modifiable_relations:
            cands = [self.objects_of(t) for t in self.domain.predicate_types[r]]
            out.extend(GroundAtom(r, args) for args in itertools.product(*cands))
        return sorted(out)

    def objects_of(self, t: str) -> list[str]:
        if t == "object":
            return list(self.objects)
        rel = type_relation(t)
        return [o for o in self.objects if GroundAtom(rel, (o,)) in self.init]


def build_task(domain: CanonicalDomain, problem: RawProblem, allow_repeats: bool = False,
               allow_self_overlap: bool = False, ground: bool = True) -> Task:
    """Ground ``problem``; with ``ground=False`` only objects and Init are set up."""
    typed = list(problem.objects) + [c for c in domain.constants
                                     if c[0] not in {o for o, _ in problem.objects}]
    objects = tuple(sorted(o for o, _ in typed))
    init = {GroundAtom(a.relation, tuple(a.args)) for a in problem.init}
    for o, t in typed:
        if t != "object" and t not in domain.types:
            raise ValueError(f"object {o} has undeclared type {t}")
        for s in domain.supertypes(t):
            init.add(GroundAtom(type_relation(s), (o,)))
    task = Task(domain, objects, frozenset(init), allow_self_overlap=allow_self_overlap)
    if not ground:
        return task
    static = domain.static_relations

    def bindings(params, ptypes):
        cands = [task.objects_of(t) if t else list(objects)
                 for t in (ptypes or ("object",) * len(params))]
        for values in itertools.product(*cands):
            if not allow_repeats and len(set(values)) != len(values):
                continue
            yield dict(zip(params, values))

    def statically_ok(a: GroundAction) -> bool:
        sp = {x for x in a.pre_plus if x.relation in static}
        sm = {x for x in a.pre_minus if x.relation in static}
        return sp <= task.init and not (sm & task.init)

    for s in domain.inst_schemas:
        for gr in bindings(s.params, s.param_types):
            a = ground_action(s, gr, objects, allow_repeats)
            if statically_ok(a):
                task.instantaneous.append(a)
    for d in domain.dur_schemas:
        for gr in bindings(d.params, d.param_types):
            frags = [ground_action(f, gr, objects, allow_repeats, d.name) for f in d.fragments]
            if all(statically_ok(f) for f in frags):
                task.durative.append(GroundDurative(d.name, frags[0].binding, *frags))
    return task


# ---------------------------------------------------------------------------
# happenings


class TimedState(NamedTuple):
    logical: frozenset
    open: tuple  # sorted indices into Task.durative, repeated for concurrent copies


@dataclass(frozen=True)
class Inapplicable:
    reason: str  # precondition, interference or inv-violated
    detail: str = ""


Event = tuple  # ("do" | "start" | "end", index)


def event_action(task: Task, ev: Event) -> GroundAction:
    kind, i = ev
    if kind == "do":
        return task.instantaneous[i]
    return getattr(task.durative[i], "st" if kind == "start" else "end")


def format_event(task: Task, ev: Event) -> str:
    kind, i = ev
    if kind == "do":
        return f"do {task.instantaneous[i]}"
    return f"{kind} {task.durative[i]}"


def apply_happening(task: Task, s: TimedState, events: Iterable[Event]
                    ) -> Union[TimedState, Inapplicable]:
    events = sorted(set(events))
    if not events:
        raise ValueError("a happening needs at least one event")
    open_count = Counter(s.open)
    ending = Counter(i for k, i in events if k == "end")
    starting = [i for k, i in events if k == "start"]
    for i, n in ending.items():
        if open_count[i] < n:
            return Inapplicable("precondition", f"{task.durative[i]} is not running")
    if not task.allow_self_overlap:
        if any(open_count[i] for i in starting) or len(set(starting)) != len(starting):
            return Inapplicable("precondition", "self-overlapping durative action")
    acts = [event_action(task, ev) for ev in events]
    for ev, a in zip(events, acts):
        if not a.applicable(s.logical):
            return Inapplicable("precondition", format_event(task, ev))
    for (e1, a1), (e2, a2) in itertools.combinations(zip(events, acts), 2):
        if interferes(a1, a2):
            return Inapplicable("interference",
                                f"{format_event(task, e1)} / {format_event(task, e2)}")
    across = open_count - ending
    for i in sorted(across):
        inv = task.durative[i].inv
        if not inv.applicable(s.logical):
            return Inapplicable("inv-violated", f"{task.durative[i]}")
        for ev, a in zip(events, acts):
            if interferes(inv, a):
                return Inapplicable("interference",
                                    f"{format_event(task, ev)} / invariant of {task.durative[i]}")
    logical = progress(s.logical, acts)
    new_open = across + Counter(starting)
    for i in sorted(new_open):
        if not task.durative[i].inv.applicable(logical):
            return Inapplicable("inv-violated", f"{task.durative[i]}")
    return TimedState(logical, tuple(sorted(new_open.elements())))


def candidate_events(task: Task, s: TimedState) -> list[Event]:
    out: list[Event] = []
    for i, a in enumerate(task.instantaneous):
        if a.applicable(s.logical):
            out.append(("do", i))
    running = set(s.open)
    for i, d in enumerate(task.durative):
        if (task.allow_self_overlap or i not in running) and d.st.applicable(s.logical):
            out.append(("start", i))
    for i in sorted(running):
        if task.durative[i].end.applicable(s.logical):
            out.append(("end", i))
    return out


def successors(task: Task, s: TimedState, max_simultaneous: int):
    cands = candidate_events(task, s)
    acts = [event_action(task, ev) for ev in cands]
    for size in range(1, max_simultaneous + 1):
        for combo in itertools.combinations(range(len(cands)), size):
            if size > 1 and any(interferes(acts[x], acts[y])
                                for x, y in itertools.combinations(combo, 2)):
                continue
            h = tuple(cands[x] for x in combo)
            nxt = apply_happening(task, s, h)
            if isinstance(nxt, TimedState):
                yield h, nxt


@dataclass
class SearchResult:
    initial: TimedState
    parents: dict  # state -> (previous state, happening) or None
    depth: int
    exceeded: bool = False
    hit: Optional[TimedState] = None

    @property
    def states(self):
        return self.parents.keys()

    def trace(self, state: TimedState) -> list:
        out = []
        while self.parents[state] is not None:
            prev, h = self.parents[state]
            out.append(h)
            state = prev
        return out[::-1]


def reachable_search(task: Task, max_happenings: int = DEFAULT_MAX_HAPPENINGS,
                     max_simultaneous: int = DEFAULT_MAX_SIMULTANEOUS,
                     state_cap: int = DEFAULT_STATE_CAP,
                     stop: Optional[Callable[[TimedState], bool]] = None) -> SearchResult:
    init = TimedState(task.init, ())
    res = SearchResult(init, {init: None}, 0)
    if stop and stop(init):
        res.hit = init
        return res
    frontier = [init]
    for depth in range(1, max_happenings + 1):
        nxt = []
        for s in frontier:
            for h, s2 in successors(task, s, max_simultaneous):
                if s2 in res.parents:
                    continue
                res.parents[s2] = (s, h)
                if stop and stop(s2):
                    res.hit = s2
                    res.depth = depth
                    return res
                if len(res.parents) >= state_cap:
                    res.exceeded = True
                    res.depth = depth
                    return res
                nxt.append(s2)
        res.depth = depth
        frontier = nxt
        if not frontier:
            break
    return res


# ---------------------------------------------------------------------------
# template verification


class InitViolation(Exception):
    def __init__(self, template: Template, instance: tuple, atoms):
        super().__init__(f"initial state has weight {len(atoms)} for {template.key} "
                         f"at ({', '.join(instance)}): {', '.join(map(str, sorted(atoms)))}")
        self.template = template
        self.instance = instance
        self.atoms = atoms


@dataclass(frozen=True)
class Holds:
    depth: int
    states: int

    def __str__(self) -> str:
        return f"Holds (depth {self.depth})"


@dataclass(frozen=True)
class Violated:
    trace: tuple  # happenings, each a tuple of event strings
    instance: tuple
    atoms: tuple

    def __str__(self) -> str:
        lines = [f"Violated at ({', '.join(self.instance)}): "
                 f"{', '.join(str(a) for a in self.atoms)} (executable-reachable)"]
        lines += ["; ".join(h) for h in self.trace]
        return "\n".join(lines)


@dataclass(frozen=True)
class Inconclusive:
    bound: str

    def __str__(self) -> str:
        return f"Inconclusive ({self.bound})"


def verify_template(t: Template, task: Task, max_happenings: int = DEFAULT_MAX_HAPPENINGS,
                    max_simultaneous: int = DEFAULT_MAX_SIMULTANEOUS,
                    state_cap: int = DEFAULT_STATE_CAP):
    instances = [(g, instantiate(t, g, task.objects))
                 for g in enumerate_instances(t, task.objects)]
    for g, atoms in instances:
        hit = atoms & task.init
        if len(hit) >= 2:
            raise InitViolation(t, g, hit)
    found: dict = {}

    def stop(s: TimedState) -> bool:
        for g, atoms in instances:
            hit = atoms & s.logical
            if len(hit) >= 2:
                found["v"] = (g, tuple(sorted(hit)))
                return True
        return False

    res = reachable_search(task, max_happenings, max_simultaneous, state_cap, stop)
    if res.hit is not None:
        g, atoms = found["v"]
        trace = tuple(tuple(format_event(task, ev) for ev in h) for h in res.trace(res.hit))
        return Violated(trace, g, atoms)
    if res.exceeded:
        return Inconclusive(f"state cap {state_cap} reached at depth {res.depth}")
    return Holds(max_happenings, len(res.parents))
