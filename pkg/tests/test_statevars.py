import json
import logging
from fractions import Fraction

import pytest

from tempinv.oracle import reachable_search
from tempinv.pddl import parse_domain, parse_problem
from tempinv.statevars import StateVariable, build_state_variables, emit
from tempinv.synthesis import synthesize
from tempinv.templates import GroundAtom, parse_template_key

from conftest import load, load_task, read_fixture

MINIS = [("floortile.pddl", "floortile_mini.pddl"), ("depot.pddl", "depot_mini.pddl")]


def independent_atom_count(domain_file, problem_file):
    """Count typed ground atoms of relations that some effect mentions, from the raw text."""
    raw = parse_domain(read_fixture(domain_file))
    prob = parse_problem(read_fixture(problem_file), raw)
    parents = dict(raw.types)

    def is_a(t, want):
        while True:
            if t == want:
                return True
            if t == "object" or t not in parents:
                return want == "object"
            t = parents[t]

    def mentioned(f, out):
        if f is None:
            return
        if hasattr(f, "relation"):
            out.add(f.relation)
        for name in ("body", "effect"):
            if hasattr(f, name):
                mentioned(getattr(f, name), out)
        for part in getattr(f, "parts", ()):
            mentioned(part, out)

    changed = set()
    for a in raw.actions:
        mentioned(a.effect, changed)
    total = 0
    for name, params in raw.predicates:
        if name not in changed:
            continue
        per_arg = [sum(1 for _, t in prob.objects if is_a(t, want)) for _, want in params]
        n = 1
        for k in per_arg:
            n *= k
        total += n
    return total


@pytest.mark.parametrize("domain_file, problem_file", MINIS)
def test_bis_counts(domain_file, problem_file):
    dom, prob, _ = load_task(domain_file, problem_file)
    variables, stats = build_state_variables([], dom, prob, "bis")
    assert stats.variable_count == independent_atom_count(domain_file, problem_file)
    assert stats.mean_domain_size == Fraction(2)
    assert all(v.binary for v in variables)


@pytest.mark.parametrize("domain_file, problem_file", MINIS)
@pytest.mark.parametrize("mode", ["sis", "tis"])
def test_partition_and_mutex(domain_file, problem_file, mode):
    dom, prob, task = load_task(domain_file, problem_file)
    invariants = [a.template for a in synthesize(dom, mode).accepted]
    variables, stats = build_state_variables(invariants, dom, prob, mode)
    atoms = [a for v in variables for a in v.values]
    assert len(atoms) == len(set(atoms))
    assert set(atoms) == set(task.modifiable_atoms())
    assert not {a.relation for a in atoms} & dom.static_relations
    assert stats.mean_domain_size == Fraction(sum(v.domain_size for v in variables),
                                              len(variables))
    multi = [set(v.values) for v in variables if not v.binary]
    for s in reachable_search(task).states:
        for vals in multi:
            assert len(vals & s.logical) <= 1


def test_floortile_mini_tis():
    dom, prob, _ = load_task("floortile.pddl", "floortile_mini.pddl")
    inv = [a.template for a in synthesize(dom, "tis").accepted]
    variables, stats = build_state_variables(inv, dom, prob, "tis")
    assert stats.variable_count == 4
    assert stats.mean_domain_size == Fraction(7, 2)
    assert str(variables[1]) == \
        "var1: clear(tile2) | painted(tile2,black) | robot-at(rbt1,tile2) | <none>"


def test_two_robot_tile_variable():
    dom, prob, _ = load_task("floortile.pddl", "floortile_two_robots.pddl")
    inv = [a.template for a in synthesize(dom, "tis").accepted]
    variables, _ = build_state_variables(inv, dom, prob, "tis")
    tile1 = [v for v in variables if v.instance == ("tile1",)]
    (v,) = tile1
    assert set(v.values) == {GroundAtom("robot-at", ("rbt1", "tile1")),
                             GroundAtom("robot-at", ("rbt2", "tile1")),
                             GroundAtom("painted", ("tile1", "black")),
                             GroundAtom("clear", ("tile1",))}
    assert v.template == "{clear 0, painted 0 [1], robot-at 1 [0]}"
    record = v.as_dict()
    assert len(record["values"]) == 5 and record["values"][-1] == "<none>"


def test_init_violation_drops_instance(caplog):
    raw, dom = load("floortile.pddl")
    text = read_fixture("floortile_mini.pddl").replace("(clear tile2)",
                                                        "(clear tile2) (clear tile1)")
    prob = parse_problem(text, raw)
    t = parse_template_key("{clear 0, robot-at 1 [0]}", dom.relations)
    with caplog.at_level(logging.WARNING):
        variables, stats = build_state_variables([t], dom, prob, "tis")
    assert stats.dropped_instances == 1
    assert "(tile1)" in caplog.text
    assert all(v.instance != ("tile1",) for v in variables)


def test_emit_binary_and_empty():
    v = StateVariable(0, (GroundAtom("p", ("a",)),))
    assert emit([v]).splitlines()[-1] == "var0: p(a) | <none>"
    empty = emit([])
    assert empty.splitlines()[0] == "tempinv-format 1"
    assert "variables 0" in empty
    doc = json.loads(emit([], fmt="json"))
    assert doc["variables"] == [] and doc["tempinv-format"] == 1


def test_emit_is_deterministic():
    dom, prob, _ = load_task("depot.pddl", "depot_mini.pddl")
    inv = [a.template for a in synthesize(dom, "tis").accepted]
    outs = {emit(*build_state_variables(inv, dom, prob, "tis"), fmt=f)
            for f in ("json",) for _ in range(3)}
    assert len(outs) == 1


def test_unknown_mode():
    dom, prob, _ = load_task("floortile.pddl", "floortile_mini.pddl")
    with pytest.raises(ValueError):
        build_state_variables([], dom, prob, "xyz")
