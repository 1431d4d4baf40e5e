import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tempinv.canon import Literal
from tempinv.lifted import (Analysis, Classification, class_key, class_matching,
                            classify_pure, intersects, m_mutex, match_component, member, minus,
                            pure, relevant_right_isolated, simply_safe_type, strongly_safe,
                            subset, t_classes, weight)
from tempinv.synthesis import initial_templates, synthesize
from tempinv.templates import SymWeight, parse_template_key

T_FT = "{clear 0, painted 0 [1], robot-at 1 [0]}"
T_DP = "{available 0, lifting 0 [1]}"

C = Classification


def tpl(domain, key):
    return parse_template_key(key, domain.relations)


def strs(lits):
    return sorted(str(l) for l in lits)


def class_strs(schema, t):
    return sorted(str(L) for L in t_classes(schema, t))


# set semantics ------------------------------------------------------------------

P_X = Literal("p", ("?x", "?y"))
P_ALL = Literal("p", ("?x", "*0"))
P_Z = Literal("p", ("?z", "?y"))


def test_membership_uses_coverage():
    assert member(P_X, {P_ALL})
    assert not member(P_ALL, {P_X})
    assert subset({P_X}, frozenset({P_ALL}))
    assert not subset({P_Z}, frozenset({P_ALL}))


def test_intersection_uses_overlap():
    assert intersects({P_ALL}, {P_X})
    assert intersects({P_X}, {P_ALL})
    assert not intersects({P_Z}, {P_X})


def test_difference_removes_covered():
    assert minus(frozenset({P_X, P_Z}), frozenset({P_ALL})) == {P_Z}
    assert minus(frozenset({P_ALL}), frozenset({P_X})) == {P_ALL}


def test_weight():
    assert weight(set()) is SymWeight.ZERO
    assert weight({P_X}) is SymWeight.ONE
    assert weight({P_X, P_Z}) is SymWeight.MANY
    assert weight({P_ALL}) is SymWeight.MANY


# classes and pure schemas ---------------------------------------------------------

def test_paint_up_start_classes(floortile):
    t = tpl(floortile, T_FT)
    st_ = floortile.schema("paint-up").st
    assert class_strs(st_, t) == ["{clear(y)}", "{robot-at(r,x)}"]
    pures = {str(L): pure(st_, L) for L in t_classes(st_, t)}
    assert strs(pures["{robot-at(r,x)}"].pre_plus) == ["robot-at(r,x)"]
    assert strs(pures["{clear(y)}"].pre_plus) == ["clear(y)"]
    assert strs(pures["{clear(y)}"].eff_minus) == ["clear(y)"]
    assert all(classify_pure(p, t) is C.IRRELEVANT for p in pures.values())
    assert strongly_safe(st_, t)


def test_paint_up_end_is_relevant_unbounded(floortile):
    t = tpl(floortile, T_FT)
    end = floortile.schema("paint-up").end
    (L,) = t_classes(end, t)
    assert classify_pure(pure(end, L), t) is C.UNBOUNDED
    assert not strongly_safe(end, t)


def test_floortile_durative_classes(floortile):
    t = tpl(floortile, T_FT)
    for name in ("paint-up", "paint-down"):
        assert class_strs(floortile.schema(name), t) == \
            ["{clear(y), painted(y,c)}", "{robot-at(r,x)}"]
    for name in ("up", "down", "right", "left"):
        assert class_strs(floortile.schema(name), t) == \
            ["{clear(x), robot-at(r,x)}", "{clear(y), robot-at(r,y)}"]
    assert t_classes(floortile.schema("change-color"), t) == []


def test_floortile_type_a(floortile):
    t = tpl(floortile, T_FT)
    an = Analysis(t, floortile)
    assert an.dangerous
    for d, L in an.dangerous:
        assert simply_safe_type(d, L, t) == "a", (d.name, str(L))
    names = {d.name for d, _ in an.dangerous}
    assert names == {"paint-up", "paint-down", "up", "down", "right", "left"}


def test_depot_trace(depot):
    t = tpl(depot, T_DP)
    an = Analysis(t, depot)
    assert t_classes(depot.schema("drive"), t) == []
    for name in ("lift", "drop", "load", "unload"):
        assert class_strs(depot.schema(name), t) == ["{available(x), lifting(x,y)}"]
    unbounded = sorted(e.schema.name for e in an.entries if e.classification is C.UNBOUNDED)
    assert unbounded == ["drop-end", "load-end"]
    for d, L in an.dangerous:
        assert an.star(d, L)[1] is C.BALANCED
    assert relevant_right_isolated(depot, t, an)


def test_robot_at_position_template(floortile):
    t = tpl(floortile, "{robot-at 1 [0]}")
    up_end = floortile.schema("up").end
    (L,) = t_classes(up_end, t)
    assert str(L) == "{robot-at(r,y)}"
    assert classify_pure(pure(up_end, L), t) is C.UNBOUNDED


def test_classification_cases():
    t = parse_template_key("{p 0 [1]}", {"p": 2})
    from tempinv.canon import InstantaneousSchema as S
    a, b = Literal("p", ("?x", "?y")), Literal("p", ("?x", "?z"))
    q = Literal("p", ("?x", "*0"))
    assert classify_pure(S("u", (), pre_plus=frozenset({a, b})), t) is C.UNREACHABLE
    assert classify_pure(S("h", (), eff_plus=frozenset({a, b})), t) is C.HEAVY
    assert classify_pure(S("i", (), pre_plus=frozenset({a})), t) is C.IRRELEVANT
    assert classify_pure(S("b", (), pre_plus=frozenset({a}), eff_plus=frozenset({b}),
                           eff_minus=frozenset({a})), t) is C.BALANCED
    assert classify_pure(S("n", (), pre_plus=frozenset({a}), eff_plus=frozenset({b})),
                         t) is C.UNBALANCED
    assert classify_pure(S("d", (), pre_minus=frozenset({q}), eff_plus=frozenset({b})),
                         t) is C.BOUNDED
    assert classify_pure(S("f", (), eff_plus=frozenset({b})), t) is C.UNBOUNDED


def _all_templates(domain):
    seen = {t.key: t for t in initial_templates(domain)}
    for mode in ("tis", "sis"):
        r = synthesize(domain, mode)
        for x in r.accepted + r.trivial + r.rejected:
            seen[x.template.key] = x.template
    return list(seen.values())


@pytest.mark.parametrize("name", ["floortile", "depot"])
def test_classes_partition_matching_literals(name, request):
    domain = request.getfixturevalue(name)
    for t in _all_templates(domain):
        for s in domain.all_instantaneous() + list(domain.dur_schemas):
            classes = t_classes(s, t)
            matched = {l for l in s.literals() if match_component(l, t) is not None}
            assert set().union(*(L.literals for L in classes)) == matched
            assert sum(len(L.literals) for L in classes) == len(matched)
            for L in classes:
                assert {class_key(l, t) for l in L.literals} == {L.key}


@pytest.mark.parametrize("name", ["floortile", "depot"])
def test_class_matching_pairs_fixed_arguments(name, request):
    domain = request.getfixturevalue(name)
    for t in _all_templates(domain):
        classes = [L for d in domain.dur_schemas for L in t_classes(d, t)]
        for L1, L2 in itertools.product(classes, repeat=2):
            m = class_matching(L1, L2, t)
            if m is None:
                continue
            assert len({a for a, _ in m}) == len(m) == len({b for _, b in m})
            for l1, l2 in itertools.product(L1.literals, L2.literals):
                k1, k2 = class_key(l1, t), class_key(l2, t)
                assert all((a, b) in m for a, b in zip(k1, k2))


# m-mutex is monotone in the matching ----------------------------------------------

def _fragment_pairs(domain):
    frags = domain.all_instantaneous()
    return [(a, b) for a in frags for b in frags]


@settings(max_examples=300, deadline=None)
@given(st.data())
def test_m_mutex_monotone(floortile, depot, data):
    domain = data.draw(st.sampled_from([floortile, depot]))
    a1, a2 = data.draw(st.sampled_from(_fragment_pairs(domain)))
    v1 = sorted(a1.params)
    v2 = sorted(a2.params)
    perm = data.draw(st.permutations(v2))
    n = data.draw(st.integers(0, min(len(v1), len(v2))))
    k = data.draw(st.integers(0, n))
    big = frozenset(zip(v1[:n], perm[:n]))
    small = frozenset(sorted(big)[:k])
    if m_mutex(a1, a2, small):
        assert m_mutex(a1, a2, big)
