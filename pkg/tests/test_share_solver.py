import random

import pytest

from barrierlogic import shares as sh
from barrierlogic.share_solver import (DNF_CAP, And, Bounded, ConstEq, Exists, Join, Or,
                                       ResourceLimit, ShareSystem, VarEq, query_exists_elim,
                                       query_impl, query_unsat, solve, to_dnf)

from oracles import brute_solutions, random_system, solver_properties

F, E = sh.FULL, sh.EMPTY
L, R = sh.from_path("L"), sh.from_path("R")


def system(*eqs):
    vs = set()
    for e in eqs:
        for t in ((e.a, e.b, e.c) if isinstance(e, Join) else (e.v,)):
            if isinstance(t, str):
                vs.add(t)
    return ShareSystem(tuple(eqs), (), frozenset(vs))


def test_dnf_shapes():
    assert len(to_dnf(And(Join("a", "b", F), ConstEq("a", L)))) == 1
    assert len(to_dnf(And(Join("a", "b", F), ConstEq("a", L)))[0].equations) == 2
    assert len(to_dnf(Or(ConstEq("a", L), ConstEq("a", R)))) == 2
    (s,) = to_dnf(Exists("w", Join("v", "w", F)))
    (j,) = s.equations
    assert j.a == "v" and j.b != "w" and j.c == F


def test_dnf_cap():
    big = And(*[Or(ConstEq(f"a{i}", L), ConstEq(f"a{i}", R)) for i in range(13)])
    assert 2 ** 13 > DNF_CAP
    with pytest.raises(ResourceLimit):
        to_dnf(big)


def test_bounded_kept_native():
    (s,) = to_dnf(Bounded("a", E, L))
    assert s.equations == (Bounded("a", E, L),)


def test_solve_examples():
    r = solve(system(Join("a", "b", F), ConstEq("a", L)))
    assert r.precise and r.value("b") == R
    assert solve(system(Join(F, F, F))).unsat
    assert solve(system(Join("a", "a", "b"))).unsat
    r = solve(system(Join("a", "b", "c")))
    assert not r.unsat and not r.precise
    assert all(sh.leq(lo, hi) for lo, hi in r.domains.values())


def test_solve_bounds_never_inverted():
    for i in range(300):
        r = solve(random_system(random.Random(i)))
        if not r.unsat:
            assert all(sh.leq(lo, hi) for lo, hi in r.domains.values())


def test_aliases_are_merged():
    s = ShareSystem((ConstEq("a", L), Join("b", "c", F)), (("a", "b"),),
                    frozenset({"a", "b", "c"}))
    r = solve(s)
    assert r.value("b") == L and r.value("c") == R


def test_query_unsat_examples():
    assert query_unsat(And(ConstEq("v", L), ConstEq("v", R)))
    assert not query_unsat(Join("a", "b", F))
    assert query_unsat(And(Join("a", "b", "c"), ConstEq("c", L), ConstEq("a", L)))
    names, sols = brute_solutions(system(Join("a", "b", "c"), ConstEq("c", L),
                                         ConstEq("a", L)), 2)
    assert len(sols) == 0


def test_query_exists_elim_examples():
    assert query_exists_elim(Exists("v", Join("v", R, F)), "v") == L
    assert query_exists_elim(Exists("v", Join("v", "w", F)), "v") is None
    assert query_exists_elim(Exists("v", Or(ConstEq("v", L), ConstEq("v", L))), "v") == L


def test_query_impl_examples():
    assert query_impl(ConstEq("v", L), Exists("w", Join("v", "w", F)))
    assert query_impl(And(ConstEq("v", L), ConstEq("v", R)), ConstEq("z", L))
    assert not query_impl(And(), ConstEq("v", L))
    assert not query_impl(ConstEq("v", L), ConstEq("v", R))


def test_query_impl_saturates_identical_joins():
    # the antecedent join literally contains the consequent
    assert query_impl(Join("v1", "v2", "v3"), Join("v1", "v2", "v3"))
    assert query_impl(Join("v1", "v2", "v3"), Join("v2", "v1", "v3"))
    assert not query_impl(Join("v1", "v2", "v3"), Join("v1", "v3", "v2"))


def test_query_impl_cancellation():
    ante = And(Join("a", "b", F), Join("a", "c", F))
    assert query_impl(ante, VarEq("b", "c"))


@pytest.mark.parametrize("seed", range(4))
def test_differential_depth2(seed):
    rng = random.Random(1000 + seed)
    for _ in range(200):
        s = random_system(rng, planted=rng.random() < 0.5)
        assert solver_properties(s, 2) == [], s


def test_unsat_sound_at_depth3():
    rng = random.Random(7)
    checked = 0
    while checked < 60:
        s = random_system(rng, max_vars=2, const_depth=3)
        if solve(s).unsat:
            _, sols = brute_solutions(s, 3)
            assert len(sols) == 0, s
            checked += 1
