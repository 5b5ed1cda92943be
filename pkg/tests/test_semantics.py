import random

from barrierlogic import shares as sh
from barrierlogic.entail import EntailResult, Residue, entail
from barrierlogic.logic import Disjunct, Formula
from barrierlogic.semantics import (Models, check_sound, is_valid, oracle_defs,
                                    random_satisfiable_entailment)
from barrierlogic.syntax import parse_formula

DEFS = oracle_defs()
M = Models(DEFS)
L = sh.from_path("L")


def one(text):
    (d,) = parse_formula(text).disjuncts
    return d


def test_sat_exact_and_framed():
    heap = {1: ("cl", (2,), sh.FULL), 2: ("cl", (0,), L)}
    env = {"x": 1, "y": 2}
    both = one("x::cl<2> * y::cl@[L]<0>")
    assert M.sat(env, heap, both)
    assert not M.sat(env, heap, one("x::cl<2>"))
    assert M.sat(env, heap, one("x::cl<2>"), frame=True)
    assert M.sat(env, heap, one("x::cl@[L]<v> * x::cl@[R]<v> * y::cl@f<0>"), ["v", "f"])


def test_models_of_list_predicate():
    # two cells and the null tail need three unfoldings
    assert list(M.models(one("x::ll<2>"))) == []
    models = list(Models(DEFS, unfold_depth=3).models(one("x::ll<2>")))
    assert models
    for env, heap in models:
        assert len(heap) == 2 and all(c[0] == "node" for c in heap.values())


def test_validity_examples():
    assert is_valid(one("x::cl@[L]<a> * y::cl@[L]<b>"), parse_formula("x != y"), DEFS)
    assert not is_valid(one("x::cl@[L]<a> * y::cl@[R]<b>"), parse_formula("x != y"), DEFS)
    assert is_valid(one("x::node<7, null>"), parse_formula("x::ll<1>"), DEFS, frame=False)


def test_check_sound_accepts_real_residue():
    ante = one("x::cl<1>")
    conseq = parse_formula("x::cl@[L]<v>")
    r = entail(ante, conseq, DEFS, ["v"])
    assert r.ok and check_sound(ante, conseq, r, DEFS, ["v"], M) is None


def test_check_sound_rejects_fake_residue():
    ante = one("x::cl<1>")
    conseq = parse_formula("x::cl@[L]<1>")
    fake = EntailResult(True, [Residue(one("x::cl@[L]<1>"))])
    assert check_sound(ante, conseq, fake, DEFS, (), M) is not None
    wrong_value = EntailResult(True, [Residue(one("x::cl@[R]<2>"))])
    assert check_sound(ante, conseq, wrong_value, DEFS, (), M) is not None


def test_generator_draws_satisfiable_antecedents():
    rng = random.Random(0)
    for _ in range(20):
        ante, conseq, evars = random_satisfiable_entailment(rng, M)
        assert isinstance(ante, Disjunct) and isinstance(conseq, Formula)
        assert next(iter(M.models(ante)), None) is not None
