import pytest

from barrierlogic.entail import check_pred_wf
from barrierlogic.logic import (IntLit, Var, alpha_eq, free_vars, rename, show, subst,
                                to_disjunct)
from barrierlogic.syntax import ParseError, parse_formula, parse_program

LL = """data node { int val; node next; }
pred ll<n> == self = null & n = 0 or self::node<_, q> * q::ll<n - 1> inv %s.
"""


def test_subst_examples():
    f = parse_formula("self::cl<v>")
    assert show(subst(f, {"self": Var("x")})) == "x::cl<v>"
    g = parse_formula("v = 2*a - 1")
    assert show(subst(g, {"v": IntLit(5)})) == "5=2*a-1"


def test_subst_avoids_capture():
    f = parse_formula("exists x: x = null")
    g = subst(f, {"self": Var("x")})
    (d,) = g.disjuncts
    assert d.evars != ("x",)
    assert alpha_eq(f, g)


def test_subst_inverse_renaming_is_identity():
    f = parse_formula("exists q: x::node<v, q> * q::ll<n> & v > n")
    there = rename(f, {"x": "y", "v": "w"})
    assert free_vars(there) == {"y", "w", "n"}
    assert alpha_eq(rename(there, {"y": "x", "w": "v"}), f)


def test_to_disjunct():
    single = parse_formula("x::cl<1>")
    ((vs, d),) = to_disjunct(single)
    assert vs == () and d == single.disjuncts[0]
    body = parse_formula("self = null & n = 0 or self::node<_, q> * q::ll<n - 1>")
    assert len(to_disjunct(body)) == 2
    ((vs, d),) = to_disjunct(parse_formula("exists a: exists b: x::cl<a> & a = b"))
    assert len(vs) == 2 and not d.evars


def test_pred_wellformedness():
    p = parse_program(LL % "n >= 0")
    assert check_pred_wf(p.defs.preds["ll"], p.defs).ok
    p = parse_program(LL % "n >= 1")
    rep = check_pred_wf(p.defs.preds["ll"], p.defs)
    assert not rep.ok and "branch 1" in rep.problems[0]
    p = parse_program("""data node { int val; node next; }
pred bad<n> == self = null & n = 0 or q::node<_, self> * q::bad<n - 1> inv n >= 0.""")
    rep = check_pred_wf(p.defs.preds["bad"], p.defs)
    assert not rep.ok and "not rooted at self" in rep.problems[0]


def test_parse_appendix_program(corpus):
    from barrierlogic.syntax import parse_file
    prog = parse_file(corpus / "barrier-strong.ss")
    assert len(prog.procs) == 4
    assert len(prog.defs.barriers) == 1
    assert sum(p.name.endswith("_loop") for p in prog.procs.values()) == 2


def test_parse_edge_cases():
    p = parse_program("")
    assert not p.procs and not p.checks and not p.defs.barriers
    with pytest.raises(ParseError):
        parse_program("checkentail x::cl@[L,LL]<v> |- emp.")
    with pytest.raises(ParseError):
        parse_formula("x::cl<1> * ")


def test_star_is_order_insensitive():
    a = parse_formula("x::cl<1> * y::cl<2> * z::cl<3>")
    b = parse_formula("z::cl<3> * x::cl<1> * y::cl<2>")
    assert a == b
