import pytest

from barrierlogic.syntax import parse_file, parse_program
from barrierlogic.verifier import VerifyError, verify_par, verify_procedure, verify_program

from conftest import CORPUS

STRONG = (CORPUS / "barrier-strong.ss").read_text()
HEADER = STRONG.split("// end barrier definition")[0]
CELL = "data cl {int val;}\n"


def report(src, name):
    prog = parse_program(src)
    return verify_procedure(prog.procs[name], prog)


@pytest.mark.parametrize("name", ["barrier-strong.ss", "barrier-weak.ss", "barrier-paper.ss"])
def test_corpus_programs_verify(name):
    rep = verify_program(parse_file(CORPUS / name))
    assert [p.name for p in rep.procs if not p.ok] == []
    assert len(rep.procs) == 5


def test_loop_with_wrong_postcondition_fails():
    head, tail = STRONG.split("void th1_loop", 1)
    tail = tail.replace("v1=59", "v1=60", 1)
    prog = parse_program(head + "void th1_loop" + tail)
    rep = verify_procedure(prog.procs["th1_loop"], prog)
    assert not rep.ok
    assert any(o.rule == "postcondition" for o in rep.failures)


def test_skip_body():
    src = CELL + """void p(cl x) requires x::cl<v> & v > 2 ensures x::cl<v> & v > 2; { skip; }"""
    assert report(src, "p").ok


def test_write_through_half_share_fails():
    src = CELL + """void p(cl x) requires x::cl@[L]<5> ensures x::cl@[L]<7>; { x.val = 7; }"""
    rep = report(src, "p")
    assert not rep.ok
    assert rep.failures[0].rule == "store"


def test_full_share_write_and_read():
    src = CELL + """void p(cl x) requires x::cl<5> ensures x::cl<w> & w = 8;
{ int t; t = x.val; x.val = t + 3; }"""
    assert report(src, "p").ok


def test_barrier_from_state_zero():
    src = HEADER + """void p(cl x1, cl x2, cl y1, cl y2, cl i, bn b)
    requires x1::cl@[L]<1>*x2::cl@[L]<1>*y1::cl@[L]<_>*y2::cl@[L]<_>*i::cl@[L]<1>*b::bn@[L]<0>
    ensures x1::cl@[L]<1>*x2::cl@[L]<1>*y1::cl<_>*i::cl@[L]<1>*b::bn@[L]<1>;
{ barrier b; }"""
    rep = report(src, "p")
    assert rep.ok
    assert [o.detail for o in rep.obligations if o.rule == "barrier"] == ["0->1 move 1"]


def test_only_the_exit_move_applies_at_thirty():
    src = HEADER + """void p(cl x1, cl x2, cl y1, cl y2, cl i, bn b)
    requires x1::cl@[L]<A>*x2::cl@[L]<B>*i::cl@[L]<T>*b::bn@[L]<1> & T = 30
    ensures b::bn@[L]<3>;
{ barrier b; }"""
    rep = report(src, "p")
    assert rep.ok
    assert not any("moves apply" in w for w in rep.warnings)
    assert [o.detail for o in rep.obligations if o.rule == "barrier"] == ["1->3 move 1"]
    bad = report(src.replace("b::bn@[L]<3>;", "b::bn@[L]<2>;"), "p")
    assert not bad.ok


def test_par_split():
    rep = verify_par(parse_file(CORPUS / "barrier-strong.ss"))
    assert rep.ok


def test_single_thread_par_is_a_procedure_check():
    src = CELL + """void p(cl x) requires x::cl<1> ensures x::cl<2>; { x.val = 2; }
par requires x::cl<1> { p(x) };"""
    assert verify_par(parse_program(src)).ok


def test_overlapping_full_shares_cannot_split():
    src = CELL + """void p(cl x) requires x::cl<1> ensures x::cl<1>; { skip; }
par requires x::cl<1> { p(x) || p(x) };"""
    assert not verify_par(parse_program(src)).ok


def test_par_missing():
    with pytest.raises(VerifyError):
        verify_par(parse_program(CELL))


def test_half_share_mutant_fails_statically():
    rep = verify_program(parse_file(CORPUS / "half-share-write.ss"))
    assert not rep.ok
