import pytest

from barrierlogic import shares as sh
from barrierlogic.interp import (Cell, ConcState, EWaiting, Running, Scheduler, SeqState,
                                 Stuck, Waiting, check_erasure_commute, conc_step, erase,
                                 erased_step, initial_state, join_bmaps, join_heaps, run,
                                 seq_step)
from barrierlogic.program import Seq, Skip
from barrierlogic.syntax import parse_file, parse_program

from conftest import CORPUS

L = sh.from_path("L")
R = sh.from_path("R")


@pytest.fixture(scope="module")
def strong():
    return parse_file(CORPUS / "barrier-strong.ss")


def cells(res, cs, *names):
    mem = res.memory()
    store = cs.threads[0].store
    return tuple(mem[store[n]][0] for n in names)


def body_of(src, name="p"):
    prog = parse_program("data cl {int val;}\n" + src)
    return prog, prog.procs[name].body


def test_write_through_half_share_is_stuck():
    prog, body = body_of("void p(cl x) requires x::cl@[L]<5> ensures true; { x.val = 7; }")
    st = SeqState({"x": 1}, {1: Cell("cl", (5,), L)}, {})
    r = seq_step(st, body, prog)
    assert isinstance(r, Stuck) and r.reason.startswith("write-permission")


def test_read_needs_some_share():
    prog, body = body_of("void p(cl x) requires true ensures true; { int t; t = x.val; }")
    st = SeqState({"x": 1}, {}, {})
    st, rest = seq_step(st, body, prog)
    r = seq_step(st, rest, prog)
    assert isinstance(r, Stuck) and r.reason.startswith("read-permission")
    ok = SeqState({"x": 1}, {1: Cell("cl", (4,), R)}, {})
    st, rest = seq_step(ok, body, prog)
    st, rest = seq_step(st, rest, prog)
    assert st.store["t"] == 4 and isinstance(rest, Skip)


def test_skip_then_command():
    prog, body = body_of("void p(cl x) requires true ensures true; { int t; }")
    st = SeqState({"x": 1}, {}, {})
    got = seq_step(st, Seq(Skip(), body), prog)
    assert got == (st, body)


def test_round_robin(strong):
    cs = initial_state(strong)
    res = run(cs, strong, Scheduler("rr"))
    assert res.outcome == "Done"
    assert cells(res, cs, "x1", "x2", "i") == (59, 59, 30)


def test_random_schedules(strong):
    cs = initial_state(strong)
    for seed in range(1, 101):
        res = run(cs, strong, Scheduler("rand", seed))
        assert res.outcome == "Done", (seed, res.reason)
        assert cells(res, cs, "x1", "x2") == (59, 59)


def _until_waiting(cs, prog, tid):
    while not isinstance(cs.threads[tid].ctl, Waiting):
        r = conc_step(cs, tid, prog)
        assert isinstance(r, tuple), r
    return r


def test_suspend_then_release(strong):
    cs = initial_state(strong).clone()
    rule, _, _ = _until_waiting(cs, strong, 0)
    assert rule == "Suspend"
    (bid,) = cs.barpool
    assert len(cs.barpool[bid].slots) == 1
    assert isinstance(cs.threads[1].ctl, Running)
    _until_waiting(cs, strong, 1)
    rule, tid, _ = conc_step(cs, None, strong)
    assert rule == "Release" and tid is None
    assert all(isinstance(t.ctl, Running) for t in cs.threads)
    assert all(t.bmap[bid][0] == 1 for t in cs.threads)
    assert not cs.barpool[bid].slots


def test_pigeonhole(strong):
    cs = initial_state(strong).clone()
    t0, t1 = cs.threads
    t0.heap = join_heaps(t0.heap, t1.heap)
    t0.bmap = join_bmaps(t0.bmap, t1.bmap)
    t1.heap, t1.bmap = {}, {}
    _until_waiting(cs, strong, 0)
    assert cs.threads[0].ctl.move == 0
    r = conc_step(cs, 1, strong)
    assert isinstance(r, Stuck) and r.tid == 1


def test_empty_thread_list():
    prog = parse_program("")
    res = run(ConcState([], {}, 1), prog, Scheduler("rr"))
    assert res.outcome == "Done" and res.steps == []
    assert check_erasure_commute(ConcState([], {}, 1), prog, Scheduler("rr")).ok


def test_half_share_mutant_gets_stuck():
    prog = parse_file(CORPUS / "half-share-write.ss")
    res = run(initial_state(prog), prog, Scheduler("rr"))
    assert res.outcome == "Stuck"
    assert "write-permission" in res.reason


def test_erase_initial_state(strong):
    cs = initial_state(strong)
    es = erase(cs)
    assert sorted(es.memory) == [1, 2, 3, 4, 5]
    assert list(es.barriers.values()) == [(0, 2)]


def test_erase_distributes_over_join():
    a = SeqState({}, {1: Cell("cl", (3,), sh.FULL)}, {})
    b = SeqState({}, {2: Cell("cl", (4,), L)}, {})
    both = SeqState({}, join_heaps(a.heap, b.heap), {})
    assert erase(both).memory == {**erase(a).memory, **erase(b).memory}


def test_erase_keeps_waiting_control(strong):
    cs = initial_state(strong).clone()
    _until_waiting(cs, strong, 0)
    ctl = erase(cs).threads[0][1]
    assert isinstance(ctl, EWaiting) and ctl.cmd == cs.threads[0].ctl.cmd


def test_erasure_commutes(strong):
    cs = initial_state(strong)
    assert check_erasure_commute(cs, strong, Scheduler("rr")).ok
    assert check_erasure_commute(cs, strong, Scheduler("rand", 5)).ok


def test_corrupted_stepper_is_caught(strong):
    def corrupted(es, rule, tid, prog):
        out = erased_step(es, rule, tid, prog)
        if rule == "Seq" and out.memory:
            a = min(out.memory)
            out.memory[a] = tuple(v + 1 for v in out.memory[a])
        return out

    r = check_erasure_commute(initial_state(strong), strong, Scheduler("rr"), stepper=corrupted)
    assert not r.ok and r.first_bad is not None


def test_explicit_order_and_cap(strong):
    cs = initial_state(strong)
    res = run(cs, strong, Scheduler("list", order=[0, 0, 1]))
    assert res.outcome == "Cap" and res.reason == "schedule exhausted"
    assert len(res.steps) == 3
    assert run(cs, strong, Scheduler("rr"), cap=10).outcome == "Cap"
