import dataclasses

import pytest

from barrierlogic.barrier import BarrierError, check_barrier, lookup_move
from barrierlogic.logic import IntLit, ShareLit, Var
from barrierlogic import shares as sh
from barrierlogic.syntax import parse_file

from conftest import CORPUS
from oracles import barrier_model_check

EXPECTED = {
    "appendix.bar": set(),
    "three-way.bar": set(),
    "handoff.bar": set(),
    "broken-frame.bar": {"g"},
    "broken-guard.bar": {"h"},
    "bad-count.bar": {"a"},
}


def load(name):
    prog = parse_file(CORPUS / name)
    (b,) = prog.defs.barriers.values()
    return prog, b


@pytest.mark.parametrize("name", sorted(EXPECTED))
def test_corpus_pattern(name):
    prog, b = load(name)
    rep = check_barrier(b, prog.defs)
    assert set(rep.failed()) == EXPECTED[name]
    assert rep.ok == (not EXPECTED[name])


def test_frame_failure_names_the_transition():
    prog, b = load("broken-frame.bar")
    rep = check_barrier(b, prog.defs)
    bad = [i for i in rep.items if not i.ok]
    assert all(i.check == "g" for i in bad)
    assert any(i.transition == "1->2" for i in bad)


def test_guard_failure_is_at_state_one():
    prog, b = load("broken-guard.bar")
    rep = check_barrier(b, prog.defs)
    bad = [i for i in rep.items if not i.ok]
    assert bad and all("1->" in i.transition for i in bad)


def test_lookup_move():
    _, b = load("appendix.bar")
    pre, post = lookup_move(b, 2, 0, 1)
    heap = pre.disjuncts[0].heap
    # the second move of 2->1 owns x1 outright and the left barrier half
    x1 = next(n for n in heap if n.ptr == Var("x1"))
    assert x1.share == ShareLit(sh.FULL)
    bn = next(n for n in heap if n.name == b.name)
    assert bn.share == ShareLit(sh.from_path("L")) and bn.args == (IntLit(2),)
    post_bn = next(n for n in post.disjuncts[0].heap if n.name == b.name)
    assert post_bn.args == (IntLit(1),)
    pre0, _ = lookup_move(b, 0, 0, 0)
    assert pre0 == b.transitions[0].specs[0][0]
    with pytest.raises(BarrierError):
        lookup_move(b, 0, 0, 2)
    with pytest.raises(BarrierError):
        lookup_move(b, 0, 1, 0)


def test_state_one_has_two_directions():
    _, b = load("appendix.bar")
    assert [t.dst for t in b.directions(1)] == [2, 3]


def test_token_check_is_labelled():
    prog, b = load("appendix.bar")
    text = check_barrier(b, prog.defs).render()
    assert "precision not verified" in text


def test_check_order_immaterial():
    prog, b = load("broken-guard.bar")
    flipped = dataclasses.replace(b, transitions=tuple(reversed(b.transitions)))

    def verdicts(x):
        # mutual-exclusion items name a pair of moves in either order
        return {(i.check, frozenset(i.transition.split(" vs ")), i.move, i.ok)
                for i in check_barrier(x, prog.defs).items}

    assert verdicts(b) == verdicts(flipped)


@pytest.mark.parametrize("name", ["appendix.bar", "three-way.bar", "handoff.bar"])
def test_model_level_sum_of_preconditions(name):
    prog, b = load(name)
    checked, bad = barrier_model_check(b, prog.defs)
    assert checked > 0 and bad == []


def test_model_level_detects_frame_mismatch():
    prog, b = load("broken-frame.bar")
    _, bad = barrier_model_check(b, prog.defs)
    assert any(v.startswith("1->2") for v in bad)
