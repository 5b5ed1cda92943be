"""Barrier definitions and their consistency checks.

A barrier is a state machine.  Each transition lists one (pre, post) move
per synchronising thread.  Free variables other than the parameters and
``self`` are scoped to one transition: every move of that transition
refers to the same logical values.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .entail import entail, fxpure, heap_hypothesis, same_cell_facts
from .logic import (FULL_SHARE, Defs, Disjunct, Formula, IntLit, Node, SortError, Var,
                    conj, free_vars, fresh, rename, show, star, star_formula)
from .pure import FragmentError, pure_unsat
from .share_solver import ResourceLimit


class BarrierError(ValueError):
    pass


@dataclass(frozen=True)
class Transition:
    src: int
    dst: int
    specs: tuple              # ((pre Formula, post Formula), ...)


@dataclass(frozen=True)
class BarrierDef:
    name: str
    count: int
    params: tuple
    transitions: tuple
    line: int = 0

    def states(self) -> List[int]:
        out = set()
        for t in self.transitions:
            out.update((t.src, t.dst))
        return sorted(out)

    def directions(self, state: int) -> List[Transition]:
        return [t for t in self.transitions if t.src == state]


def lookup_move(b: BarrierDef, cs: int, direction: int, mv: int) -> Tuple[Formula, Formula]:
    """The (pre, post) of move ``mv`` along the ``direction``-th transition out of ``cs``."""
    dirs = b.directions(cs)
    if not 0 <= direction < len(dirs):
        raise BarrierError(f"barrier {b.name}: state {cs} has no direction {direction}")
    specs = dirs[direction].specs
    if not 0 <= mv < len(specs):
        raise BarrierError(f"barrier {b.name}: transition {cs}->{dirs[direction].dst} has no move {mv}")
    return specs[mv]


def barrier_fact(b: BarrierDef, state, share=FULL_SHARE, ptr: str = "self") -> Disjunct:
    return Disjunct((Node(Var(ptr), b.name, share, (IntLit(state) if isinstance(state, int) else state,)),))


# -- reports -----------------------------------------------------------------------

CHECK_NAMES = {
    "a": "spec count",
    "b": "pre holds barrier in source state",
    "c": "post holds barrier in target state",
    "d": "token (precision not verified)",
    "e": "pre sum is full barrier",
    "f": "post sum is full barrier",
    "g": "frame equality",
    "h": "mutual exclusion",
    "elab": "elaboration",
}


@dataclass
class CheckItem:
    check: str
    ok: bool
    transition: Optional[str] = None
    move: Optional[int] = None
    detail: str = ""

    def line(self) -> str:
        where = ""
        if self.transition is not None:
            where = f" {self.transition}"
            if self.move is not None:
                where += f" move {self.move + 1}"
        verdict = "ok" if self.ok else "FAILED"
        msg = f"  ({self.check}) {CHECK_NAMES[self.check]}{where}: {verdict}"
        if self.detail and not self.ok:
            msg += f" [{self.detail}]"
        return msg


@dataclass
class CheckReport:
    barrier: str
    items: List[CheckItem] = field(default_factory=list)
    entailments: int = 0

    @property
    def ok(self) -> bool:
        return all(i.ok for i in self.items)

    def failed(self) -> List[str]:
        return sorted({i.check for i in self.items if not i.ok})

    def render(self) -> str:
        head = f"barrier {self.barrier}: {'OK' if self.ok else 'FAILED ' + ','.join(self.failed())}"
        return "\n".join([head] + [i.line() for i in self.items])


# -- the checks ------------------------------------------------------------------------

class _Checker:
    def __init__(self, b: BarrierDef, defs: Defs):
        self.b = b
        self.defs = defs
        self.report = CheckReport(b.name)
        self.fixed = set(b.params) | {"self"}

    def add(self, check, ok, t=None, mv=None, detail=""):
        self.report.items.append(CheckItem(check, ok, t, mv, detail))

    def entail(self, ante, conseq, evars=()):
        self.report.entailments += 1
        return entail(ante, conseq, self.defs, evars)

    def apart(self, f: Formula) -> Formula:
        ren = {v: fresh(v) for v in sorted(free_vars(f) - self.fixed)}
        return rename(f, ren)

    def elaborate(self) -> bool:
        ok = True
        for t in self.b.transitions:
            for pre, post in t.specs:
                for f in (pre, post):
                    for d in f.disjuncts:
                        for n in d.heap:
                            try:
                                kind = self.defs.kind(n.name)
                            except SortError as exc:
                                self.add("elab", False, _tname(t), None, str(exc))
                                ok = False
                                continue
                            if kind == "barrier" and n.name != self.b.name:
                                self.add("elab", False, _tname(t), None,
                                         f"foreign barrier {n.name}")
                                ok = False
                            if isinstance(n.ptr, Var) and n.ptr.name not in self.fixed \
                                    and n.ptr.name not in d.evars:
                                self.add("elab", False, _tname(t), None,
                                         f"{n.ptr.name} is not a barrier parameter")
                                ok = False
        return ok

    def run(self) -> CheckReport:
        if not self.elaborate():
            return self.report
        for t in self.b.transitions:
            self.transition(t)
        for s in self.b.states():
            dirs = self.b.directions(s)
            if len(dirs) >= 2:
                self.exclusion(s, dirs)
        return self.report

    def transition(self, t: Transition):
        name = _tname(t)
        self.add("a", len(t.specs) == self.b.count, name, None,
                 f"{len(t.specs)} moves for {self.b.count} threads")
        for k, (pre, post) in enumerate(t.specs):
            for check, f, state in (("b", pre, t.src), ("c", post, t.dst)):
                v = fresh("f")
                goal = barrier_fact(self.b, state, Var(v))
                r = self.entail(f, goal, (v,))
                self.add(check, r.ok, name, k, "; ".join(r.trace[-1:]))
            # token: two copies of the same precondition cannot coexist
            r = self.entail(star_formula(pre, self.apart(pre)), Formula(()))
            self.add("d", r.ok, name, k, "pre * pre is satisfiable")
        if not t.specs:
            return
        d_pre = self.sum_frame("e", t, 0, name)
        d_post = self.sum_frame("f", t, 1, name)
        if d_pre is None or d_post is None:
            self.add("g", False, name, None, "no frame to compare")
            return
        ok1, why1 = self.frame_entails(d_pre, d_post)
        ok2, why2 = self.frame_entails(d_post, d_pre)
        self.add("g", ok1 and ok2, name, None, why1 or why2)

    def sum_frame(self, check, t, side, name) -> Optional[Formula]:
        total = t.specs[0][side]
        for spec in t.specs[1:]:
            total = star_formula(total, spec[side])
        state = t.src if side == 0 else t.dst
        r = self.entail(total, barrier_fact(self.b, state))
        if not r.ok:
            self.add(check, False, name, None, "; ".join(r.trace[-1:]))
            return None
        self.add(check, True, name)
        return Formula(tuple(x.delta for x in r.residues))

    def frame_entails(self, a: Formula, c: Formula):
        evars = tuple(sorted(free_vars(c) - free_vars(a) - self.fixed))
        r = self.entail(a, c, evars)
        if not r.ok:
            return False, "; ".join(r.trace[-1:])
        for x in r.residues:
            if x.delta.heap:
                return False, f"leftover {' * '.join(show(n) for n in x.delta.heap)}"
        return True, ""

    def exclusion(self, state: int, dirs: List[Transition]):
        for i, t1 in enumerate(dirs):
            for t2 in dirs[i + 1:]:
                for k1, (pre1, _) in enumerate(t1.specs):
                    for k2, (pre2, _) in enumerate(t2.specs):
                        ok = self.disjoint(pre1, self.apart(pre2))
                        self.add("h", ok, f"{_tname(t1)} move {k1 + 1} vs {_tname(t2)} move {k2 + 1}",
                                 None, "both preconditions can hold together")

    def disjoint(self, f1: Formula, f2: Formula) -> bool:
        for d1 in f1.disjuncts:
            for d2 in f2.disjuncts:
                _, a = _open(d1)
                _, b = _open(d2)
                hyp = conj(heap_hypothesis(a.heap, a.pure, self.defs),
                           heap_hypothesis(b.heap, b.pure, self.defs),
                           *same_cell_facts(a.heap + b.heap, self.defs))
                try:
                    if not pure_unsat(hyp):
                        return False
                except (FragmentError, ResourceLimit):
                    return False
        return True


def _open(d: Disjunct):
    from .logic import open_disjunct
    return open_disjunct(d)


def _tname(t: Transition) -> str:
    return f"{t.src}->{t.dst}"


def check_barrier(b: BarrierDef, defs: Defs) -> CheckReport:
    """Run every consistency check on ``b``; the verdicts are collected, not raised."""
    return _Checker(b, defs).run()
