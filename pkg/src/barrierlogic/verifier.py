"""Forward symbolic execution of annotated procedures.

The symbolic state is a list of paths.  Each path pairs a disjunct over
logical variables with a store mapping program variables to logical terms,
so program variables never occur inside assertions.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .barrier import BarrierDef
from .entail import entail, heap_hypothesis
from .logic import (FALSE, FULL_SHARE, NULL, TRUE, BinOp, BoolConst, Cmp, Defs,
                    Disjunct, Formula, IntLit, Node, Not, Var, conj, disj, eq,
                    free_vars, fresh, open_disjunct, show, star, subst)
from .program import (Assign, BarrierCmd, Call, Decl, EBin, EBool, EInt, ENot, ENull,
                      EVar, Free, If, Load, New, Par, Proc, Program, Seq, Skip, Store,
                      While, show_cmd, show_expr)
from .pure import FragmentError, pure_unsat
from .share_solver import ResourceLimit


class VerifyError(Exception):
    pass


@dataclass
class Path:
    state: Disjunct
    store: Dict[str, object]


@dataclass
class Obligation:
    rule: str
    line: int
    ok: bool
    detail: str = ""

    def as_dict(self):
        return {"rule": self.rule, "line": self.line, "ok": self.ok, "detail": self.detail}


@dataclass
class ProcReport:
    name: str
    ok: bool = True
    obligations: List[Obligation] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)
    seconds: float = 0.0
    entailments: int = 0

    @property
    def failures(self) -> List[Obligation]:
        return [o for o in self.obligations if not o.ok]

    def as_dict(self):
        return {"name": self.name, "verified": self.ok, "seconds": round(self.seconds, 3),
                "obligations": [o.as_dict() for o in self.obligations],
                "warnings": list(self.warnings)}


# -- expressions ---------------------------------------------------------------------

_REL = {"==": "=", "!=": "!=", "<": "<", "<=": "<=", ">": ">", ">=": ">="}


def eval_term(e, store: Dict[str, object]):
    if isinstance(e, EVar):
        if e.name not in store:
            raise VerifyError(f"unknown variable {e.name}")
        return store[e.name]
    if isinstance(e, EInt):
        return IntLit(e.value)
    if isinstance(e, ENull):
        return NULL
    if isinstance(e, EBin) and e.op in ("+", "-", "*"):
        return BinOp(e.op, eval_term(e.left, store), eval_term(e.right, store))
    raise VerifyError(f"not a value expression: {show_expr(e)}")


def eval_cond(e, store: Dict[str, object]):
    if isinstance(e, EBool):
        return TRUE if e.value else FALSE
    if isinstance(e, ENot):
        return Not(eval_cond(e.body, store))
    if isinstance(e, EBin):
        if e.op == "&&":
            return conj(eval_cond(e.left, store), eval_cond(e.right, store))
        if e.op == "||":
            return disj(eval_cond(e.left, store), eval_cond(e.right, store))
        if e.op in _REL:
            return Cmp(_REL[e.op], eval_term(e.left, store), eval_term(e.right, store))
    # an integer used as a condition
    return Cmp("!=", eval_term(e, store), IntLit(0))


def assigned_vars(c) -> set:
    if isinstance(c, (Assign, Load, New)):
        return {c.var}
    if isinstance(c, Decl):
        return {c.var}
    if isinstance(c, Seq):
        return assigned_vars(c.first) | assigned_vars(c.second)
    if isinstance(c, If):
        return assigned_vars(c.then) | assigned_vars(c.orelse)
    if isinstance(c, While):
        return assigned_vars(c.body)
    return set()


# -- the executor -------------------------------------------------------------------------

class Verifier:
    def __init__(self, prog: Program):
        self.prog = prog
        self.defs: Defs = prog.defs

    # obligations ---------------------------------------------------------------------

    def _entail(self, rep: ProcReport, rule: str, line: int, ante: Disjunct, conseq,
                evars=(), record: bool = True):
        try:
            r = entail(ante, conseq, self.defs, evars)
        except (FragmentError, ResourceLimit) as exc:
            if isinstance(exc, ResourceLimit):
                raise
            rep.obligations.append(Obligation(rule, line, False, str(exc)))
            rep.ok = False
            return None
        rep.entailments += 1
        if record:
            detail = "" if r.ok else " / ".join(r.trace[-3:])
            rep.obligations.append(Obligation(rule, line, r.ok, detail))
            if not r.ok:
                rep.ok = False
        return r if r.ok else None

    def _feasible(self, d: Disjunct) -> bool:
        try:
            return not pure_unsat(heap_hypothesis(d.heap, d.pure, self.defs))
        except FragmentError:
            return True

    # commands -----------------------------------------------------------------------

    def exec(self, c, paths: List[Path], rep: ProcReport, proc: Proc) -> List[Path]:
        if not paths:
            return paths
        if isinstance(c, Skip):
            return paths
        if isinstance(c, Seq):
            return self.exec(c.second, self.exec(c.first, paths, rep, proc), rep, proc)
        out: List[Path] = []
        if isinstance(c, If):
            then_paths, else_paths = [], []
            for p in paths:
                cond = eval_cond(c.cond, p.store)
                for target, pure in ((then_paths, cond), (else_paths, Not(cond))):
                    d = Disjunct(p.state.heap, conj(p.state.pure, pure))
                    if self._feasible(d):
                        target.append(Path(d, dict(p.store)))
            return (self.exec(c.then, then_paths, rep, proc)
                    + self.exec(c.orelse, else_paths, rep, proc))
        if isinstance(c, While):
            return self.exec_while(c, paths, rep, proc)
        for p in paths:
            out.extend(self.step(c, p, rep, proc))
        return out

    def step(self, c, p: Path, rep: ProcReport, proc: Proc) -> List[Path]:
        store = p.store
        if isinstance(c, Decl):
            return [Path(p.state, {**store, c.var: Var(fresh(c.var))})]
        if isinstance(c, Assign):
            v = fresh(c.var)
            try:
                val = eval_term(c.expr, store)
                pure = eq(Var(v), val)
            except VerifyError:
                pure = _bool_def(Var(v), eval_cond(c.expr, store))
            return [Path(Disjunct(p.state.heap, conj(p.state.pure, pure)),
                         {**store, c.var: Var(v)})]
        if isinstance(c, Load):
            return self.heap_access(c, p, rep, full=False)
        if isinstance(c, Store):
            return self.heap_access(c, p, rep, full=True)
        if isinstance(c, Free):
            return self.heap_access(c, p, rep, full=True)
        if isinstance(c, New):
            ptr = fresh(c.var)
            args = tuple(eval_term(a, store) for a in c.args)
            node = Node(Var(ptr), c.dtype, FULL_SHARE, args)
            return [Path(Disjunct(p.state.heap + (node,), p.state.pure),
                         {**store, c.var: Var(ptr)})]
        if isinstance(c, Call):
            return self.exec_call(c, p, rep)
        if isinstance(c, BarrierCmd):
            return self.exec_barrier(c, p, rep, proc)
        raise VerifyError(f"cannot execute {show_cmd(c)}")

    def heap_access(self, c, p: Path, rep: ProcReport, full: bool) -> List[Path]:
        dd = self.defs.data[c.dtype]
        ptr = eval_term(c.ptr, p.store)
        ws = [fresh("w") for _ in dd.fields]
        share_v = fresh("f")
        share = FULL_SHARE if full else Var(share_v)
        want = Node(ptr, c.dtype, share, tuple(Var(w) for w in ws))
        evars = tuple(ws) + (() if full else (share_v,))
        rule = {Load: "load", Store: "store", Free: "free"}[type(c)]
        r = self._entail(rep, rule, c.line, p.state, Disjunct((want,)), evars)
        if r is None:
            return []
        out = []
        for res in r.residues:
            vals = [res.bindings[w] for w in ws]
            d = res.delta
            if isinstance(c, Load):
                got = Node(ptr, c.dtype, share if full else res.bindings[share_v], tuple(vals))
                v = fresh(c.var)
                i = dd.index(c.field)
                state = Disjunct(d.heap + (got,), conj(d.pure, eq(Var(v), vals[i])))
                out.append(Path(state, {**p.store, c.var: Var(v)}))
            elif isinstance(c, Store):
                i = dd.index(c.field)
                vals[i] = eval_term(c.expr, p.store)
                got = Node(ptr, c.dtype, FULL_SHARE, tuple(vals))
                out.append(Path(Disjunct(d.heap + (got,), d.pure), dict(p.store)))
            else:
                out.append(Path(d, dict(p.store)))
        return out

    def exec_call(self, c: Call, p: Path, rep: ProcReport) -> List[Path]:
        callee = self.prog.procs[c.proc]
        args = [eval_term(a, p.store) for a in c.args]
        m = dict(zip(callee.param_names, args))
        logical = sorted(free_vars(callee.requires) - set(callee.param_names))
        ren = {v: fresh(v) for v in logical}
        pre = subst(callee.requires, {**m, **{v: Var(n) for v, n in ren.items()}})
        r = self._entail(rep, f"call {c.proc}", c.line, p.state, pre, tuple(ren.values()))
        if r is None:
            return []
        out = []
        post_only = sorted(free_vars(callee.ensures) - set(callee.param_names) - set(logical))
        for res in r.residues:
            mm = dict(m)
            for v, n in ren.items():
                mm[v] = res.bindings[n]
            for v in post_only:
                mm[v] = Var(fresh(v))
            for d in subst(callee.ensures, mm).disjuncts:
                out.append(Path(star(res.delta, d), dict(p.store)))
        return [self._close(x) for x in out if self._feasible(x.state)]

    def _close(self, p: Path) -> Path:
        _, d = open_disjunct(p.state)
        return Path(d, p.store)

    def exec_barrier(self, c: BarrierCmd, p: Path, rep: ProcReport, proc: Proc) -> List[Path]:
        bname = proc.types.get(c.var)
        bdef: Optional[BarrierDef] = self.defs.barriers.get(bname)
        if bdef is None:
            rep.obligations.append(Obligation("barrier", c.line, False,
                                              f"{c.var} is not a barrier"))
            rep.ok = False
            return []
        m = {"self": eval_term(EVar(c.var), p.store)}
        for prm in bdef.params:
            if prm in p.store:
                m[prm] = p.store[prm]
        chosen = None
        applicable = []
        for t in bdef.transitions:
            scoped = set()
            for pre, post in t.specs:
                scoped |= free_vars(pre) | free_vars(post)
            scoped -= set(m)
            for k, (pre, post) in enumerate(t.specs):
                ren = {v: fresh(v) for v in sorted(scoped)}
                sub = {**m, **{v: Var(n) for v, n in ren.items()}}
                r = self._entail(rep, "barrier", c.line, p.state, subst(pre, sub),
                                 tuple(ren.values()), record=False)
                if r is None:
                    continue
                applicable.append(f"{t.src}->{t.dst} move {k + 1}")
                if chosen is None:
                    chosen = (t, k, r, post, sub, ren)
        if chosen is None:
            rep.obligations.append(Obligation("barrier", c.line, False,
                                              f"no move of {bname} applies"))
            rep.ok = False
            return []
        t, k, r, post, sub, ren = chosen
        rep.obligations.append(Obligation("barrier", c.line, True,
                                          f"{t.src}->{t.dst} move {k + 1}"))
        if len(applicable) > 1:
            rep.warnings.append(f"line {c.line}: {len(applicable)} barrier moves apply "
                                f"({', '.join(applicable)}); took the first")
        out = []
        for res in r.residues:
            mm = dict(sub)
            for v, n in ren.items():
                mm[v] = res.bindings[n]
            for d in subst(post, mm).disjuncts:
                out.append(Path(star(res.delta, d), dict(p.store)))
        return [self._close(x) for x in out if self._feasible(x.state)]

    def exec_while(self, c: While, paths: List[Path], rep: ProcReport, proc: Proc):
        if c.inv is None:
            rep.obligations.append(Obligation("while", c.line, False, "loop needs an inv annotation"))
            rep.ok = False
            return []
        changed = sorted(assigned_vars(c.body))
        out = []
        for p in paths:
            inv_now, ev = self._inv(c.inv, p.store)
            r = self._entail(rep, "loop entry", c.line, p.state, inv_now, ev)
            if r is None:
                continue
            store2 = dict(p.store)
            for v in changed:
                store2[v] = Var(fresh(v))
            inv2, _ = self._inv(c.inv, store2)
            body_paths = []
            exit_paths = []
            for d in inv2.disjuncts:
                _, d = open_disjunct(d)
                cond = eval_cond(c.cond, store2)
                body_paths.append(Path(Disjunct(d.heap, conj(d.pure, cond)), dict(store2)))
                for res in r.residues:
                    frame = res.delta
                    exit_paths.append(Path(star(frame, Disjunct(d.heap, conj(d.pure, Not(cond)))),
                                           dict(store2)))
            body_paths = [x for x in body_paths if self._feasible(x.state)]
            for q in self.exec(c.body, body_paths, rep, proc):
                inv_end, ev2 = self._inv(c.inv, q.store)
                self._entail(rep, "loop invariant", c.line, q.state, inv_end, ev2)
            out.extend(x for x in exit_paths if self._feasible(x.state))
        return out

    def _inv(self, inv: Formula, store) -> Tuple[Formula, tuple]:
        m = {k: v for k, v in store.items()}
        extra = sorted(free_vars(inv) - set(store))
        ren = {v: fresh(v) for v in extra}
        m.update({v: Var(n) for v, n in ren.items()})
        return subst(inv, m), tuple(ren.values())

    # procedures -------------------------------------------------------------------------

    def verify_procedure(self, proc: Proc) -> ProcReport:
        rep = ProcReport(proc.name)
        t0 = time.perf_counter()
        store = {n: Var(n) for n in proc.param_names}
        paths = []
        for d in proc.requires.disjuncts:
            _, d = open_disjunct(d)
            paths.append(Path(d, dict(store)))
        try:
            finals = self.exec(proc.body, paths, rep, proc)
            logical = free_vars(proc.requires) | set(proc.param_names)
            evars = tuple(sorted(free_vars(proc.ensures) - logical))
            for q in finals:
                r = self._entail(rep, "postcondition", proc.line, q.state, proc.ensures, evars)
                if r is not None:
                    for res in r.residues:
                        if res.delta.heap:
                            leak = " * ".join(show(n) for n in res.delta.heap)
                            rep.warnings.append(f"postcondition leaves {leak}")
        except VerifyError as exc:
            rep.ok = False
            rep.obligations.append(Obligation("execute", proc.line, False, str(exc)))
        rep.seconds = time.perf_counter() - t0
        rep.warnings = list(dict.fromkeys(rep.warnings))
        return rep

    def verify_par(self) -> ProcReport:
        par: Par = self.prog.par
        rep = ProcReport("par")
        t0 = time.perf_counter()
        whole = None
        evars = []
        for name, args in par.threads:
            callee = self.prog.procs[name]
            m = {pn: Var(a) for pn, a in zip(callee.param_names, args)}
            logical = sorted(free_vars(callee.requires) - set(callee.param_names))
            ren = {v: fresh(v) for v in logical}
            evars.extend(ren.values())
            pre = subst(callee.requires, {**m, **{v: Var(n) for v, n in ren.items()}})
            whole = pre if whole is None else Formula(tuple(
                star(a, b) for a in whole.disjuncts for b in pre.disjuncts))
        whole = whole or Formula(Disjunct())
        for d in par.requires.disjuncts:
            _, d = open_disjunct(d)
            r = self._entail(rep, "par split", par.line, d, whole, tuple(evars))
            if r is not None:
                for res in r.residues:
                    if res.delta.heap:
                        rep.ok = False
                        rep.obligations.append(Obligation(
                            "par split", par.line, False,
                            "unclaimed " + " * ".join(show(n) for n in res.delta.heap)))
        rep.seconds = time.perf_counter() - t0
        return rep


def _bool_def(v, cond):
    return disj(conj(cond, eq(v, IntLit(1))), conj(Not(cond), eq(v, IntLit(0))))


@dataclass
class ProgramReport:
    procs: List[ProcReport]

    @property
    def ok(self) -> bool:
        return all(p.ok for p in self.procs)


def verify_procedure(proc: Proc, prog: Program) -> ProcReport:
    return Verifier(prog).verify_procedure(proc)


def verify_par(prog: Program) -> ProcReport:
    if prog.par is None:
        raise VerifyError("program has no par directive")
    return Verifier(prog).verify_par()


def verify_program(prog: Program) -> ProgramReport:
    v = Verifier(prog)
    reports = [v.verify_procedure(p) for p in prog.procs.values()]
    if prog.par is not None:
        reports.append(v.verify_par())
    return ProgramReport(reports)
