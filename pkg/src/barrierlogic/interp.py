"""Concrete execution with permission tracking, plus the erased machine.

Unerased machine
    Each thread owns a partial heap ``addr -> Cell(dtype, values, share)``
    and a barrier map ``bid -> (state, share)``.  Reads need a positive
    share, writes and frees need the full share.  At a barrier the thread
    carves a substate satisfying one move precondition into the barrier's
    waitpool and suspends.  When every move is filled the pooled state is
    re-divided according to the postconditions and all waiting threads
    resume.

Erased machine
    A single total memory, thread stores and a ``(count, limit)`` counter
    per barrier.  It never checks permissions.

``check_erasure_commute`` replays an unerased trace and asserts that the
erased machine makes the matching step at every point.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, Iterable, List, Optional, Tuple, Union

from . import shares as sh
from .logic import (BinOp, BoolConst, Cmp, Conj, Disj, Disjunct, Exists, Forall,
                    Formula, IntLit, MinMax, Node, Not, NullLit, ShareBound, ShareEq,
                    ShareJoin, ShareLit, Var, show)
from .program import (Assign, BarrierCmd, Call, Decl, EBin, EBool, EInt, ENot, ENull,
                      EVar, Free, If, Load, New, Program, Return, Seq, Skip, Store,
                      While, show_cmd)


class InterpError(Exception):
    """The program uses something the interpreter cannot execute."""


@dataclass(frozen=True)
class Stuck:
    reason: str
    tid: Optional[int] = None


@dataclass(frozen=True)
class Cell:
    dtype: str
    values: tuple
    share: object


# -- sequential states and steps --------------------------------------------------------

@dataclass
class SeqState:
    store: Dict[str, int]
    heap: Dict[int, Cell]
    bmap: Dict[int, Tuple[int, object]]
    brk: int = 1


def eval_expr(e, store: Dict[str, int]) -> int:
    if isinstance(e, EVar):
        if e.name not in store:
            raise InterpError(f"unbound variable {e.name}")
        return store[e.name]
    if isinstance(e, EInt):
        return e.value
    if isinstance(e, ENull):
        return 0
    if isinstance(e, EBool):
        return int(e.value)
    if isinstance(e, ENot):
        return int(not eval_expr(e.body, store))
    if isinstance(e, EBin):
        if e.op == "&&":
            return int(bool(eval_expr(e.left, store)) and bool(eval_expr(e.right, store)))
        if e.op == "||":
            return int(bool(eval_expr(e.left, store)) or bool(eval_expr(e.right, store)))
        a, b = eval_expr(e.left, store), eval_expr(e.right, store)
        return {
            "+": lambda: a + b, "-": lambda: a - b, "*": lambda: a * b,
            "<": lambda: int(a < b), "<=": lambda: int(a <= b),
            ">": lambda: int(a > b), ">=": lambda: int(a >= b),
            "==": lambda: int(a == b), "!=": lambda: int(a != b),
        }[e.op]()
    raise InterpError(f"cannot evaluate {e!r}")


def _field(prog: Program, dtype: str, name: str) -> int:
    return prog.defs.data[dtype].index(name)


def seq_step(st: SeqState, c, prog: Program):
    """One small step of ``c``.  Returns ``(state, rest)`` or :class:`Stuck`.

    The head of ``c`` must not be a barrier call.
    """
    if isinstance(c, Seq):
        if isinstance(c.first, Skip):
            return st, c.second
        r = seq_step(st, c.first, prog)
        if isinstance(r, Stuck):
            return r
        st2, first = r
        return st2, (c.second if isinstance(first, Skip) else Seq(first, c.second, c.line))
    if isinstance(c, Skip):
        return st, c
    store = st.store
    if isinstance(c, Decl):
        return replace(st, store={**store, c.var: 0}), Skip()
    if isinstance(c, Assign):
        return replace(st, store={**store, c.var: eval_expr(c.expr, store)}), Skip()
    if isinstance(c, Load):
        addr = eval_expr(c.ptr, store)
        cell = st.heap.get(addr)
        if cell is None or not sh.is_positive(cell.share):
            return Stuck(f"read-permission at line {c.line}: no share of cell {addr}")
        v = cell.values[_field(prog, c.dtype, c.field)]
        return replace(st, store={**store, c.var: v}), Skip()
    if isinstance(c, Store):
        addr = eval_expr(c.ptr, store)
        cell = st.heap.get(addr)
        if cell is None or cell.share != sh.FULL:
            have = "none" if cell is None else sh.format_share(cell.share)
            return Stuck(f"write-permission at line {c.line}: cell {addr} held with {have}")
        vals = list(cell.values)
        vals[_field(prog, c.dtype, c.field)] = eval_expr(c.expr, store)
        return replace(st, heap={**st.heap, addr: Cell(cell.dtype, tuple(vals), cell.share)}), Skip()
    if isinstance(c, New):
        vals = tuple(eval_expr(a, store) for a in c.args)
        addr = st.brk
        return replace(st, heap={**st.heap, addr: Cell(c.dtype, vals, sh.FULL)},
                       store={**store, c.var: addr}, brk=addr + 1), Skip()
    if isinstance(c, Free):
        addr = eval_expr(c.ptr, store)
        cell = st.heap.get(addr)
        if cell is None or cell.share != sh.FULL:
            return Stuck(f"free-permission at line {c.line}: cell {addr}")
        heap = dict(st.heap)
        del heap[addr]
        return replace(st, heap=heap), Skip()
    if isinstance(c, If):
        return st, (c.then if eval_expr(c.cond, store) else c.orelse)
    if isinstance(c, While):
        return st, If(c.cond, Seq(c.body, c, c.line), Skip(), c.line)
    if isinstance(c, Call):
        callee = prog.procs.get(c.proc)
        if callee is None:
            raise InterpError(f"unknown procedure {c.proc}")
        args = [eval_expr(a, store) for a in c.args]
        inner = dict(zip(callee.param_names, args))
        saved = tuple(sorted(store.items()))
        return replace(st, store=inner), Seq(callee.body, Return(saved), c.line)
    if isinstance(c, Return):
        return replace(st, store=dict(c.saved)), Skip()
    if isinstance(c, BarrierCmd):
        raise InterpError("barrier calls are handled by the concurrent machine")
    raise InterpError(f"cannot execute {c!r}")


def head(c):
    while isinstance(c, Seq):
        if isinstance(c.first, Skip):
            c = c.second
        else:
            c = c.first
    return c


def pop_head(c):
    """``c`` with its leading atomic command removed."""
    if isinstance(c, Seq):
        if isinstance(c.first, Skip):
            return pop_head(c.second)
        rest = pop_head(c.first)
        return c.second if isinstance(rest, Skip) else Seq(rest, c.second, c.line)
    return Skip()


# -- logical evaluation and carving ------------------------------------------------------

class _Unbound(Exception):
    pass


def eval_term(t, env: Dict[str, object]):
    if isinstance(t, Var):
        if t.name not in env:
            raise _Unbound(t.name)
        return env[t.name]
    if isinstance(t, IntLit):
        return t.value
    if isinstance(t, NullLit):
        return 0
    if isinstance(t, ShareLit):
        return t.tree
    if isinstance(t, BinOp):
        a, b = eval_term(t.left, env), eval_term(t.right, env)
        return a + b if t.op == "+" else a - b if t.op == "-" else a * b
    if isinstance(t, MinMax):
        a, b = eval_term(t.left, env), eval_term(t.right, env)
        return max(a, b) if t.op == "max" else min(a, b)
    raise InterpError(f"cannot evaluate {show(t)}")


_CMP = {"=": lambda a, b: a == b, "!=": lambda a, b: a != b, "<": lambda a, b: a < b,
        "<=": lambda a, b: a <= b, ">": lambda a, b: a > b, ">=": lambda a, b: a >= b}


def eval_pure(p, env: Dict[str, object]) -> bool:
    """Truth of a quantifier-free pure formula; unbound variables raise ``_Unbound``."""
    if isinstance(p, BoolConst):
        return p.value
    if isinstance(p, Cmp):
        return _CMP[p.op](eval_term(p.left, env), eval_term(p.right, env))
    if isinstance(p, Conj):
        return all(eval_pure(q, env) for q in p.parts)
    if isinstance(p, Disj):
        return any(eval_pure(q, env) for q in p.parts)
    if isinstance(p, Not):
        return not eval_pure(p.body, env)
    if isinstance(p, ShareEq):
        return eval_term(p.a, env) == eval_term(p.b, env)
    if isinstance(p, ShareJoin):
        return sh.join(eval_term(p.a, env), eval_term(p.b, env)) == eval_term(p.c, env)
    if isinstance(p, ShareBound):
        v = eval_term(p.v, env)
        return sh.leq(p.lo, v) and sh.leq(v, p.hi)
    raise InterpError("quantified pure formulas are not executable")


def _bind(arg, value, env) -> bool:
    if isinstance(arg, Var) and arg.name not in env:
        env[arg.name] = value
        return True
    return False


def carve(d: Disjunct, env: Dict[str, object], heap: Dict[int, Cell],
          bmap: Dict[int, Tuple[int, object]], prog: Program):
    """Take the part of (heap, bmap) described by ``d``.

    Returns ``(env, part_heap, part_bmap, rest_heap, rest_bmap)`` or None.
    Node shares must be constants; arguments bind unbound variables.
    """
    env = {k: v for k, v in env.items() if k not in d.evars}
    heap = dict(heap)
    bmap = dict(bmap)
    deferred = []
    part_h: Dict[int, Cell] = {}
    part_b: Dict[int, Tuple[int, object]] = {}
    for n in d.heap:
        try:
            where = eval_term(n.ptr, env)
            share = eval_term(n.share, env)
        except _Unbound:
            return None
        kind = prog.defs.kind(n.name)
        if kind == "pred":
            raise InterpError("predicate instances cannot be carved concretely")
        if kind == "barrier":
            if where not in bmap:
                return None
            state, held = bmap[where]
            rest = sh.minus(held, share)
            if rest is None or not sh.is_positive(share):
                return None
            if not _bind(n.args[0], state, env):
                deferred.append((n.args[0], state))
            if sh.is_positive(rest):
                bmap[where] = (state, rest)
            else:
                del bmap[where]
            prev = part_b.get(where)
            part_b[where] = (state, share if prev is None else sh.join(prev[1], share))
            continue
        cell = heap.get(where)
        if cell is None or cell.dtype != n.name:
            return None
        rest = sh.minus(cell.share, share)
        if rest is None or not sh.is_positive(share):
            return None
        for arg, val in zip(n.args, cell.values):
            if not _bind(arg, val, env):
                deferred.append((arg, val))
        if sh.is_positive(rest):
            heap[where] = Cell(cell.dtype, cell.values, rest)
        else:
            del heap[where]
        prev = part_h.get(where)
        joined = share if prev is None else sh.join(prev.share, share)
        part_h[where] = Cell(cell.dtype, cell.values, joined)
    try:
        if any(eval_term(a, env) != v for a, v in deferred):
            return None
        if not eval_pure(d.pure, env):
            return None
    except _Unbound:
        return None
    for v in d.evars:
        env.pop(v, None)
    return env, part_h, part_b, heap, bmap


def join_heaps(a: Dict[int, Cell], b: Dict[int, Cell]) -> Optional[Dict[int, Cell]]:
    out = dict(a)
    for k, c in b.items():
        if k in out:
            o = out[k]
            j = sh.join(o.share, c.share)
            if j is None or o.values != c.values or o.dtype != c.dtype:
                return None
            out[k] = Cell(o.dtype, o.values, j)
        else:
            out[k] = c
    return out


def join_bmaps(a, b):
    out = dict(a)
    for k, (s, t) in b.items():
        if k in out:
            s0, t0 = out[k]
            j = sh.join(t0, t)
            if j is None or s0 != s:
                return None
            out[k] = (s, j)
        else:
            out[k] = (s, t)
    return out


# -- the concurrent machine ------------------------------------------------------------------

@dataclass(frozen=True)
class Running:
    cmd: object


@dataclass(frozen=True)
class Waiting:
    bid: int
    direction: int
    move: int
    cmd: object


@dataclass
class Thread:
    tid: int
    store: Dict[str, int]
    heap: Dict[int, Cell]
    bmap: Dict[int, Tuple[int, object]]
    ctl: object
    done: bool = False


@dataclass
class Slot:
    tid: int
    move: int
    heap: Dict[int, Cell]
    bmap: Dict[int, Tuple[int, object]]


@dataclass
class BarrierStatus:
    name: str
    limit: int
    direction: Optional[int] = None
    slots: List[Slot] = field(default_factory=list)
    env: Dict[str, object] = field(default_factory=dict)


@dataclass
class ConcState:
    threads: List[Thread]
    barpool: Dict[int, BarrierStatus]
    brk: int
    parked: Dict[int, Cell] = field(default_factory=dict)
    parked_b: Dict[int, Tuple[int, object]] = field(default_factory=dict)

    def clone(self) -> "ConcState":
        # commands and cells are immutable, so copying the containers suffices
        threads = [replace(t, store=dict(t.store), heap=dict(t.heap), bmap=dict(t.bmap))
                   for t in self.threads]
        pool = {b: replace(st, slots=[replace(x, heap=dict(x.heap), bmap=dict(x.bmap))
                                      for x in st.slots], env=dict(st.env))
                for b, st in self.barpool.items()}
        return ConcState(threads, pool, self.brk, dict(self.parked), dict(self.parked_b))


SCHEDULE_EXHAUSTED = "schedule exhausted"


@dataclass(frozen=True)
class Done:
    reason: str = "all threads finished"


def runnable(cs: ConcState) -> List[int]:
    return [t.tid for t in cs.threads if not t.done and isinstance(t.ctl, Running)]


def ready_barrier(cs: ConcState) -> Optional[int]:
    for bid, st in sorted(cs.barpool.items()):
        if st.slots and len(st.slots) == st.limit:
            return bid
    return None


def _barrier_def(prog: Program, name: str):
    return prog.defs.barriers[name]


def fill_barrier_slot(cs: ConcState, th: Thread, bid: int, prog: Program):
    """Carve a move precondition out of ``th`` into the waitpool of ``bid``."""
    status = cs.barpool[bid]
    bdef = _barrier_def(prog, status.name)
    if bid not in th.bmap:
        return Stuck(f"thread {th.tid} holds no share of barrier {status.name}", th.tid)
    state = th.bmap[bid][0]
    dirs = [t for t in bdef.transitions if t.src == state]
    taken = {s.move for s in status.slots}
    base_env = {"self": bid, **{p: th.store[p] for p in bdef.params if p in th.store}}
    for di, t in enumerate(dirs):
        if status.direction is not None and di != status.direction:
            continue
        for mv, (pre, _) in enumerate(t.specs):
            if mv in taken:
                continue
            for d in pre.disjuncts:
                got = carve(d, {**status.env, **base_env}, th.heap, th.bmap, prog)
                if got is None:
                    continue
                env, ph, pb, rh, rb = got
                return di, mv, env, ph, pb, rh, rb
    if status.direction is not None:
        return Stuck(f"thread {th.tid} cannot take any free move of direction "
                     f"{status.direction} at barrier {status.name}", th.tid)
    return Stuck(f"thread {th.tid} satisfies no move of {status.name} from state {state}", th.tid)


def bp_transition(cs: ConcState, bid: int, prog: Program):
    """Re-divide the pooled state of a full waitpool among its threads."""
    status = cs.barpool[bid]
    bdef = _barrier_def(prog, status.name)
    pooled_h: Dict[int, Cell] = {}
    pooled_b: Dict[int, Tuple[int, object]] = {}
    for s in status.slots:
        pooled_h = join_heaps(pooled_h, s.heap)
        pooled_b = join_bmaps(pooled_b, s.bmap)
        if pooled_h is None or pooled_b is None:
            return Stuck(f"inconsistent waitpool at barrier {status.name}")
    state = pooled_b.get(bid, (None, None))[0]
    if pooled_b.get(bid, (None, sh.EMPTY))[1] != sh.FULL:
        return Stuck(f"waitpool of {status.name} does not hold the full barrier")
    t = [x for x in bdef.transitions if x.src == state][status.direction]
    pooled_b[bid] = (t.dst, sh.FULL)
    env = dict(status.env)
    handouts = {}
    for s in sorted(status.slots, key=lambda s: s.move):
        th = cs.threads[s.tid]
        base = {"self": bid, **{p: th.store[p] for p in bdef.params if p in th.store}}
        post = t.specs[s.move][1]
        got = None
        for d in post.disjuncts:
            got = carve(d, {**env, **base}, pooled_h, pooled_b, prog)
            if got is not None:
                break
        if got is None:
            return Stuck(f"postcondition of move {s.move + 1} ({t.src}->{t.dst}) "
                         f"cannot be carved from the pooled state")
        env2, ph, pb, pooled_h, pooled_b = got
        env.update({k: v for k, v in env2.items() if k not in base})
        handouts[s.tid] = (ph, pb)
    if pooled_h or pooled_b:
        return Stuck(f"barrier {status.name} leaves unclaimed resources")
    return t.dst, handouts


def conc_step(cs: ConcState, tid: Optional[int], prog: Program):
    """Advance ``cs`` in place.  Returns (rule, tid, cmd text) or Stuck/Done."""
    bid = ready_barrier(cs)
    if bid is not None:
        status = cs.barpool[bid]
        r = bp_transition(cs, bid, prog)
        if isinstance(r, Stuck):
            return r
        ns, handouts = r
        for tid2, (ph, pb) in handouts.items():
            th = cs.threads[tid2]
            th.heap = join_heaps(th.heap, ph)
            th.bmap = join_bmaps(th.bmap, pb)
            if th.heap is None or th.bmap is None:
                return Stuck(f"released state clashes with thread {tid2}", tid2)
            th.ctl = Running(th.ctl.cmd)
        for th in cs.threads:
            if bid in th.bmap:
                th.bmap[bid] = (ns, th.bmap[bid][1])
        cs.barpool[bid] = BarrierStatus(status.name, status.limit)
        return ("Release", None, f"barrier {status.name} -> {ns}")
    if tid is None:
        if all(t.done for t in cs.threads):
            return Done()
        if not runnable(cs):
            return Stuck("deadlock: every live thread waits at a barrier")
        return Done(SCHEDULE_EXHAUSTED)
    th = cs.threads[tid]
    if th.done or not isinstance(th.ctl, Running):
        return Stuck(f"thread {tid} is not runnable", tid)
    cmd = th.ctl.cmd
    if isinstance(cmd, Skip):
        th.done = True
        return ("Exit", tid, "exit")
    h = head(cmd)
    if isinstance(h, BarrierCmd):
        if h.var not in th.store:
            return Stuck(f"unbound barrier variable {h.var}", tid)
        bid = th.store[h.var]
        if bid not in cs.barpool:
            return Stuck(f"{h.var} does not name a barrier", tid)
        r = fill_barrier_slot(cs, th, bid, prog)
        if isinstance(r, Stuck):
            return r
        di, mv, env, ph, pb, rh, rb = r
        status = cs.barpool[bid]
        status.direction = di
        status.env = {k: v for k, v in env.items()
                      if k != "self" and k not in _barrier_def(prog, status.name).params}
        status.slots.append(Slot(tid, mv, ph, pb))
        th.heap, th.bmap = rh, rb
        th.ctl = Waiting(bid, di, mv, pop_head(cmd))
        return ("Suspend", tid, f"barrier {h.var} (move {mv + 1})")
    st = SeqState(th.store, th.heap, th.bmap, cs.brk)
    r = seq_step(st, cmd, prog)
    if isinstance(r, Stuck):
        return Stuck(r.reason, tid)
    st2, rest = r
    th.store, th.heap, th.bmap = st2.store, st2.heap, st2.bmap
    cs.brk = st2.brk
    th.ctl = Running(rest)
    return ("Seq", tid, show_cmd(h))


def global_join(cs: ConcState):
    """Join of every thread, slot and parked state; None if inconsistent."""
    heap, bmap = dict(cs.parked), dict(cs.parked_b)
    parts = [(t.heap, t.bmap) for t in cs.threads]
    parts += [(s.heap, s.bmap) for st in cs.barpool.values() for s in st.slots]
    for h, b in parts:
        heap = join_heaps(heap, h)
        bmap = join_bmaps(bmap, b) if heap is not None else None
        if heap is None or bmap is None:
            return None
    return heap, bmap


def consistent(cs: ConcState) -> Optional[str]:
    g = global_join(cs)
    if g is None:
        return "thread states do not join"
    heap, bmap = g
    for a, c in heap.items():
        if c.share != sh.FULL:
            return f"cell {a} is only partly owned ({sh.format_share(c.share)})"
        if a >= cs.brk:
            return f"cell {a} lies beyond the break"
    for b, (_, t) in bmap.items():
        if t != sh.FULL:
            return f"barrier {b} is only partly owned"
    return None


# -- initial state -----------------------------------------------------------------------------

def initial_state(prog: Program) -> ConcState:
    """Build the machine from the par directive.

    Cells named in the setup formula are allocated in order; arguments
    that are not literals are read from simple equalities in the pure part
    and default to 0.
    """
    par = prog.par
    if par is None:
        raise InterpError("program has no par directive")
    d = par.requires.disjuncts[0]
    env: Dict[str, object] = {}
    heap: Dict[int, Cell] = {}
    bmap: Dict[int, Tuple[int, object]] = {}
    barpool: Dict[int, BarrierStatus] = {}
    next_addr, next_bid = 1, 1
    eqs = _simple_eqs(d.pure)
    for n in d.heap:
        if not isinstance(n.ptr, Var):
            raise InterpError("setup nodes must be named by variables")
        kind = prog.defs.kind(n.name)
        share = eval_term(n.share, {})
        vals = []
        for a in n.args:
            try:
                vals.append(eval_term(a, {**eqs, **env}))
            except _Unbound:
                vals.append(0)
        if kind == "barrier":
            if n.ptr.name not in env:
                env[n.ptr.name] = next_bid
                bdef = prog.defs.barriers[n.name]
                barpool[next_bid] = BarrierStatus(n.name, bdef.count)
                next_bid += 1
            bmap = join_bmaps(bmap, {env[n.ptr.name]: (vals[0], share)})
        elif kind == "data":
            if n.ptr.name not in env:
                env[n.ptr.name] = next_addr
                next_addr += 1
            heap = join_heaps(heap, {env[n.ptr.name]: Cell(n.name, tuple(vals), share)})
        else:
            raise InterpError("predicates cannot appear in the setup formula")
        if heap is None or bmap is None:
            raise InterpError("setup formula is inconsistent")
    threads = []
    for tid, (pname, args) in enumerate(par.threads):
        callee = prog.procs[pname]
        store = {pn: env[a] for pn, a in zip(callee.param_names, args)}
        base = dict(store)
        got = None
        for dd in callee.requires.disjuncts:
            got = carve(dd, base, heap, bmap, prog)
            if got is not None:
                break
        if got is None:
            raise InterpError(f"setup state does not satisfy the precondition of {pname}")
        _, ph, pb, heap, bmap = got
        threads.append(Thread(tid, store, ph, pb, Running(callee.body)))
    return ConcState(threads, barpool, next_addr, heap, bmap)


def _simple_eqs(p) -> Dict[str, int]:
    out = {}
    parts = p.parts if isinstance(p, Conj) else (p,)
    for c in parts:
        if isinstance(c, Cmp) and c.op == "=" and isinstance(c.left, Var) \
                and isinstance(c.right, IntLit):
            out[c.left.name] = c.right.value
    return out


# -- schedules and runs ----------------------------------------------------------------------------

class Scheduler:
    """Chooses the next thread among the runnable ones."""

    def __init__(self, kind: str = "rr", seed: int = 0, order: Iterable[int] = ()):
        if kind not in ("rr", "rand", "list"):
            raise ValueError(f"unknown schedule {kind}")
        self.kind = kind
        self.rng = random.Random(seed)
        self.order = list(order)
        self.pos = 0
        self.last = -1

    def pick(self, cs: ConcState) -> Optional[int]:
        ready = runnable(cs)
        if not ready:
            return None
        if self.kind == "rand":
            return self.rng.choice(ready)
        if self.kind == "list":
            while self.pos < len(self.order):
                t = self.order[self.pos]
                self.pos += 1
                if t in ready:
                    return t
            return None
        n = len(cs.threads)
        for k in range(1, n + 1):
            t = (self.last + k) % n
            if t in ready:
                self.last = t
                return t
        return None


@dataclass
class TraceStep:
    rule: str
    tid: Optional[int]
    cmd: str
    before: Optional[ConcState] = None
    after: Optional[ConcState] = None

    def line(self) -> str:
        who = "-" if self.tid is None else str(self.tid)
        return f"{who} {self.rule} {self.cmd}"


@dataclass
class RunResult:
    outcome: str                    # "Done", "Stuck" or "Cap" (step cap or schedule ran out)
    steps: List[TraceStep]
    final: ConcState
    reason: str = ""

    def memory(self) -> Dict[int, tuple]:
        g = global_join(self.final)
        heap = g[0] if g else {}
        return {a: c.values for a, c in sorted(heap.items())}


def run(cs: ConcState, prog: Program, sched: Scheduler, cap: int = 100_000,
        keep_states: bool = False, check: bool = True) -> RunResult:
    cs = cs.clone()
    steps: List[TraceStep] = []
    for _ in range(cap):
        before = cs.clone() if keep_states else None
        tid = None if ready_barrier(cs) is not None else sched.pick(cs)
        r = conc_step(cs, tid, prog)
        if isinstance(r, Done):
            if r.reason == SCHEDULE_EXHAUSTED:
                return RunResult("Cap", steps, cs, r.reason)
            return RunResult("Done", steps, cs, r.reason)
        if isinstance(r, Stuck):
            who = "" if r.tid is None else f"thread {r.tid}: "
            return RunResult("Stuck", steps, cs, who + r.reason)
        rule, t, text = r
        steps.append(TraceStep(rule, t, text, before, cs.clone() if keep_states else None))
        if check:
            bad = consistent(cs)
            if bad:
                return RunResult("Stuck", steps, cs, f"global consistency: {bad}")
    return RunResult("Cap", steps, cs, f"step cap {cap} reached")


# -- erasure -------------------------------------------------------------------------------------

@dataclass(frozen=True)
class EWaiting:
    bid: int
    cmd: object


@dataclass
class ErasedState:
    brk: int
    memory: Dict[int, tuple]
    barriers: Dict[int, Tuple[int, int]]
    threads: List[Tuple[Dict[str, int], object, bool]]

    def key(self):
        return (self.brk, tuple(sorted(self.memory.items())), tuple(sorted(self.barriers.items())),
                tuple((tuple(sorted(s.items())), c, d) for s, c, d in self.threads))

    def __eq__(self, other):
        return isinstance(other, ErasedState) and self.key() == other.key()


def erase(x) -> ErasedState:
    if isinstance(x, SeqState):
        return ErasedState(x.brk, {a: c.values for a, c in x.heap.items()}, {},
                           [(dict(x.store), Running(Skip()), False)])
    mem: Dict[int, tuple] = {}
    g = global_join(x)
    if g is None:
        parts = [x.parked] + [t.heap for t in x.threads] + \
                [s.heap for st in x.barpool.values() for s in st.slots]
        for h in parts:
            for a, c in h.items():
                mem[a] = c.values
    else:
        mem = {a: c.values for a, c in g[0].items()}
    bars = {b: (len(st.slots), st.limit) for b, st in x.barpool.items()}
    threads = []
    for t in x.threads:
        ctl = EWaiting(t.ctl.bid, t.ctl.cmd) if isinstance(t.ctl, Waiting) else t.ctl
        threads.append((dict(t.store), ctl, t.done))
    return ErasedState(x.brk, mem, bars, threads)


def erased_step(es: ErasedState, rule: str, tid: Optional[int], prog: Program) -> ErasedState:
    """The erased machine's step for the unerased rule fired by ``tid``."""
    es = ErasedState(es.brk, dict(es.memory), dict(es.barriers),
                     [(dict(st), c, d) for st, c, d in es.threads])
    if rule == "Release":
        for bid, (cnt, lim) in es.barriers.items():
            if cnt == lim and cnt > 0:
                es.barriers[bid] = (0, lim)
                for i, (store, ctl, done) in enumerate(es.threads):
                    if isinstance(ctl, EWaiting) and ctl.bid == bid:
                        es.threads[i] = (store, Running(ctl.cmd), done)
                return es
        raise InterpError("erased release with no full barrier")
    store, ctl, done = es.threads[tid]
    cmd = ctl.cmd
    if rule == "Exit":
        es.threads[tid] = (store, ctl, True)
        return es
    h = head(cmd)
    if rule == "Suspend":
        bid = store[h.var]
        cnt, lim = es.barriers[bid]
        es.barriers[bid] = (cnt + 1, lim)
        es.threads[tid] = (store, EWaiting(bid, pop_head(cmd)), done)
        return es
    # plain sequential step on a total memory; missing cells read as 0
    heap = {a: Cell("?", v, sh.FULL) for a, v in es.memory.items()}
    st = SeqState(store, _TotalHeap(heap, prog, h), {}, es.brk)
    r = seq_step(st, cmd, prog)
    if isinstance(r, Stuck):
        raise InterpError(f"erased machine cannot step: {r.reason}")
    st2, rest = r
    es.memory = {a: c.values for a, c in st2.heap.items()}
    es.brk = st2.brk
    es.threads[tid] = (st2.store, Running(rest), done)
    return es


class _TotalHeap(dict):
    """Every address is readable and writable; unowned cells hold zeros."""

    def __init__(self, heap, prog, h):
        super().__init__(heap)
        self._prog = prog
        self._h = h

    def get(self, addr, default=None):
        if addr in self:
            return self[addr]
        h = self._h
        if isinstance(h, (Load, Store)):
            n = len(self._prog.defs.data[h.dtype].fields)
            return Cell(h.dtype, (0,) * n, sh.FULL)
        return default


@dataclass
class CommuteResult:
    ok: bool
    steps: int
    first_bad: Optional[int] = None
    detail: str = ""


def check_erasure_commute(cs: ConcState, prog: Program, sched: Scheduler, cap: int = 100_000,
                          stepper: Callable = erased_step) -> CommuteResult:
    """Replay a run and compare each step with the erased machine."""
    res = run(cs, prog, sched, cap, keep_states=True)
    for i, s in enumerate(res.steps):
        want = erase(s.after)
        try:
            got = stepper(erase(s.before), s.rule, s.tid, prog)
        except InterpError as exc:
            return CommuteResult(False, len(res.steps), i, str(exc))
        if got != want:
            return CommuteResult(False, len(res.steps), i, f"step {i} ({s.line()}) diverges")
    return CommuteResult(True, len(res.steps))
