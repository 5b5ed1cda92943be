"""Equational solver over positive tree shares.

Formulas are built from ``Join``, ``VarEq``, ``ConstEq`` and ``Bounded``
atoms with ``And``/``Or``/``Exists``.  Variables are strings and constants
are share trees (see :mod:`barrierlogic.shares`).  Every variable denotes a
strictly positive share.

The solver works on one DNF disjunct at a time by domain propagation: each
variable carries an interval ``(lo, hi)`` that is narrowed until a fixpoint
is reached or an inconsistency shows up.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Tuple, Union

from . import shares as sh
from .shares import EMPTY, FULL, Tree

Term = Union[str, bool, tuple]

DNF_CAP = 4096
REFINE_CAP = 10_000
EXPANSION_CAP = 256


class ResourceLimit(RuntimeError):
    """A configured search or size cap was exceeded."""


def is_var(t) -> bool:
    return isinstance(t, str)


# -- formulas --------------------------------------------------------------

@dataclass(frozen=True)
class Join:
    a: Term
    b: Term
    c: Term


@dataclass(frozen=True)
class VarEq:
    a: str
    b: str


@dataclass(frozen=True)
class ConstEq:
    v: Term
    value: Tree


@dataclass(frozen=True)
class Bounded:
    v: Term
    lo: Tree
    hi: Tree


@dataclass(frozen=True)
class And:
    parts: tuple

    def __init__(self, *parts):
        object.__setattr__(self, "parts", tuple(parts))


@dataclass(frozen=True)
class Or:
    parts: tuple

    def __init__(self, *parts):
        object.__setattr__(self, "parts", tuple(parts))


@dataclass(frozen=True)
class Exists:
    vars: tuple
    body: object

    def __init__(self, vars, body):
        if isinstance(vars, str):
            vars = (vars,)
        object.__setattr__(self, "vars", tuple(vars))
        object.__setattr__(self, "body", body)


TRUE = And()
FALSE = Or()

_fresh = itertools.count(1)


def fresh(base: str) -> str:
    return f"{base.split('~')[0]}~{next(_fresh)}"


def free_vars(f) -> set:
    if isinstance(f, Join):
        return {t for t in (f.a, f.b, f.c) if is_var(t)}
    if isinstance(f, VarEq):
        return {f.a, f.b}
    if isinstance(f, (ConstEq, Bounded)):
        return {f.v} if is_var(f.v) else set()
    if isinstance(f, (And, Or)):
        out = set()
        for p in f.parts:
            out |= free_vars(p)
        return out
    if isinstance(f, Exists):
        return free_vars(f.body) - set(f.vars)
    raise TypeError(f"not a share formula: {f!r}")


def subst(f, m: dict):
    """Replace free variables by variables or constants."""
    def t(x):
        return m.get(x, x) if is_var(x) else x

    if isinstance(f, Join):
        return Join(t(f.a), t(f.b), t(f.c))
    if isinstance(f, VarEq):
        a, b = t(f.a), t(f.b)
        if is_var(a) and is_var(b):
            return VarEq(a, b)
        if is_var(a):
            return ConstEq(a, b)
        if is_var(b):
            return ConstEq(b, a)
        return TRUE if a == b else FALSE
    if isinstance(f, ConstEq):
        v = t(f.v)
        if is_var(v):
            return ConstEq(v, f.value)
        return TRUE if v == f.value else FALSE
    if isinstance(f, Bounded):
        return Bounded(t(f.v), f.lo, f.hi)
    if isinstance(f, And):
        return And(*(subst(p, m) for p in f.parts))
    if isinstance(f, Or):
        return Or(*(subst(p, m) for p in f.parts))
    if isinstance(f, Exists):
        inner = {k: v for k, v in m.items() if k not in f.vars}
        clash = {x for v in inner.values() if is_var(v) for x in [v]}
        ren = {v: fresh(v) for v in f.vars if v in clash}
        body = subst(f.body, ren) if ren else f.body
        return Exists(tuple(ren.get(v, v) for v in f.vars), subst(body, inner))
    raise TypeError(f"not a share formula: {f!r}")


# -- systems -----------------------------------------------------------------

@dataclass(frozen=True)
class ShareSystem:
    equations: tuple            # Join / ConstEq / Bounded
    aliases: tuple = ()         # pairs of variables known equal
    variables: frozenset = frozenset()


def to_dnf(f, cap: int = DNF_CAP) -> List[ShareSystem]:
    raw = _dnf(f, cap)
    out = []
    for eqs, als in raw:
        vs = set()
        for e in eqs:
            vs |= free_vars(e)
        for a, b in als:
            vs |= {a, b}
        out.append(ShareSystem(tuple(eqs), tuple(als), frozenset(vs)))
    return out


def _dnf(f, cap):
    if isinstance(f, (Join, ConstEq, Bounded)):
        return [([f], [])]
    if isinstance(f, VarEq):
        return [([], [(f.a, f.b)])]
    if isinstance(f, Exists):
        ren = {v: fresh(v) for v in f.vars}
        return _dnf(subst(f.body, ren), cap)
    if isinstance(f, Or):
        out = []
        for p in f.parts:
            out.extend(_dnf(p, cap))
            if len(out) > cap:
                raise ResourceLimit(f"share DNF exceeds {cap} disjuncts")
        return out
    if isinstance(f, And):
        acc = [([], [])]
        for p in f.parts:
            sub = _dnf(p, cap)
            acc = [(e1 + e2, a1 + a2) for e1, a1 in acc for e2, a2 in sub]
            if len(acc) > cap:
                raise ResourceLimit(f"share DNF exceeds {cap} disjuncts")
        return acc
    raise TypeError(f"not a share formula: {f!r}")


@dataclass
class SolveResult:
    unsat: bool
    domains: Dict[str, Tuple[Tree, Tree]] = field(default_factory=dict)

    @property
    def precise(self) -> bool:
        return not self.unsat and all(lo == hi for lo, hi in self.domains.values())

    def value(self, v: str) -> Optional[Tree]:
        d = self.domains.get(v)
        if d is None or d[0] != d[1]:
            return None
        return d[0]

    def assignment(self) -> Dict[str, Tree]:
        return {v: lo for v, (lo, hi) in self.domains.items() if lo == hi}


UNSAT = SolveResult(True)


class _Unsat(Exception):
    pass


def _union_find(pairs, variables):
    parent = {v: v for v in variables}

    def find(x):
        parent.setdefault(x, x)
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in pairs:
        ra, rb = find(a), find(b)
        if ra != rb:
            # keep the lexically smaller name as representative
            if rb < ra:
                ra, rb = rb, ra
            parent[rb] = ra
    return {v: find(v) for v in list(parent)}


def solve(system: ShareSystem, cap: int = REFINE_CAP) -> SolveResult:
    rep = _union_find(system.aliases, system.variables)

    def r(t):
        return rep.get(t, t) if is_var(t) else t

    joins: List[tuple] = []
    bounds: List[tuple] = []
    consts: List[tuple] = []
    for e in system.equations:
        if isinstance(e, Join):
            joins.append((r(e.a), r(e.b), r(e.c)))
        elif isinstance(e, ConstEq):
            consts.append((r(e.v), e.value))
        elif isinstance(e, Bounded):
            bounds.append((r(e.v), e.lo, e.hi))
        else:
            raise TypeError(f"unexpected equation {e!r}")
    try:
        domains = _solve(joins, bounds, consts, {r(v) for v in system.variables}, cap)
    except _Unsat:
        return UNSAT
    return SolveResult(False, {v: domains[rep[v]] for v in system.variables})


def _solve(joins, bounds, consts, variables, cap):
    assign: Dict[str, Tree] = {}

    def fix(v, value):
        if value is EMPTY:
            raise _Unsat
        old = assign.get(v)
        if old is not None and old != value:
            raise _Unsat
        assign[v] = value

    def val(t):
        return assign.get(t, t) if is_var(t) else t

    # (1) constant equations
    for v, value in consts:
        if is_var(v):
            fix(v, value)
        elif v != value:
            raise _Unsat

    # (2) joins with a single variable occurrence
    changed = True
    while changed:
        changed = False
        for j in joins:
            a, b, c = map(val, j)
            vs = [t for t in (a, b, c) if is_var(t)]
            if len(vs) != 1:
                continue
            if is_var(c):
                s = sh.join(a, b)
                if s is None:
                    raise _Unsat
                fix(c, s)
            else:
                known = b if is_var(a) else a
                m = sh.minus(c, known)
                if m is None:
                    raise _Unsat
                fix(vs[0], m)
            changed = True

    # (3) constant-only constraints
    for j in joins:
        a, b, c = map(val, j)
        if not any(is_var(t) for t in (a, b, c)) and sh.join(a, b) != c:
            raise _Unsat
    for v, lo, hi in bounds:
        x = val(v)
        if not is_var(x) and not (sh.leq(lo, x) and sh.leq(x, hi)):
            raise _Unsat

    # (4) sums obtained by expanding definitions
    _closure_check([tuple(map(val, j)) for j in joins])

    # (5) + (6) domains
    dom: Dict[str, Tuple[Tree, Tree]] = {}
    for v in variables:
        dom[v] = (assign[v], assign[v]) if v in assign else (EMPTY, FULL)
    for v, lo, hi in bounds:
        if is_var(v) and v not in assign:
            l0, h0 = dom[v]
            dom[v] = (sh.t_or(l0, lo), sh.t_and(h0, hi))
            _check_domain(dom[v])

    # (7) propagation to a fixpoint
    def d(t):
        return dom[t] if is_var(t) else (t, t)

    watch: Dict[str, List[int]] = {}
    for i, j in enumerate(joins):
        for t in j:
            if is_var(t):
                watch.setdefault(t, []).append(i)
    queue = deque(range(len(joins)))
    queued = set(queue)
    refinements = 0

    def update(t, lo, hi):
        nonlocal refinements
        if not is_var(t):
            return
        if (lo, hi) == dom[t]:
            return
        _check_domain((lo, hi))
        refinements += 1
        if refinements > cap:
            raise ResourceLimit(f"share propagation exceeded {cap} refinements")
        dom[t] = (lo, hi)
        for k in watch.get(t, ()):
            if k not in queued:
                queued.add(k)
                queue.append(k)

    while queue:
        i = queue.popleft()
        queued.discard(i)
        a, b, c = joins[i]
        if is_var(a) and a == b:
            raise _Unsat
        (la, ha), (lb, hb), (lc, hc) = d(a), d(b), d(c)
        low_sum = sh.join(la, lb)
        if low_sum is None or not sh.leq(low_sum, hc):
            raise _Unsat
        if not sh.leq(lc, sh.t_or(ha, hb)):
            raise _Unsat
        # forward
        update(c, sh.t_or(lc, low_sum), sh.t_and(hc, sh.t_or(ha, hb)))
        (lc, hc) = d(c)
        # backward
        for x, y in ((a, b), (b, a)):
            lx, hx = d(x)
            ly, hy = d(y)
            nlo = lx
            if ly == hy:
                nlo = sh.t_or(lx, sh.t_andnot(lc, ly))
            update(x, nlo, sh.t_and(hx, hc))
    return dom


def _check_domain(d):
    lo, hi = d
    if hi is EMPTY or not sh.leq(lo, hi):
        raise _Unsat


def _closure_check(joins):
    defs: Dict[str, List[tuple]] = {}
    for a, b, c in joins:
        if is_var(c):
            defs.setdefault(c, []).append((a, b))
    seen = 0
    for a, b, c in joins:
        if not any(is_var(t) for t in (a, b, c)):
            continue
        stack = [((a, b), frozenset([c]) if is_var(c) else frozenset())]
        while stack:
            atoms, used = stack.pop()
            seen += 1
            if seen > EXPANSION_CAP:
                return
            _check_fact(atoms, c)
            for k, x in enumerate(atoms):
                if is_var(x) and x in defs and x not in used:
                    for pair in defs[x]:
                        rest = atoms[:k] + atoms[k + 1:]
                        stack.append((rest + pair, used | {x}))


def _check_fact(atoms, rhs):
    vs = [x for x in atoms if is_var(x)]
    if len(set(vs)) != len(vs):
        raise _Unsat
    cs = [x for x in atoms if not is_var(x)]
    total: Optional[Tree] = EMPTY
    for x in cs:
        total = sh.join(total, x)
        if total is None:
            raise _Unsat
    if is_var(rhs):
        if rhs in vs and (len(vs) > 1 or total is not EMPTY):
            raise _Unsat
        return
    if not sh.leq(total, rhs):
        raise _Unsat
    if vs and total == rhs:
        raise _Unsat


# -- evaluation (used to double-check precise answers) ----------------------

def holds(f, env: Dict[str, Tree], universe: Optional[Iterable[Tree]] = None) -> bool:
    """Evaluate ``f`` under ``env``; existentials range over ``universe``."""
    def t(x):
        return env[x] if is_var(x) else x

    if isinstance(f, Join):
        return sh.join(t(f.a), t(f.b)) == t(f.c)
    if isinstance(f, VarEq):
        return t(f.a) == t(f.b)
    if isinstance(f, ConstEq):
        return t(f.v) == f.value
    if isinstance(f, Bounded):
        x = t(f.v)
        return sh.leq(f.lo, x) and sh.leq(x, f.hi)
    if isinstance(f, And):
        return all(holds(p, env, universe) for p in f.parts)
    if isinstance(f, Or):
        return any(holds(p, env, universe) for p in f.parts)
    if isinstance(f, Exists):
        if universe is None:
            raise ValueError("existential needs a finite universe")
        uni = list(universe)
        for vals in itertools.product(uni, repeat=len(f.vars)):
            if holds(f.body, {**env, **dict(zip(f.vars, vals))}, uni):
                return True
        return False
    raise TypeError(f"not a share formula: {f!r}")


def system_holds(s: ShareSystem, env: Dict[str, Tree]) -> bool:
    return all(a in env and b in env and env[a] == env[b] for a, b in s.aliases) and all(
        holds(e, env) for e in s.equations)


# -- queries -----------------------------------------------------------------

def query_unsat(f) -> bool:
    return all(solve(s).unsat for s in to_dnf(f))


def query_exists_elim(f, v: str) -> Optional[Tree]:
    if isinstance(f, Exists) and v in f.vars:
        rest = tuple(x for x in f.vars if x != v)
        f = Exists(rest, f.body) if rest else f.body
    found: Optional[Tree] = None
    for s in to_dnf(f):
        res = solve(s)
        if res.unsat:
            continue
        x = res.value(v)
        if x is None or (found is not None and x != found):
            return None
        found = x
    return found


def query_impl(ante, cons) -> bool:
    """Sound check that ``ante`` entails ``cons``.

    Each satisfiable antecedent system must pin down every free variable of
    the consequent; the consequent, instantiated with those values, must then
    solve precisely to a verified witness.
    """
    for s in to_dnf(ante):
        res = solve(s)
        if res.unsat:
            continue
        rep, known = _saturate(s)
        c = _drop_known(subst(cons, rep), known)
        env = {}
        for v in free_vars(c):
            x = res.value(v)
            if x is None:
                return False
            env[v] = x
        if not _witnessed(subst(c, env)):
            return False
    return True


def _saturate(s: ShareSystem):
    """Variable aliases implied by functionality and cancellativity of join.

    Returns the alias map and the hypothesis joins rewritten with it (both
    argument orders).
    """
    rep = _union_find(s.aliases, s.variables)
    joins = [e for e in s.equations if isinstance(e, Join)]
    while True:
        def r(t):
            return rep.get(t, t) if is_var(t) else t
        norm = {(r(j.a), r(j.b), r(j.c)) for j in joins}
        norm |= {(b, a, c) for a, b, c in norm}
        extra = []
        for (a1, b1, c1), (a2, b2, c2) in itertools.combinations(sorted(norm, key=repr), 2):
            if a1 == a2 and b1 == b2 and c1 != c2:
                extra.append((c1, c2))
            elif a1 == a2 and c1 == c2 and b1 != b2:
                extra.append((b1, b2))
        extra = [(x, y) for x, y in extra if is_var(x) and is_var(y)]
        if not extra:
            known = {Join(a, b, c) for a, b, c in norm}
            return {v: t for v, t in rep.items() if v != t}, known
        rep = _union_find(list(rep.items()) + extra, set(rep))


def _drop_known(f, known):
    if isinstance(f, VarEq) and f.a == f.b:
        return TRUE
    if isinstance(f, Join) and f in known:
        return TRUE
    if isinstance(f, And):
        return And(*(_drop_known(p, known) for p in f.parts))
    if isinstance(f, Or):
        parts = tuple(_drop_known(p, known) for p in f.parts)
        return TRUE if TRUE in parts else Or(*parts)
    if isinstance(f, Exists):
        return Exists(f.vars, _drop_known(f.body, known))
    return f


def _witnessed(f) -> bool:
    for s in to_dnf(f):
        res = solve(s)
        if res.unsat or not res.precise:
            continue
        if system_holds(s, res.assignment()):
            return True
    return False
