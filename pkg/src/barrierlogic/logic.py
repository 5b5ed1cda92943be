"""Assertion language: terms, pure formulas, heap nodes and definitions.

Heap formulas are kept as sorted tuples of :class:`Node` so that ``*`` is
associative and commutative by construction.  Pointers and integers share
one sort at the solver level (``null`` is 0); shares have their own sort.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, List, Optional, Tuple, Union

from . import shares as sh


class SortError(ValueError):
    pass


# -- terms --------------------------------------------------------------------

@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class IntLit:
    value: int


@dataclass(frozen=True)
class NullLit:
    pass


@dataclass(frozen=True)
class BinOp:
    op: str          # '+', '-', '*'
    left: object
    right: object


@dataclass(frozen=True)
class MinMax:
    op: str          # 'max' or 'min'
    left: object
    right: object


@dataclass(frozen=True)
class ShareLit:
    tree: object


NULL = NullLit()
FULL_SHARE = ShareLit(sh.FULL)


# -- pure formulas -------------------------------------------------------------

@dataclass(frozen=True)
class BoolConst:
    value: bool


@dataclass(frozen=True)
class Cmp:
    op: str          # = != < <= > >=
    left: object
    right: object


@dataclass(frozen=True)
class ShareJoin:
    a: object
    b: object
    c: object


@dataclass(frozen=True)
class ShareEq:
    a: object
    b: object


@dataclass(frozen=True)
class ShareBound:
    v: object
    lo: object       # tree
    hi: object


@dataclass(frozen=True)
class Conj:
    parts: tuple


@dataclass(frozen=True)
class Disj:
    parts: tuple


@dataclass(frozen=True)
class Not:
    body: object


@dataclass(frozen=True)
class Exists:
    vars: tuple
    body: object


@dataclass(frozen=True)
class Forall:
    vars: tuple
    body: object


TRUE = BoolConst(True)
FALSE = BoolConst(False)

SHARE_ATOMS = (ShareJoin, ShareEq, ShareBound)


def conj(*ps):
    out = []
    for p in ps:
        if isinstance(p, Conj):
            out.extend(p.parts)
        elif p == TRUE:
            continue
        elif p == FALSE:
            return FALSE
        else:
            out.append(p)
    uniq = list(dict.fromkeys(out))
    if not uniq:
        return TRUE
    if len(uniq) == 1:
        return uniq[0]
    return Conj(tuple(uniq))


def disj(*ps):
    out = []
    for p in ps:
        if isinstance(p, Disj):
            out.extend(p.parts)
        elif p == FALSE:
            continue
        elif p == TRUE:
            return TRUE
        else:
            out.append(p)
    uniq = list(dict.fromkeys(out))
    if not uniq:
        return FALSE
    if len(uniq) == 1:
        return uniq[0]
    return Disj(tuple(uniq))


def exists(vs, body):
    vs = tuple(v for v in vs if v in free_vars(body))
    return Exists(vs, body) if vs else body


def eq(a, b):
    return Cmp("=", a, b)


def ne(a, b):
    return Cmp("!=", a, b)


def conjuncts(p) -> tuple:
    if isinstance(p, Conj):
        return p.parts
    if p == TRUE:
        return ()
    return (p,)


# -- heap -------------------------------------------------------------------

@dataclass(frozen=True)
class Node:
    ptr: object            # Var or NullLit
    name: str
    share: object          # Var or ShareLit
    args: tuple


def node_key(n: Node):
    return (show(n.ptr), n.name, show(n.share), tuple(show(a) for a in n.args))


@dataclass(frozen=True)
class Disjunct:
    heap: tuple = ()
    pure: object = TRUE
    evars: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "heap", tuple(sorted(self.heap, key=node_key)))
        object.__setattr__(self, "evars", tuple(sorted(set(self.evars))))


@dataclass(frozen=True)
class Formula:
    disjuncts: tuple

    def __init__(self, disjuncts):
        if isinstance(disjuncts, Disjunct):
            disjuncts = (disjuncts,)
        object.__setattr__(self, "disjuncts", tuple(disjuncts))


EMP = Disjunct()


def pure_formula(p) -> Formula:
    return Formula((Disjunct((), p),))


# -- definitions ---------------------------------------------------------------

@dataclass(frozen=True)
class DataDef:
    name: str
    fields: tuple           # ((type, name), ...)

    def index(self, field_name: str) -> int:
        for i, (_, n) in enumerate(self.fields):
            if n == field_name:
                return i
        raise KeyError(f"data {self.name} has no field {field_name}")


@dataclass(frozen=True)
class PredDef:
    name: str
    params: tuple
    body: Formula
    inv: object = TRUE
    nonnull: frozenset = frozenset()


@dataclass
class Defs:
    """Name tables shared by every module."""
    data: Dict[str, DataDef] = field(default_factory=dict)
    preds: Dict[str, PredDef] = field(default_factory=dict)
    barriers: Dict[str, object] = field(default_factory=dict)

    def kind(self, name: str) -> str:
        if name in self.data:
            return "data"
        if name in self.preds:
            return "pred"
        if name in self.barriers:
            return "barrier"
        raise SortError(f"unknown node name {name}")


# -- fresh names -------------------------------------------------------------

_counter = itertools.count(1)


def fresh(base: str = "v") -> str:
    base = base.split("~")[0] or "v"
    return f"{base}~{next(_counter)}"


def reset_fresh():
    global _counter
    _counter = itertools.count(1)


# -- free variables ------------------------------------------------------------

def free_vars(x) -> set:
    if isinstance(x, Var):
        return {x.name}
    if isinstance(x, (IntLit, NullLit, ShareLit, BoolConst)):
        return set()
    if isinstance(x, (BinOp, MinMax, Cmp)):
        return free_vars(x.left) | free_vars(x.right)
    if isinstance(x, ShareJoin):
        return free_vars(x.a) | free_vars(x.b) | free_vars(x.c)
    if isinstance(x, ShareEq):
        return free_vars(x.a) | free_vars(x.b)
    if isinstance(x, ShareBound):
        return free_vars(x.v)
    if isinstance(x, (Conj, Disj)):
        out = set()
        for p in x.parts:
            out |= free_vars(p)
        return out
    if isinstance(x, Not):
        return free_vars(x.body)
    if isinstance(x, (Exists, Forall)):
        return free_vars(x.body) - set(x.vars)
    if isinstance(x, Node):
        out = free_vars(x.ptr) | free_vars(x.share)
        for a in x.args:
            out |= free_vars(a)
        return out
    if isinstance(x, Disjunct):
        out = free_vars(x.pure)
        for n in x.heap:
            out |= free_vars(n)
        return out - set(x.evars)
    if isinstance(x, Formula):
        out = set()
        for d in x.disjuncts:
            out |= free_vars(d)
        return out
    if isinstance(x, (tuple, list)):
        out = set()
        for y in x:
            out |= free_vars(y)
        return out
    raise TypeError(f"free_vars: unexpected {x!r}")


def all_vars(x) -> set:
    """Free and bound variable names."""
    if isinstance(x, (Exists, Forall)):
        return all_vars(x.body) | set(x.vars)
    if isinstance(x, Disjunct):
        out = all_vars(x.pure) | set(x.evars)
        for n in x.heap:
            out |= free_vars(n)
        return out
    if isinstance(x, (Conj, Disj)):
        out = set()
        for p in x.parts:
            out |= all_vars(p)
        return out
    if isinstance(x, Not):
        return all_vars(x.body)
    if isinstance(x, Formula):
        out = set()
        for d in x.disjuncts:
            out |= all_vars(d)
        return out
    return free_vars(x)


# -- substitution ---------------------------------------------------------------

def subst(x, m: Dict[str, object]):
    """Simultaneous capture-avoiding substitution of terms for variables."""
    if not m:
        return x
    if isinstance(x, Var):
        return m.get(x.name, x)
    if isinstance(x, (IntLit, NullLit, ShareLit, BoolConst)):
        return x
    if isinstance(x, BinOp):
        return BinOp(x.op, subst(x.left, m), subst(x.right, m))
    if isinstance(x, MinMax):
        return MinMax(x.op, subst(x.left, m), subst(x.right, m))
    if isinstance(x, Cmp):
        return Cmp(x.op, subst(x.left, m), subst(x.right, m))
    if isinstance(x, ShareJoin):
        return ShareJoin(subst(x.a, m), subst(x.b, m), subst(x.c, m))
    if isinstance(x, ShareEq):
        return ShareEq(subst(x.a, m), subst(x.b, m))
    if isinstance(x, ShareBound):
        return ShareBound(subst(x.v, m), x.lo, x.hi)
    if isinstance(x, Conj):
        return conj(*(subst(p, m) for p in x.parts))
    if isinstance(x, Disj):
        return disj(*(subst(p, m) for p in x.parts))
    if isinstance(x, Not):
        return Not(subst(x.body, m))
    if isinstance(x, (Exists, Forall)):
        vs, body, inner = _binder(x.vars, x.body, m)
        return type(x)(vs, subst(body, inner))
    if isinstance(x, Node):
        return Node(subst(x.ptr, m), x.name, subst(x.share, m),
                    tuple(subst(a, m) for a in x.args))
    if isinstance(x, Disjunct):
        vs, _, inner = _binder(x.evars, None, m)
        ren = {a: Var(b) for a, b in zip(x.evars, vs) if a != b}
        heap = tuple(subst(subst(n, ren), inner) for n in x.heap)
        pure = subst(subst(x.pure, ren), inner)
        return Disjunct(heap, pure, vs)
    if isinstance(x, Formula):
        return Formula(tuple(subst(d, m) for d in x.disjuncts))
    if isinstance(x, tuple):
        return tuple(subst(y, m) for y in x)
    raise TypeError(f"subst: unexpected {x!r}")


def _binder(vs, body, m):
    inner = {k: v for k, v in m.items() if k not in vs}
    incoming = set()
    for v in inner.values():
        incoming |= free_vars(v)
    new = []
    for v in vs:
        if v in incoming:
            nv = fresh(v)
            inner[v] = Var(nv)
            new.append(nv)
        else:
            new.append(v)
    return tuple(new), body, inner


def rename(x, m: Dict[str, str]):
    return subst(x, {k: Var(v) for k, v in m.items()})


# -- formula helpers -------------------------------------------------------------

def open_disjunct(d: Disjunct) -> Tuple[tuple, Disjunct]:
    """Replace the existentials of ``d`` by fresh free variables."""
    if not d.evars:
        return (), d
    ren = {v: fresh(v) for v in d.evars}
    body = Disjunct(d.heap, d.pure)
    return tuple(ren.values()), rename(body, ren)


def to_disjunct(q: Formula) -> List[Tuple[tuple, Disjunct]]:
    return [open_disjunct(d) for d in q.disjuncts]


def star(a: Disjunct, b: Disjunct) -> Disjunct:
    """Separating conjunction, keeping existentials apart."""
    va, a2 = open_disjunct(a)
    vb, b2 = open_disjunct(b)
    return Disjunct(a2.heap + b2.heap, conj(a2.pure, b2.pure), va + vb)


def star_formula(a: Formula, b: Formula) -> Formula:
    return Formula(tuple(star(x, y) for x in a.disjuncts for y in b.disjuncts))


def with_pure(d: Disjunct, p) -> Disjunct:
    return Disjunct(d.heap, conj(d.pure, p), d.evars)


def set_shares(q, f):
    if isinstance(q, Formula):
        return Formula(tuple(set_shares(d, f) for d in q.disjuncts))
    if isinstance(q, Disjunct):
        clash = free_vars(f) & set(q.evars)
        if clash:
            _, q = open_disjunct(q)
        return Disjunct(tuple(replace(n, share=f) for n in q.heap), q.pure, q.evars)
    raise TypeError(f"set_shares: unexpected {q!r}")


def is_share_atom(p) -> bool:
    return isinstance(p, SHARE_ATOMS)


def share_vars(x) -> set:
    """Variables used at share sort anywhere in ``x``."""
    out = set()

    def walk(y):
        if isinstance(y, Node):
            if isinstance(y.share, Var):
                out.add(y.share.name)
        elif isinstance(y, ShareJoin):
            out.update(free_vars(y))
        elif isinstance(y, ShareEq):
            out.update(free_vars(y))
        elif isinstance(y, ShareBound):
            out.update(free_vars(y))
        elif isinstance(y, (Conj, Disj)):
            for p in y.parts:
                walk(p)
        elif isinstance(y, (Not, Exists, Forall)):
            walk(y.body)
        elif isinstance(y, Disjunct):
            for n in y.heap:
                walk(n)
            walk(y.pure)
        elif isinstance(y, Formula):
            for d in y.disjuncts:
                walk(d)
        elif isinstance(y, (tuple, list)):
            for z in y:
                walk(z)

    walk(x)
    return out


def fix_sorts(x, svars: Optional[set] = None):
    """Turn ``a = b`` between share variables into share equalities."""
    svars = share_vars(x) if svars is None else svars

    def is_share(t):
        return isinstance(t, ShareLit) or (isinstance(t, Var) and t.name in svars)

    def go(p):
        if isinstance(p, Cmp) and (is_share(p.left) or is_share(p.right)):
            for t in (p.left, p.right):
                if not (isinstance(t, (Var, ShareLit))):
                    raise SortError(f"arithmetic on share term {show(t)}")
            if p.op == "=":
                return ShareEq(p.left, p.right)
            if p.op == "!=":
                return Not(ShareEq(p.left, p.right))
            raise SortError(f"shares are not ordered by {p.op}")
        if isinstance(p, Conj):
            return conj(*(go(q) for q in p.parts))
        if isinstance(p, Disj):
            return disj(*(go(q) for q in p.parts))
        if isinstance(p, Not):
            return Not(go(p.body))
        if isinstance(p, (Exists, Forall)):
            return type(p)(p.vars, go(p.body))
        if isinstance(p, Disjunct):
            return Disjunct(p.heap, go(p.pure), p.evars)
        if isinstance(p, Formula):
            return Formula(tuple(go(d) for d in p.disjuncts))
        return p

    return go(x)


# -- alpha equivalence -------------------------------------------------------------

def alpha_normal(x):
    """Rename bound variables canonically (for alpha-equivalence tests)."""
    counter = itertools.count()

    def go(y):
        if isinstance(y, (Exists, Forall)):
            ren = {v: f"%{next(counter)}" for v in y.vars}
            return type(y)(tuple(ren.values()), go(rename(y.body, ren)))
        if isinstance(y, Conj):
            return Conj(tuple(go(p) for p in y.parts))
        if isinstance(y, Disj):
            return Disj(tuple(go(p) for p in y.parts))
        if isinstance(y, Not):
            return Not(go(y.body))
        if isinstance(y, Disjunct):
            ren = {v: f"%{next(counter)}" for v in y.evars}
            inner = rename(Disjunct(y.heap, y.pure), ren)
            return Disjunct(inner.heap, go(inner.pure), tuple(ren.values()))
        if isinstance(y, Formula):
            return Formula(tuple(go(d) for d in y.disjuncts))
        return y

    return go(x)


def alpha_eq(a, b) -> bool:
    return alpha_normal(a) == alpha_normal(b)


# -- printing --------------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2}


def show(x, prec: int = 0) -> str:
    if isinstance(x, Var):
        return x.name
    if isinstance(x, IntLit):
        return str(x.value) if x.value >= 0 or prec == 0 else f"({x.value})"
    if isinstance(x, NullLit):
        return "null"
    if isinstance(x, ShareLit):
        return sh.format_share(x.tree)
    if isinstance(x, BinOp):
        p = _PREC[x.op]
        s = f"{show(x.left, p)}{x.op}{show(x.right, p + 1)}"
        return f"({s})" if p < prec else s
    if isinstance(x, MinMax):
        return f"{x.op}({show(x.left)},{show(x.right)})"
    if isinstance(x, BoolConst):
        return "true" if x.value else "false"
    if isinstance(x, Cmp):
        return f"{show(x.left)}{x.op}{show(x.right)}"
    if isinstance(x, ShareJoin):
        return f"join({show(x.a)},{show(x.b)},{show(x.c)})"
    if isinstance(x, ShareEq):
        return f"{show(x.a)}={show(x.b)}"
    if isinstance(x, ShareBound):
        return f"bound({show(x.v)},{sh.format_share(x.lo)},{sh.format_share(x.hi)})"
    if isinstance(x, Conj):
        return " & ".join(show(p, 3) for p in x.parts)
    if isinstance(x, Disj):
        s = " | ".join(show(p, 3) for p in x.parts)
        return f"({s})" if prec >= 3 else s
    if isinstance(x, Not):
        return f"!({show(x.body)})"
    if isinstance(x, Exists):
        return f"(exists {','.join(x.vars)}: {show(x.body)})"
    if isinstance(x, Forall):
        return f"(forall {','.join(x.vars)}: {show(x.body)})"
    if isinstance(x, Node):
        s = "" if x.share == FULL_SHARE else f"@{show(x.share)}"
        return f"{show(x.ptr)}::{x.name}{s}<{','.join(show(a) for a in x.args)}>"
    if isinstance(x, Disjunct):
        body = " * ".join(show(n) for n in x.heap)
        if x.pure != TRUE:
            pure = show(x.pure, 3)
            body = f"{body} & {pure}" if body else pure
        body = body or "emp"
        if x.evars:
            return f"(exists {','.join(x.evars)}: {body})"
        return body
    if isinstance(x, Formula):
        if not x.disjuncts:
            return "false"
        return " or ".join(show(d) for d in x.disjuncts)
    raise TypeError(f"show: unexpected {x!r}")
