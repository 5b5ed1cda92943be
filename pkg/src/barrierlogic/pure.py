"""Decision procedure for pure formulas.

Arithmetic atoms are turned into linear constraints over the integers
(pointers are integers and ``null`` is 0).  Conjunctions are refuted with an
Omega-style procedure: exact equality elimination, Fourier-Motzkin with a
dark shadow, and splinter enumeration when the shadows disagree.  Share
atoms are handed to :mod:`barrierlogic.share_solver`.

Everything here is sound and incomplete: ``True`` from :func:`pure_implies`
means the implication is valid; ``False`` only means it was not proved.
"""

from __future__ import annotations

import itertools
from functools import reduce
from math import gcd
from typing import Dict, Iterable, List, Optional, Tuple

from . import share_solver as ss
from .logic import (BinOp, BoolConst, Cmp, Conj, Disj, Exists, Forall, IntLit,
                    MinMax, Not, NullLit, ShareBound, ShareEq, ShareJoin,
                    ShareLit, Var, conj, disj, fresh, free_vars, show, subst)
from .share_solver import ResourceLimit

CUBE_CAP = 4096
STEP_BUDGET = 50_000
NE_BRANCH_LIMIT = 8


class FragmentError(ValueError):
    """The formula is outside the linear fragment."""


class _GiveUp(Exception):
    pass


# -- linear expressions ---------------------------------------------------------
# A Lin is (coefs, const) with coefs a sorted tuple of (var, nonzero int).

def _freeze(d: Dict[str, int], c: int):
    return (tuple(sorted((k, v) for k, v in d.items() if v)), c)


def _lin_add(a, b, ka: int = 1, kb: int = 1):
    d: Dict[str, int] = {}
    for k, v in a[0]:
        d[k] = d.get(k, 0) + ka * v
    for k, v in b[0]:
        d[k] = d.get(k, 0) + kb * v
    return _freeze(d, ka * a[1] + kb * b[1])


def _lin_scale(a, k: int):
    return (tuple((x, k * v) for x, v in a[0]) if k else (), k * a[1])


def _coef(a, x) -> int:
    for k, v in a[0]:
        if k == x:
            return v
    return 0


def _lin_vars(a) -> set:
    return {k for k, _ in a[0]}


def _lin_subst(a, x, e):
    """Replace variable x in ``a`` by linear expression ``e``."""
    k = _coef(a, x)
    if not k:
        return a
    rest = (tuple((y, v) for y, v in a[0] if y != x), a[1])
    return _lin_add(rest, e, 1, k)


def linearize(t):
    if isinstance(t, Var):
        return (((t.name, 1),), 0)
    if isinstance(t, IntLit):
        return ((), t.value)
    if isinstance(t, NullLit):
        return ((), 0)
    if isinstance(t, BinOp):
        a, b = linearize(t.left), linearize(t.right)
        if t.op == "+":
            return _lin_add(a, b)
        if t.op == "-":
            return _lin_add(a, b, 1, -1)
        if t.op == "*":
            if not a[0]:
                return _lin_scale(b, a[1])
            if not b[0]:
                return _lin_scale(a, b[1])
            raise FragmentError(f"nonlinear term {show(t)}")
    raise FragmentError(f"unsupported term {show(t)}")


def _lin_show(a) -> str:
    parts = [f"{v}*{k}" for k, v in a[0]]
    return " + ".join(parts + [str(a[1])])


# -- normal forms ------------------------------------------------------------------

_FLIP = {"=": "!=", "!=": "=", "<": ">=", ">=": "<", "<=": ">", ">": "<="}


def _find_minmax(t):
    if isinstance(t, MinMax):
        inner = _find_minmax(t.left) or _find_minmax(t.right)
        return inner or t
    if isinstance(t, BinOp):
        return _find_minmax(t.left) or _find_minmax(t.right)
    return None


def _replace_term(t, old, new):
    if t == old:
        return new
    if isinstance(t, BinOp):
        return BinOp(t.op, _replace_term(t.left, old, new), _replace_term(t.right, old, new))
    if isinstance(t, MinMax):
        return MinMax(t.op, _replace_term(t.left, old, new), _replace_term(t.right, old, new))
    return t


def _expand_minmax(p: Cmp):
    mm = _find_minmax(p.left) or _find_minmax(p.right)
    if mm is None:
        return None
    m = Var(fresh("mm"))
    a, b = mm.left, mm.right
    if mm.op == "max":
        cases = disj(conj(Cmp("=", m, a), Cmp(">=", a, b)), conj(Cmp("=", m, b), Cmp(">", b, a)))
    else:
        cases = disj(conj(Cmp("=", m, a), Cmp("<=", a, b)), conj(Cmp("=", m, b), Cmp("<", b, a)))
    atom = Cmp(p.op, _replace_term(p.left, mm, m), _replace_term(p.right, mm, m))
    return Exists((m.name,), conj(cases, atom))


def nnf(p, neg: bool = False):
    if isinstance(p, BoolConst):
        return BoolConst(p.value != neg)
    if isinstance(p, Cmp):
        return Cmp(_FLIP[p.op], p.left, p.right) if neg else p
    if isinstance(p, (ShareJoin, ShareEq, ShareBound)):
        return Not(p) if neg else p
    if isinstance(p, Not):
        return nnf(p.body, not neg)
    if isinstance(p, Conj):
        parts = tuple(nnf(q, neg) for q in p.parts)
        return disj(*parts) if neg else conj(*parts)
    if isinstance(p, Disj):
        parts = tuple(nnf(q, neg) for q in p.parts)
        return conj(*parts) if neg else disj(*parts)
    if isinstance(p, Exists):
        body = nnf(p.body, neg)
        return Forall(p.vars, body) if neg else Exists(p.vars, body)
    if isinstance(p, Forall):
        body = nnf(p.body, neg)
        return Exists(p.vars, body) if neg else Forall(p.vars, body)
    raise TypeError(f"not a pure formula: {p!r}")


class Cube:
    """A conjunction of linear literals and share atoms."""
    __slots__ = ("eqs", "ges", "nes", "share")

    def __init__(self, eqs=(), ges=(), nes=(), share=()):
        self.eqs = tuple(eqs)
        self.ges = tuple(ges)
        self.nes = tuple(nes)
        self.share = tuple(share)

    def __add__(self, o: "Cube") -> "Cube":
        return Cube(self.eqs + o.eqs, self.ges + o.ges, self.nes + o.nes, self.share + o.share)

    def arith(self) -> "Cube":
        return Cube(self.eqs, self.ges, self.nes)

    def is_empty(self) -> bool:
        return not (self.eqs or self.ges or self.nes or self.share)


def _atom_cube(p: Cmp) -> Optional[Cube]:
    d = _lin_add(linearize(p.left), linearize(p.right), 1, -1)
    op = p.op
    if op == "=":
        return Cube(eqs=[d])
    if op == "!=":
        return Cube(nes=[d])
    if op == ">=":
        return Cube(ges=[d])
    if op == ">":
        return Cube(ges=[_lin_add(d, ((), -1))])
    if op == "<=":
        return Cube(ges=[_lin_scale(d, -1)])
    if op == "<":
        return Cube(ges=[_lin_add(_lin_scale(d, -1), ((), -1))])
    raise ValueError(op)


def _share_term(t):
    if isinstance(t, Var):
        return t.name
    if isinstance(t, ShareLit):
        return t.tree
    raise FragmentError(f"not a share term: {show(t)}")


def share_atom(p):
    """Translate a share atom into the share solver's formula language."""
    if isinstance(p, ShareJoin):
        return ss.Join(_share_term(p.a), _share_term(p.b), _share_term(p.c))
    if isinstance(p, ShareEq):
        a, b = _share_term(p.a), _share_term(p.b)
        if ss.is_var(a) and ss.is_var(b):
            return ss.TRUE if a == b else ss.VarEq(a, b)
        if ss.is_var(a):
            return ss.ConstEq(a, b)
        if ss.is_var(b):
            return ss.ConstEq(b, a)
        return ss.TRUE if a == b else ss.FALSE
    if isinstance(p, ShareBound):
        return ss.Bounded(_share_term(p.v), p.lo, p.hi)
    raise TypeError(p)


def _product(a: List[Cube], b: List[Cube]) -> List[Cube]:
    out = [x + y for x in a for y in b]
    if len(out) > CUBE_CAP:
        raise ResourceLimit(f"pure DNF exceeds {CUBE_CAP} cubes")
    return out


def _cubes(p, goal: bool, V: set, under_exists: bool = False) -> List[Cube]:
    """DNF of an NNF formula.  Quantifiers are opened as described below.

    Hypothesis side: existentials become fresh constants, universals are
    dropped (a weakening).  Goal side: existentials are collected into V,
    universals become fresh constants unless they sit under an existential,
    in which case the subformula is replaced by false.
    """
    if isinstance(p, BoolConst):
        return [Cube()] if p.value else []
    if isinstance(p, Cmp):
        ex = _expand_minmax(p)
        if ex is not None:
            return _cubes(ex, goal, V, under_exists)
        return [_atom_cube(p)]
    if isinstance(p, (ShareJoin, ShareEq, ShareBound)):
        return [Cube(share=[share_atom(p)])]
    if isinstance(p, Not):
        # negated share atom: unsupported, weaken soundly
        return [] if goal else [Cube()]
    if isinstance(p, Conj):
        acc = [Cube()]
        for q in p.parts:
            acc = _product(acc, _cubes(q, goal, V, under_exists))
            if not acc:
                break
        return acc
    if isinstance(p, Disj):
        out: List[Cube] = []
        for q in p.parts:
            out.extend(_cubes(q, goal, V, under_exists))
            if len(out) > CUBE_CAP:
                raise ResourceLimit(f"pure DNF exceeds {CUBE_CAP} cubes")
        return out
    if isinstance(p, Exists):
        ren = {v: Var(fresh(v)) for v in p.vars}
        if goal:
            V.update(r.name for r in ren.values())
        return _cubes(subst(p.body, ren), goal, V, under_exists or goal)
    if isinstance(p, Forall):
        if not goal:
            return [Cube()]
        if under_exists:
            return []
        ren = {v: Var(fresh(v)) for v in p.vars}
        return _cubes(subst(p.body, ren), goal, V, under_exists)
    raise TypeError(f"not a pure formula: {p!r}")


# -- conjunction refutation -------------------------------------------------------------

class _Steps:
    def __init__(self, budget: int):
        self.left = budget

    def tick(self):
        self.left -= 1
        if self.left < 0:
            raise _GiveUp


def _mod_hat(a: int, m: int) -> int:
    return a - m * ((2 * a + m) // (2 * m))


def _eliminate_eq(e, pick_from: Optional[set], reduce_coefs: bool = True):
    """Solve equality ``e = 0`` for one variable.

    Returns ``None`` if the equality is unsatisfiable, ``"trivial"`` if it has
    no variables (and holds), otherwise ``(x, expr, extra_eq)`` meaning
    ``x := expr``; ``extra_eq`` is a residual equality still to be processed
    (produced by the Omega coefficient-reduction step) or ``None``.
    """
    coefs, c = e
    if not coefs:
        return "trivial" if c == 0 else None
    g = reduce(gcd, (abs(v) for _, v in coefs))
    if c % g:
        return None
    if g > 1:
        coefs = tuple((k, v // g) for k, v in coefs)
        c //= g
        e = (coefs, c)
    cands = [(k, v) for k, v in coefs if pick_from is None or k in pick_from]
    if not cands:
        return "keep"
    for k, v in cands:
        if abs(v) == 1:
            rest = (tuple((y, w) for y, w in coefs if y != k), c)
            return (k, _lin_scale(rest, -v), None)
    if not reduce_coefs:
        return "nonunit"
    # Omega coefficient reduction
    k, ak = min(cands, key=lambda kv: (abs(kv[1]), kv[0]))
    sign = 1 if ak > 0 else -1
    m = abs(ak) + 1
    sigma = fresh("sg")
    d = {y: sign * _mod_hat(w, m) for y, w in coefs if y != k}
    d[sigma] = -sign * m
    expr = _freeze(d, sign * _mod_hat(c, m))
    residual = _lin_subst(e, k, expr)
    return (k, expr, residual)


def _normalize_ges(ges):
    """Tighten and deduplicate ``>= 0`` constraints.

    Returns None on a contradiction, else (ges, eqs) where eqs are equalities
    discovered from opposite bound pairs.
    """
    best: Dict[tuple, int] = {}
    for coefs, c in ges:
        if not coefs:
            if c < 0:
                return None
            continue
        g = reduce(gcd, (abs(v) for _, v in coefs))
        if g > 1:
            coefs = tuple((k, v // g) for k, v in coefs)
            c = c // g
        if coefs not in best or c < best[coefs]:
            best[coefs] = c
    eqs = []
    done = set()
    for coefs, c in best.items():
        negc = tuple((k, -v) for k, v in coefs)
        if negc in best and negc not in done:
            c2 = best[negc]
            if c + c2 < 0:
                return None
            if c + c2 == 0:
                eqs.append((coefs, c))
                done.add(coefs)
    out = [(k, v) for k, v in best.items() if k not in done and
           tuple((x, -y) for x, y in k) not in done]
    return out, eqs


def _ineq_unsat(ges, steps: _Steps) -> bool:
    steps.tick()
    norm = _normalize_ges(ges)
    if norm is None:
        return True
    ges, eqs = norm
    if eqs:
        return _conj_unsat(eqs, ges, [], steps)
    vs = set()
    for g in ges:
        vs |= _lin_vars(g)
    if not vs:
        return False
    best = None
    for x in sorted(vs):
        lowers = [g for g in ges if _coef(g, x) > 0]
        uppers = [g for g in ges if _coef(g, x) < 0]
        if not lowers or not uppers:
            return _ineq_unsat([g for g in ges if not _coef(g, x)], steps)
        exact = all(_coef(g, x) == 1 for g in lowers) or all(_coef(g, x) == -1 for g in uppers)
        score = (0 if exact else 1, len(lowers) * len(uppers))
        if best is None or score < best[0]:
            best = (score, x, lowers, uppers, exact)
    _, x, lowers, uppers, exact = best
    rest = [g for g in ges if not _coef(g, x)]
    real, dark = [], []
    for lo in lowers:
        a = _coef(lo, x)
        for up in uppers:
            b = -_coef(up, x)
            comb = _lin_add(lo, up, b, a)
            real.append(comb)
            dark.append(_lin_add(comb, ((), -(a - 1) * (b - 1))))
    if exact:
        return _ineq_unsat(rest + real, steps)
    if _ineq_unsat(rest + real, steps):
        return True
    if not _ineq_unsat(rest + dark, steps):
        return False
    m = max(-_coef(up, x) for up in uppers)
    for lo in lowers:
        a = _coef(lo, x)
        for i in range((m * a - a - m) // m + 1):
            if not _conj_unsat([_lin_add(lo, ((), -i))], ges, [], steps):
                return False
    return True


def _conj_unsat(eqs, ges, nes, steps: _Steps) -> bool:
    eqs, ges, nes = list(eqs), list(ges), list(nes)
    while eqs:
        steps.tick()
        e = eqs.pop()
        r = _eliminate_eq(e, None)
        if r is None:
            return True
        if r == "trivial":
            continue
        x, expr, residual = r
        eqs = [_lin_subst(q, x, expr) for q in eqs]
        ges = [_lin_subst(q, x, expr) for q in ges]
        nes = [_lin_subst(q, x, expr) for q in nes]
        if residual is not None:
            eqs.append(residual)
    live = []
    for n in nes:
        if not n[0]:
            if n[1] == 0:
                return True
        else:
            live.append(n)
    if _ineq_unsat(ges, steps):
        return True
    if not live:
        return False
    constrained = set()
    for g in ges:
        constrained |= _lin_vars(g)
    live = [n for n in live if _lin_vars(n) <= constrained]
    return _ne_unsat(ges, live, steps, NE_BRANCH_LIMIT)


def _ne_unsat(ges, nes, steps, branch_left) -> bool:
    ges = list(ges)
    pending = list(nes)
    progress = True
    while progress and pending:
        progress = False
        keep = []
        for n in pending:
            above = _lin_add(n, ((), -1))                    # n >= 1
            below = _lin_add(_lin_scale(n, -1), ((), -1))    # n <= -1
            no_above = _ineq_unsat(ges + [above], steps)
            no_below = _ineq_unsat(ges + [below], steps)
            if no_above and no_below:
                return True
            if no_above:
                ges.append(below)
                progress = True
            elif no_below:
                ges.append(above)
                progress = True
            else:
                keep.append(n)
        pending = keep
    if not pending:
        return _ineq_unsat(ges, steps)
    if branch_left <= 0:
        return False
    n, rest = pending[0], pending[1:]
    above = _lin_add(n, ((), -1))
    below = _lin_add(_lin_scale(n, -1), ((), -1))
    return (_ne_unsat(ges + [above], rest, steps, branch_left - 1)
            and _ne_unsat(ges + [below], rest, steps, branch_left - 1))


_cache: Dict[tuple, bool] = {}


def cube_unsat(c: Cube, budget: int = STEP_BUDGET) -> bool:
    key = (frozenset(c.eqs), frozenset(c.ges), frozenset(c.nes))
    hit = _cache.get(key)
    if hit is not None:
        return hit
    try:
        res = _conj_unsat(c.eqs, c.ges, c.nes, _Steps(budget))
    except _GiveUp:
        res = False
    if len(_cache) > 200_000:
        _cache.clear()
    _cache[key] = res
    return res


# -- projection of goal existentials ----------------------------------------------------

def _project(c: Cube, V: set, steps: _Steps) -> List[Cube]:
    """Under-approximate ``exists V. c`` by quantifier-free cubes."""
    V = set(V)
    eqs, ges, nes = list(c.eqs), list(c.ges), list(c.nes)
    for i, n in enumerate(nes):
        if _lin_vars(n) & V:
            rest = nes[:i] + nes[i + 1:]
            above = _lin_add(n, ((), -1))
            below = _lin_add(_lin_scale(n, -1), ((), -1))
            return (_project(Cube(eqs, ges + [above], rest), V, steps)
                    + _project(Cube(eqs, ges + [below], rest), V, steps))
    kept_eqs = []
    while eqs:
        steps.tick()
        e = eqs.pop()
        if not (_lin_vars(e) & V):
            kept_eqs.append(e)
            continue
        r = _eliminate_eq(e, V, reduce_coefs=False)
        if r is None:
            return []
        if r in ("trivial", "keep"):
            continue
        if r == "nonunit":
            # no exact projection without divisibility; the dark shadow of
            # the two bounds under-approximates it
            ges += [e, _lin_scale(e, -1)]
            continue
        x, expr, residual = r
        eqs = [_lin_subst(q, x, expr) for q in eqs]
        ges = [_lin_subst(q, x, expr) for q in ges]
        nes = [_lin_subst(q, x, expr) for q in nes]
        kept_eqs = [_lin_subst(q, x, expr) for q in kept_eqs]
        if residual is not None:
            eqs.append(residual)
    eqs = kept_eqs
    while True:
        steps.tick()
        norm = _normalize_ges(ges)
        if norm is None:
            return []
        ges, found = norm
        if any(abs(v) == 1 and k in V for e in found for k, v in e[0]):
            return _project(Cube(eqs + found, ges, nes), V, steps)
        ges = ges + [g for e in found for g in (e, _lin_scale(e, -1))]
        targets = sorted(x for x in V if any(_coef(g, x) for g in ges))
        if not targets:
            return [Cube(eqs, ges, nes)]
        x = targets[0]
        lowers = [g for g in ges if _coef(g, x) > 0]
        uppers = [g for g in ges if _coef(g, x) < 0]
        rest = [g for g in ges if not _coef(g, x)]
        exact = all(_coef(g, x) == 1 for g in lowers) or all(_coef(g, x) == -1 for g in uppers)
        new = []
        for lo in lowers:
            a = _coef(lo, x)
            for up in uppers:
                b = -_coef(up, x)
                comb = _lin_add(lo, up, b, a)
                if not exact:
                    comb = _lin_add(comb, ((), -(a - 1) * (b - 1)))
                new.append(comb)
        ges = rest + new


def _negations(c: Cube) -> List[Cube]:
    out = []
    for e in c.eqs:
        out.append(Cube(ges=[_lin_add(e, ((), -1))]))
        out.append(Cube(ges=[_lin_add(_lin_scale(e, -1), ((), -1))]))
    for g in c.ges:
        out.append(Cube(ges=[_lin_add(_lin_scale(g, -1), ((), -1))]))
    for n in c.nes:
        out.append(Cube(eqs=[n]))
    return out


def _refute(h: Cube, goals: List[Cube]) -> bool:
    """Is ``h`` together with the negation of every goal cube unsatisfiable?"""
    if cube_unsat(h):
        return True
    if not goals:
        return False
    first, rest = goals[0], goals[1:]
    for neg in _negations(first):
        if not _refute(h + neg, rest):
            return False
    return True


# -- public API -----------------------------------------------------------------------

def hyp_cubes(p) -> List[Cube]:
    return _cubes(nnf(p), False, set())


def pure_unsat(p) -> bool:
    for c in hyp_cubes(p):
        if c.share and ss.query_unsat(ss.And(*c.share)):
            continue
        if not cube_unsat(c.arith()):
            return False
    return True


def pure_implies(hyp, goal, evars: Iterable[str] = ()) -> bool:
    """Is ``hyp -> exists evars. goal`` valid?"""
    if goal == BoolConst(True):
        return True
    V = set(evars)
    ren = {v: Var(fresh(v)) for v in V}
    goal = subst(goal, ren)
    V = {r.name for r in ren.values()}
    gcubes = _cubes(nnf(goal), True, V)
    if any(g.is_empty() for g in gcubes):
        return True
    for h in hyp_cubes(hyp):
        if h.share and ss.query_unsat(ss.And(*h.share)):
            continue
        ha = h.arith()
        if cube_unsat(ha):
            continue
        cands = [g for g in gcubes if _share_entailed(h.share, g.share, V)]
        if not cands:
            return False
        qf: List[Cube] = []
        try:
            steps = _Steps(STEP_BUDGET)
            for g in cands:
                qf.extend(_project(g.arith(), V, steps))
        except _GiveUp:
            return False
        if any(q.is_empty() for q in qf):
            continue
        if not _refute(ha, qf):
            return False
    return True


def _share_entailed(hyp_atoms, goal_atoms, V) -> bool:
    goal_atoms = [g for g in goal_atoms if g != ss.TRUE]
    if not goal_atoms:
        return True
    if set(goal_atoms) <= set(hyp_atoms):
        return True
    g = ss.And(*goal_atoms)
    ev = tuple(sorted(ss.free_vars(g) & V))
    hyp = ss.And(*hyp_atoms)
    if ss.query_impl(hyp, ss.Exists(ev, g) if ev else g):
        return True
    # witnesses the solver cannot pin: borrow them from matching hypothesis joins
    known = set(hyp_atoms) | {ss.Join(h.b, h.a, h.c) for h in hyp_atoms
                              if isinstance(h, ss.Join)}
    for m in _join_witnesses(goal_atoms, hyp_atoms, set(ev)):
        rest = [a for a in (ss.subst(x, m) for x in goal_atoms) if a not in known]
        if not rest or ss.query_impl(hyp, ss.And(*rest)):
            return True
    return False


def _join_witnesses(goal_atoms, hyp_atoms, V, m=None, limit=64):
    """Assignments of ``V`` that turn goal joins into hypothesis joins."""
    m = dict(m or {})
    todo = [a for a in goal_atoms if isinstance(a, ss.Join)
            and any(ss.is_var(t) and t in V and t not in m for t in (a.a, a.b, a.c))]
    if not todo:
        if m:
            yield m
        return
    g = todo[0]
    for h in hyp_atoms:
        if not isinstance(h, ss.Join):
            continue
        for hs in ((h.a, h.b, h.c), (h.b, h.a, h.c)):
            m2 = dict(m)
            ok = True
            for gt, ht in zip((g.a, g.b, g.c), hs):
                gt = m2.get(gt, gt) if ss.is_var(gt) else gt
                if ss.is_var(gt) and gt in V:
                    m2[gt] = ht
                elif gt != ht:
                    ok = False
                    break
            if ok and m2 != m:
                yield from _join_witnesses(goal_atoms, hyp_atoms, V, m2, limit)
