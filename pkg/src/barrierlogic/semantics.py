"""Small-model semantics for assertions.

A model is ``(env, heap)``: ``env`` maps variables to ints or share trees,
``heap`` maps an address to ``(name, values, share)``.  Addresses are
positive ints and ``0`` is null.  Everything is enumerated over small
finite domains, so this module is only usable as a test oracle.

The main entry point is :func:`check_sound`.  Given a successful
entailment result it enumerates models of the antecedent and confirms
that each one also satisfies ``conseq * residue`` for some residue.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

from . import shares as sh
from .interp import _Unbound, eval_pure, eval_term
from .logic import (FULL_SHARE, Cmp, Conj, Defs, Disjunct, Formula, IntLit, Node,
                    NullLit, ShareBound, ShareEq, ShareLit, Var, conj, free_vars,
                    open_disjunct, share_vars, show, subst)

VALUES = tuple(range(4))
SHARES = tuple(sh.positive_trees_up_to(2))
WIDE_VALUES = tuple(range(-3, 8))

Heap = Dict[int, Tuple[str, tuple, object]]


def _sub_shares(t) -> List[object]:
    """Positive shares below ``t`` at the depth ``t`` itself needs."""
    d = max(sh.depth(t), 2)
    m = sh.to_mask(t, d)
    out = []
    sub = m
    while sub:
        out.append(sh.from_mask(sub, d))
        sub = (sub - 1) & m
    return out


def _heap_join(h: Heap, addr: int, name: str, vals: tuple, share) -> Optional[Heap]:
    if addr == 0 or not sh.is_positive(share):
        return None
    if addr in h:
        n0, v0, s0 = h[addr]
        j = sh.join(s0, share)
        if j is None or n0 != name or v0 != vals:
            return None
        out = dict(h)
        out[addr] = (name, vals, j)
        return out
    out = dict(h)
    out[addr] = (name, vals, share)
    return out


class Models:
    """Satisfaction and model enumeration over fixed small domains."""

    def __init__(self, defs: Defs, values: Sequence[int] = VALUES,
                 shares: Sequence[object] = SHARES, unfold_depth: int = 2):
        self.defs = defs
        self.values = tuple(values)
        self.shares = tuple(shares)
        self.unfold_depth = unfold_depth
        self._frame = False

    # -- satisfaction ----------------------------------------------------------------

    def sat(self, env: Dict[str, object], heap: Heap, d: Disjunct,
            free: Sequence[str] = (), frame: bool = False) -> bool:
        """Does ``heap`` satisfy ``exists free, d.evars. d`` under ``env``?

        The heap must be consumed exactly unless ``frame`` is set.
        """
        vs, body = open_disjunct(d)
        svars = share_vars(body) | share_vars(Formula(d))
        unknown = set(free) | set(vs)
        env = {k: v for k, v in env.items() if k not in unknown}
        budget = [len(heap) + 2]
        self._frame = frame
        return self._sat(env, heap, list(body.heap), [body.pure], svars, budget)

    def sat_formula(self, env, heap, f: Formula, free=(), frame: bool = False) -> bool:
        return any(self.sat(env, heap, d, free, frame) for d in f.disjuncts)

    def _sat(self, env, heap, nodes, pures, svars, budget) -> bool:
        if not nodes:
            if heap and not self._frame:
                return False
            return self._pure_holds(env, conj(*pures), svars)
        # prefer a node whose pointer is already known
        idx = 0
        for i, n in enumerate(nodes):
            try:
                eval_term(n.ptr, env)
                idx = i
                break
            except _Unbound:
                continue
        n = nodes[idx]
        rest = nodes[:idx] + nodes[idx + 1:]
        try:
            ptrs = [eval_term(n.ptr, env)]
        except _Unbound:
            ptrs = None
        if self.defs.kind(n.name) == "pred":
            return self._sat_pred(env, heap, n, rest, pures, svars, budget, ptrs)
        cands = ptrs if ptrs is not None else sorted(heap)
        for addr in cands:
            cell = heap.get(addr)
            if cell is None or cell[0] != n.name:
                continue
            env1 = dict(env)
            if ptrs is None:
                env1[n.ptr.name] = addr
            for share in self._share_choices(n.share, env1, cell[2]):
                env2 = dict(env1)
                if isinstance(n.share, Var) and n.share.name not in env2:
                    env2[n.share.name] = share
                bound = self._bind_args(env2, n.args, cell[1])
                if bound is None:
                    continue
                env3, extra = bound
                left = sh.minus(cell[2], share)
                h2 = dict(heap)
                if sh.is_positive(left):
                    h2[addr] = (cell[0], cell[1], left)
                else:
                    del h2[addr]
                if self._sat(env3, h2, rest, pures + extra, svars, budget):
                    return True
        return False

    def _sat_pred(self, env, heap, n, rest, pures, svars, budget, ptrs) -> bool:
        if budget[0] <= 0:
            return False
        p = self.defs.preds[n.name]
        budget[0] -= 1
        try:
            for d in p.body.disjuncts:
                vs, body = open_disjunct(d)
                m = {"self": n.ptr, **dict(zip(p.params, n.args))}
                body = subst(body, m)
                pred_svars = svars | share_vars(body)
                if self._sat(env, heap, list(body.heap) + rest, pures + [body.pure],
                             pred_svars, budget):
                    return True
            return False
        finally:
            budget[0] += 1

    def _share_choices(self, term, env, held):
        try:
            s = eval_term(term, env)
            return [s] if sh.leq(s, held) and sh.is_positive(s) else []
        except _Unbound:
            return _sub_shares(held)

    @staticmethod
    def _bind_args(env, args, vals):
        env = dict(env)
        deferred = []
        for a, v in zip(args, vals):
            if isinstance(a, Var) and a.name not in env:
                env[a.name] = v
            else:
                deferred.append((a, v))
        extra = []
        for a, v in deferred:
            try:
                if eval_term(a, env) != v:
                    return None
            except _Unbound:
                extra.append(Cmp("=", a, IntLit(v)))
        return env, extra

    def _pure_holds(self, env, pure, svars) -> bool:
        missing = sorted(free_vars(pure) - set(env))
        if not missing:
            try:
                return eval_pure(pure, env)
            except _Unbound:
                return False
        doms = [self.shares if v in svars else WIDE_VALUES for v in missing]
        for combo in itertools.product(*doms):
            e = {**env, **dict(zip(missing, combo))}
            try:
                if eval_pure(pure, e):
                    return True
            except _Unbound:
                continue
        return False

    # -- enumeration -------------------------------------------------------------------

    def unfoldings(self, d: Disjunct, depth: Optional[int] = None) -> Iterator[Disjunct]:
        """Pred-free disjuncts whose union covers the models of ``d`` up to ``depth``."""
        depth = self.unfold_depth if depth is None else depth
        _, d = open_disjunct(d)
        preds = [i for i, n in enumerate(d.heap) if self.defs.kind(n.name) == "pred"]
        if not preds:
            yield d
            return
        if depth <= 0:
            return
        i = preds[0]
        n = d.heap[i]
        p = self.defs.preds[n.name]
        others = d.heap[:i] + d.heap[i + 1:]
        for bd in p.body.disjuncts:
            vs, body = open_disjunct(bd)
            body = subst(body, {"self": n.ptr, **dict(zip(p.params, n.args))})
            nxt = Disjunct(others + body.heap, conj(d.pure, body.pure), vs)
            yield from self.unfoldings(nxt, depth - 1)

    def models(self, d: Disjunct) -> Iterator[Tuple[Dict[str, object], Heap]]:
        """Every (env, heap) over the domains satisfying ``d``.

        The env covers the free variables of ``d``; existentials are projected away.
        """
        keep = free_vars(Formula(d))
        seen = set()
        for u in self.unfoldings(d):
            u = Disjunct(u.heap, u.pure)
            svars = share_vars(u) | share_vars(Formula(d))
            names = sorted(free_vars(Formula(u)))
            doms = [self.shares if v in svars else self.values for v in names]
            for combo in itertools.product(*doms):
                env = dict(zip(names, combo))
                try:
                    if not eval_pure(u.pure, env):
                        continue
                except _Unbound:
                    continue
                heap: Optional[Heap] = {}
                for n in u.heap:
                    vals = tuple(eval_term(a, env) for a in n.args)
                    heap = _heap_join(heap, eval_term(n.ptr, env), n.name, vals,
                                      eval_term(n.share, env))
                    if heap is None:
                        break
                if heap is None:
                    continue
                out = {k: v for k, v in env.items() if k in keep}
                key = (tuple(sorted((k, repr(v)) for k, v in out.items())),
                       tuple(sorted((a, repr(c)) for a, c in heap.items())))
                if key in seen:
                    continue
                seen.add(key)
                yield out, heap


# -- soundness of entailment results ------------------------------------------------------

@dataclass
class Counterexample:
    env: Dict[str, object]
    heap: Heap

    def __str__(self) -> str:
        env = ", ".join(f"{k}={sh.format_share(v) if not isinstance(v, int) else v}"
                        for k, v in sorted(self.env.items()))
        heap = ", ".join(f"{a}:{n}{list(v)}@{sh.format_share(s)}"
                         for a, (n, v, s) in sorted(self.heap.items()))
        return f"{{{env}}} [{heap}]"


def check_sound(ante: Disjunct, conseq: Formula, result, defs: Defs,
                evars: Sequence[str] = (), models: Optional[Models] = None,
                limit: int = 5000) -> Optional[Counterexample]:
    """A model of ``ante`` that violates ``conseq * residue``, or None.

    Only meaningful when ``result.ok``.  Residue bindings instantiate the
    consequent's ``evars``; everything not free in ``ante`` is existential.
    """
    m = models or Models(defs)
    if isinstance(conseq, Disjunct):
        conseq = Formula(conseq)
    outs: List[Formula] = []
    for r in result.residues:
        inst = Formula(tuple(
            _star_residue(subst(d, dict(r.bindings)), r.delta) for d in conseq.disjuncts))
        outs.append(inst)
    fixed = free_vars(Formula(ante))
    for count, (env, heap) in enumerate(m.models(ante)):
        if count >= limit:
            break
        ok = False
        for f in outs:
            free = sorted(free_vars(f) - fixed)
            if m.sat_formula(env, heap, f, free):
                ok = True
                break
        if not ok:
            return Counterexample(env, heap)
    return None


def _star_residue(d: Disjunct, delta: Disjunct) -> Disjunct:
    return Disjunct(d.heap + delta.heap, conj(d.pure, delta.pure), d.evars + delta.evars)


def is_valid(ante: Disjunct, conseq: Formula, defs: Defs, evars=(),
             models: Optional[Models] = None, frame: bool = True) -> bool:
    """Brute-force validity of ``ante |- conseq * R`` for some frame ``R``.

    With ``frame=False`` the consequent must describe the whole heap.
    """
    m = models or Models(defs)
    if isinstance(conseq, Disjunct):
        conseq = Formula(conseq)
    fixed = free_vars(Formula(ante))
    for env, heap in m.models(ante):
        free = sorted((free_vars(conseq) - fixed) | set(evars))
        if not m.sat_formula(env, heap, conseq, free, frame):
            return False
    return True


# -- random entailments ----------------------------------------------------------------------

ORACLE_DEFS_SRC = """
data cl { int val; }
data node { int val; node next; }
pred ll<n> == self = null & n = 0
   or self::node<_, q> * q::ll<n - 1>
   inv n >= 0.
"""


def _share_lit(path: str) -> ShareLit:
    return ShareLit(sh.from_path(path)) if path != "F" else FULL_SHARE


def random_entailment(rng: random.Random):
    """A random ``(ante, conseq, evars)`` over at most three pointers."""
    ptrs = ["x", "y", "z"][: rng.randint(1, 3)]
    ints = ["a", "b"]
    use_svar = rng.random() < 0.25
    heap: List[Node] = []
    pure = []
    kind = rng.random()
    if kind < 0.2:
        # a short list against the list predicate
        length = rng.randint(0, 2)
        cells = ptrs[:length] if length <= len(ptrs) else ptrs
        for i, p in enumerate(cells):
            nxt = Var(cells[i + 1]) if i + 1 < len(cells) else NullLit()
            heap.append(Node(Var(p), "node", FULL_SHARE, (Var(rng.choice(ints)), nxt)))
        if not cells:
            pure.append(Cmp("=", Var("x"), NullLit()))
        n = rng.choice([len(cells), len(cells), len(cells) + 1, "w"])
        arg = Var("w") if n == "w" else IntLit(n)
        conseq = Disjunct((Node(Var("x"), "ll", FULL_SHARE, (arg,)),))
        return Disjunct(tuple(heap), conj(*pure)), Formula(conseq), ("w",) if n == "w" else ()
    for p in ptrs:
        for _ in range(rng.choice([1, 1, 2])):
            share = Var("s") if use_svar and rng.random() < 0.5 else \
                _share_lit(rng.choice(["F", "L", "R", "L", "R", "LL", "LR"]))
            arg = rng.choice([Var(rng.choice(ints)), IntLit(rng.randint(0, 2))])
            heap.append(Node(Var(p), "cl", share, (arg,)))
    if use_svar:
        pure.append(rng.choice([ShareEq(Var("s"), _share_lit("L")),
                                ShareBound(Var("s"), sh.EMPTY, sh.from_path("R"))]))
    for _ in range(rng.randint(0, 2)):
        a, b = rng.sample(ints, 2)
        pure.append(rng.choice([Cmp("=", Var(a), Var(b)), Cmp("<", Var(a), Var(b)),
                                Cmp("=", Var(a), IntLit(rng.randint(0, 2)))]))
    if len(ptrs) > 1 and rng.random() < 0.3:
        pure.append(Cmp("!=", Var(ptrs[0]), Var(ptrs[1])))
    ante = Disjunct(tuple(heap), conj(*pure))
    # the consequent reuses some antecedent cells, perturbed
    chosen = rng.sample(list(heap), rng.randint(0, len(heap)))
    cnodes = []
    evars = []
    for n in chosen:
        r = rng.random()
        share = n.share
        if r < 0.2:
            share = Var("f")
            if "f" not in evars:
                evars.append("f")
        elif r < 0.4:
            share = _share_lit(rng.choice(["F", "L", "R", "LL"]))
        arg = n.args[0]
        r = rng.random()
        if r < 0.3:
            arg = Var("w")
            if "w" not in evars:
                evars.append("w")
        elif r < 0.45:
            arg = IntLit(rng.randint(0, 2))
        cnodes.append(Node(n.ptr, "cl", share, (arg,)))
    cpure = []
    r = rng.random()
    if r < 0.3 and len(ptrs) > 1:
        cpure.append(Cmp(rng.choice(["!=", "="]), Var(ptrs[0]), Var(ptrs[-1])))
    elif r < 0.5:
        a, b = rng.sample(ints, 2)
        cpure.append(Cmp(rng.choice(["=", "<=", "!="]), Var(a), Var(b)))
    elif r < 0.6 and "w" in evars:
        cpure.append(Cmp("=", Var("w"), Var(rng.choice(ints))))
    conseq = Disjunct(tuple(cnodes), conj(*cpure))
    return ante, Formula(conseq), tuple(evars)


def oracle_defs() -> Defs:
    from .syntax import parse_program
    return parse_program(ORACLE_DEFS_SRC).defs


def random_satisfiable_entailment(rng: random.Random, models: Models, tries: int = 50):
    """Like :func:`random_entailment` but the antecedent has at least one small model."""
    for _ in range(tries):
        ante, conseq, evars = random_entailment(rng)
        if next(iter(models.models(ante)), None) is not None:
            return ante, conseq, evars
    raise RuntimeError("could not draw a satisfiable antecedent")
