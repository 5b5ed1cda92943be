"""Separation-logic entailment with fractional shares.

``entail(ante, conseq, defs)`` searches for a proof of ``ante |- conseq``
and returns the residual antecedent (the frame) on success.  Search is
depth first.  At each step one consequent node is picked and one of the
following is tried against every antecedent node at the same address:

* MATCH in its FULL, LEFT-SPLIT and RIGHT-SPLIT forms (pruned by the share
  solver),
* UNFOLD of an antecedent predicate (every case must succeed),
* FOLD of a consequent predicate (its body replaces it and the self node
  is matched next).

A consequent predicate with no aliasing antecedent node may close through a
pure base case of its body.  When the consequent heap is empty the remaining
pure goal is proved from the antecedent pure part plus the pure
approximation of the whole heap.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from . import share_solver as ss
from . import shares as sh
from .logic import (FALSE, FULL_SHARE, NULL, TRUE, Cmp, Conj, Defs, Disjunct, Formula, IntLit,
                    Node, NullLit, PredDef, ShareEq, ShareJoin, ShareLit, Var, conj,
                    conjuncts, eq, free_vars, fresh, is_share_atom, ne, open_disjunct,
                    set_shares, show, subst)
from .pure import FragmentError, pure_implies, pure_unsat, share_atom
from .share_solver import ResourceLimit

STEP_BUDGET = 10_000
MAX_FUEL = 2          # consecutive fold/unfold steps allowed between matches

FULL, LEFT_SPLIT, RIGHT_SPLIT = "FULL", "LEFT-SPLIT", "RIGHT-SPLIT"


class EntailResourceError(ResourceLimit):
    """The proof search ran out of rule applications."""


# -- pure approximation of heaps --------------------------------------------------

@dataclass(frozen=True)
class PureApprox:
    formula: object
    owned: tuple              # ((namespace, pointer term, share tree), ...)

    @property
    def pairs(self):
        return {(p, t) for _, p, t in self.owned}


def tau_atoms(pure) -> Tuple:
    """Top-level share conjuncts of a pure formula, in solver syntax."""
    out = []
    for c in conjuncts(pure):
        if is_share_atom(c):
            try:
                out.append(share_atom(c))
            except FragmentError:
                pass
    return tuple(out)


@lru_cache(maxsize=4096)
def _share_values(atoms: Tuple) -> Dict[str, object]:
    if not atoms:
        return {}
    found: Optional[Dict[str, object]] = None
    for s in ss.to_dnf(ss.And(*atoms)):
        res = ss.solve(s)
        if res.unsat:
            continue
        vals = {v: res.value(v) for v in s.variables}
        vals = {v: t for v, t in vals.items() if t is not None}
        if found is None:
            found = vals
        else:
            found = {v: t for v, t in found.items() if vals.get(v) == t}
    return found or {}


def share_values(pure) -> Dict[str, object]:
    """Share variables pinned to a single constant by ``pure``."""
    return _share_values(tau_atoms(pure))


def const_share(term, vals: Dict[str, object]):
    if isinstance(term, ShareLit):
        return term.tree
    if isinstance(term, Var):
        return vals.get(term.name)
    return None


def fxpure(heap: Sequence[Node], tau, defs: Defs) -> PureApprox:
    """Pure consequences of ``heap`` and the owned (pointer, share) pairs."""
    vals = share_values(tau)
    facts = []
    owned = []
    for n in heap:
        cs = const_share(n.share, vals)
        kind = defs.kind(n.name)
        if kind == "pred":
            p = defs.preds[n.name]
            m = {"self": n.ptr, **dict(zip(p.params, n.args))}
            facts.append(subst(p.inv, m))
            for name in sorted(p.nonnull):
                facts.append(ne(m[name], NULL))
                if cs is not None:
                    owned.append(("heap", m[name], cs))
            continue
        facts.append(ne(n.ptr, NULL))
        if cs is not None:
            owned.append(("heap" if kind == "data" else "barrier", n.ptr, cs))
    return PureApprox(conj(*facts), tuple(owned))


def same_cell_facts(heap: Sequence[Node], defs: Defs) -> List:
    """Fractions of one cell (or one barrier) carry equal contents.

    Two nodes of the same kind whose contents are distinct literals must
    also sit at distinct addresses.
    """
    out = []
    seen: Dict[Tuple, Node] = {}
    cells = []
    for n in heap:
        if defs.kind(n.name) == "pred":
            continue
        key = (show(n.ptr), n.name)
        first = seen.setdefault(key, n)
        if first is not n:
            out.extend(eq(a, b) for a, b in zip(first.args, n.args) if a != b)
        cells.append(n)
    for i, a in enumerate(cells):
        for b in cells[i + 1:]:
            if a.name == b.name and a.ptr != b.ptr and any(
                    _literal(x) and _literal(y) and x != y for x, y in zip(a.args, b.args)):
                out.append(ne(a.ptr, b.ptr))
    return out


def _literal(t) -> bool:
    return isinstance(t, (IntLit, NullLit))


def heap_hypothesis(heap: Sequence[Node], pure, defs: Defs):
    """Pure hypothesis used by EMP: ``pure`` plus everything the heap implies."""
    approx = fxpure(heap, pure, defs)
    facts = [pure, approx.formula, *same_cell_facts(heap, defs)]
    owned = approx.owned
    for i, (ns1, p1, c1) in enumerate(owned):
        for ns2, p2, c2 in owned[i + 1:]:
            if ns1 == ns2 and sh.join(c1, c2) is None:
                facts.append(FALSE if p1 == p2 else ne(p1, p2))
    return conj(*facts)


# -- match pruning -----------------------------------------------------------------

def _sterm(t):
    if isinstance(t, ShareLit):
        return t.tree
    if isinstance(t, Var):
        return t.name
    raise FragmentError(f"not a share term: {show(t)}")


def match_prune(tau, f1, f2) -> set:
    """MATCH variants not refuted by ``tau`` for ante share f1, conseq share f2."""
    atoms = tau_atoms(tau) if not isinstance(tau, tuple) else tau
    a, b = _sterm(f1), _sterm(f2)
    base = ss.And(*atoms)

    def possible(extra) -> bool:
        return not ss.query_unsat(ss.And(base, extra))

    out = set()
    if a == b:
        return {FULL}
    if ss.is_var(a) and ss.is_var(b):
        full = ss.VarEq(a, b)
    elif ss.is_var(a) or ss.is_var(b):
        full = ss.ConstEq(a, b) if ss.is_var(a) else ss.ConstEq(b, a)
    else:
        full = ss.TRUE if a == b else ss.FALSE
    if possible(full):
        out.add(FULL)
    r = ss.fresh("fr")
    if possible(ss.Exists(r, ss.Join(b, r, a))):
        out.add(LEFT_SPLIT)
    if possible(ss.Exists(r, ss.Join(a, r, b))):
        out.add(RIGHT_SPLIT)
    return out


# -- results --------------------------------------------------------------------------

@dataclass
class Residue:
    """What is left of the antecedent, plus instantiations of consequent variables."""
    delta: Disjunct
    bindings: Dict[str, object] = field(default_factory=dict)


@dataclass
class EntailResult:
    ok: bool
    residues: List[Residue] = field(default_factory=list)
    trace: List[str] = field(default_factory=list)
    steps: int = 0

    def __bool__(self):
        return self.ok


class _Search:
    def __init__(self, defs: Defs, budget: int):
        self.defs = defs
        self.left = budget
        self.used = 0
        self.failure: Optional[List[str]] = None

    def tick(self):
        self.used += 1
        if self.used > self.left:
            raise EntailResourceError(f"entailment search exceeded {self.left} rule applications")

    def fail(self, trace, why):
        if self.failure is None:
            self.failure = list(trace) + [why]
        return None


@dataclass
class _State:
    ante: tuple                 # remaining antecedent nodes
    pure1: object
    conseq: tuple               # pending consequent nodes
    pure2: object
    V: frozenset
    bind: Dict[str, object]     # internal V var -> term
    used: tuple = ()            # consumed antecedent nodes
    focus: Optional[Node] = None
    fuel: int = MAX_FUEL
    trace: tuple = ()

    def with_(self, **kw) -> "_State":
        d = dict(self.__dict__)
        d.update(kw)
        return _State(**d)


def _instantiate(st: _State, v: str, t) -> _State:
    """Bind existential ``v`` to ``t`` everywhere in the consequent."""
    m = {v: t}
    conseq = tuple(subst(n, m) for n in st.conseq)
    focus = subst(st.focus, m) if st.focus is not None else None
    bind = {k: subst(x, m) for k, x in st.bind.items()}
    bind[v] = t
    return st.with_(conseq=conseq, pure2=subst(st.pure2, m), V=st.V - {v}, bind=bind,
                    focus=focus)


def _unbound(st: _State, t) -> bool:
    return isinstance(t, Var) and t.name in st.V


def _union_find_equal(pure, a, b) -> bool:
    if a == b:
        return True
    parent: Dict[object, object] = {}

    def find(x):
        while parent.get(x, x) != x:
            x = parent[x]
        return x

    for c in conjuncts(pure):
        if isinstance(c, Cmp) and c.op == "=" and isinstance(c.left, (Var, NullLit)) \
                and isinstance(c.right, (Var, NullLit)):
            ra, rb = find(c.left), find(c.right)
            if ra != rb:
                parent[ra] = rb
    return find(a) == find(b)


class Entailer:
    def __init__(self, defs: Defs, budget: int = STEP_BUDGET):
        self.defs = defs
        self.s = _Search(defs, budget)

    # -- helpers ----------------------------------------------------------------

    def _hyp(self, st: _State):
        return heap_hypothesis(st.ante + st.used, st.pure1, self.defs)

    def _aliases(self, st: _State, p1, p2) -> bool:
        if _union_find_equal(st.pure1, p1, p2):
            return True
        if free_vars(p2) & st.V:
            return False
        return pure_implies(self._hyp(st), eq(p1, p2))

    def _compatible(self, a: Node, c: Node) -> bool:
        ka, kc = self.defs.kind(a.name), self.defs.kind(c.name)
        if a.name == c.name:
            return True
        if ka == "barrier" or kc == "barrier":
            return False
        return ka == "pred" or kc == "pred"

    # -- main loop -----------------------------------------------------------------

    def search(self, st: _State) -> Optional[List[Residue]]:
        self.s.tick()
        if not st.conseq:
            return self.emp(st)
        c = self._pick(st)
        rest = tuple(n for n in st.conseq if n is not c)
        cands = []
        for i, a in enumerate(st.ante):
            if not self._compatible(a, c):
                continue
            if _unbound(st, c.ptr):
                cands.append((i, a))
            elif self._aliases(st, a.ptr, c.ptr):
                cands.append((i, a))
        # MATCH
        for i, a in cands:
            if a.name != c.name:
                continue
            got = self.match(st, i, a, c, rest)
            if got is not None:
                return got
        if st.fuel > 0:
            for i, a in cands:
                if self.defs.kind(a.name) == "pred":
                    got = self.unfold(st, i, a, c)
                    if got is not None:
                        return got
            if self.defs.kind(c.name) == "pred":
                for i, a in cands:
                    got = self.fold(st, a, c, rest)
                    if got is not None:
                        return got
        if self.defs.kind(c.name) == "pred":
            got = self.fold_base(st, c, rest)
            if got is not None:
                return got
        return self.s.fail(st.trace, f"no rule closes {show(c)}")

    def _pick(self, st: _State) -> Node:
        if st.focus is not None:
            for n in st.conseq:
                if n == st.focus:
                    return n
        for n in st.conseq:
            if not _unbound(st, n.ptr):
                return n
        return st.conseq[0]

    # -- MATCH ---------------------------------------------------------------------------

    def match(self, st: _State, i: int, a: Node, c: Node, rest: tuple):
        if _unbound(st, c.ptr):
            st = _instantiate(st, c.ptr.name, a.ptr)
            c = Node(a.ptr, c.name, subst(c.share, st.bind), tuple(subst(x, st.bind) for x in c.args))
            rest = tuple(subst(n, st.bind) for n in rest)
        f1, f2 = a.share, c.share
        if _unbound(st, f2):
            pinned = share_values(conj(st.pure1, st.pure2)).get(f2.name)
            if pinned is not None:
                st = _instantiate(st, f2.name, ShareLit(pinned))
                f2 = ShareLit(pinned)
                c = Node(c.ptr, c.name, f2, tuple(subst(x, st.bind) for x in c.args))
                rest = tuple(subst(n, st.bind) for n in rest)
        try:
            variants = match_prune(conj(st.pure1, st.pure2), f1, f2)
        except FragmentError:
            variants = {FULL, LEFT_SPLIT, RIGHT_SPLIT}
        others = st.ante[:i] + st.ante[i + 1:]
        for kind in (FULL, LEFT_SPLIT, RIGHT_SPLIT):
            if kind not in variants:
                continue
            self.s.tick()
            got = self._match_variant(kind, st, a, c, f1, f2, others, rest)
            if got is not None:
                return got
        return None

    def _bind_args(self, st: _State, a: Node, c: Node):
        """Instantiate existential arguments; other arguments become goals."""
        goals = []
        for x1, x2 in zip(a.args, c.args):
            x2 = subst(x2, st.bind)
            if _unbound(st, x2):
                st = _instantiate(st, x2.name, x1)
            elif x1 != x2:
                goals.append((x1, x2))
        extra = []
        for x1, x2 in goals:
            x2 = subst(x2, st.bind)
            if x1 == x2:
                continue
            sortish = isinstance(x1, ShareLit) or isinstance(x2, ShareLit)
            extra.append(ShareEq(x1, x2) if sortish else eq(x2, x1))
        return st.with_(pure2=conj(st.pure2, *extra))

    def _match_variant(self, kind, st, a, c, f1, f2, others, rest):
        trace = st.trace + (f"{kind} {show(a)} ~ {show(c)}",)
        st = st.with_(trace=trace, focus=None, fuel=MAX_FUEL)
        vals = share_values(st.pure1)
        if kind == FULL:
            if _unbound(st, f2):
                st = _instantiate(st, f2.name, f1)
            elif f1 != f2:
                st = st.with_(pure2=conj(st.pure2, ShareEq(f2, f1)))
            st = self._bind_args(st, a, c)
            st = st.with_(ante=others, used=st.used + (a,), conseq=self._resub(st, rest))
            return self.search(st)
        if kind == LEFT_SPLIT:
            c1 = const_share(f1, vals)
            if _unbound(st, f2):
                fc, fr = fresh("fc"), fresh("fr")
                st = _instantiate(st, f2.name, Var(fc))
                extra = ShareJoin(Var(fc), Var(fr), f1)
                remain = Var(fr)
                part = Var(fc)
            else:
                c2 = const_share(f2, vals)
                part = f2
                if c1 is not None and c2 is not None:
                    r = sh.minus(c1, c2)
                    if r is None or not sh.is_positive(r):
                        return self.s.fail(trace, "share not strictly contained")
                    remain, extra = ShareLit(r), TRUE
                else:
                    fr = fresh("fr")
                    goal = ShareJoin(f2, Var(fr), f1)
                    if not pure_implies(st.pure1, goal, {fr}):
                        return self.s.fail(trace, "cannot split antecedent share")
                    remain, extra = Var(fr), goal
            left = Node(a.ptr, a.name, remain, a.args)
            consumed = Node(a.ptr, a.name, part, a.args)
            st = st.with_(pure1=conj(st.pure1, extra))
            st = self._bind_args(st, a, c)
            st = st.with_(ante=others + (left,), used=st.used + (consumed,),
                          conseq=self._resub(st, rest))
            return self.search(st)
        # RIGHT-SPLIT: the consequent wants more than this node holds
        if _unbound(st, f2):
            fr = fresh("fr")
            st = st.with_(V=st.V | {fr}, pure2=conj(st.pure2, ShareJoin(f1, Var(fr), f2)))
            remain = Var(fr)
        else:
            c1, c2 = const_share(f1, vals), const_share(f2, vals)
            if c1 is not None and c2 is not None:
                r = sh.minus(c2, c1)
                if r is None or not sh.is_positive(r):
                    return self.s.fail(trace, "share not strictly contained")
                remain = ShareLit(r)
            else:
                fr = fresh("fr")
                goal = ShareJoin(f1, Var(fr), f2)
                if not pure_implies(st.pure1, goal, {fr}):
                    return self.s.fail(trace, "cannot split consequent share")
                st = st.with_(pure1=conj(st.pure1, goal))
                remain = Var(fr)
        st = self._bind_args(st, a, c)
        c2n = subst(Node(c.ptr, c.name, remain, c.args), st.bind)
        st = st.with_(ante=others, used=st.used + (a,),
                      conseq=self._resub(st, rest) + (c2n,), focus=c2n)
        return self.search(st)

    def _resub(self, st: _State, nodes):
        return tuple(subst(n, st.bind) for n in nodes)

    # -- UNFOLD / FOLD -----------------------------------------------------------------------

    def _pred_cases(self, n: Node):
        p: PredDef = self.defs.preds[n.name]
        m = {"self": n.ptr, **dict(zip(p.params, n.args))}
        out = []
        for d in p.body.disjuncts:
            vs, body = open_disjunct(d)
            body = subst(body, m)
            if n.share != FULL_SHARE:
                body = set_shares(body, n.share)
            out.append((vs, body))
        return out

    def unfold(self, st: _State, i: int, a: Node, c: Node):
        others = st.ante[:i] + st.ante[i + 1:]
        residues: List[Residue] = []
        self.s.tick()
        for k, (_, body) in enumerate(self._pred_cases(a)):
            trace = st.trace + (f"UNFOLD {show(a)} case {k + 1}",)
            sub = st.with_(ante=others + body.heap, pure1=conj(st.pure1, body.pure),
                           focus=c, fuel=st.fuel - 1, trace=trace)
            if pure_unsat(self._hyp(sub)):
                continue
            got = self.search(sub)
            if got is None:
                return None
            residues.extend(got)
        return residues

    def fold(self, st: _State, a: Node, c: Node, rest: tuple):
        self.s.tick()
        for k, (vs, body) in enumerate(self._pred_cases(c)):
            selfs = [n for n in body.heap if n.ptr == c.ptr]
            if not selfs:
                continue
            trace = st.trace + (f"FOLD {show(c)} case {k + 1}",)
            sub = st.with_(conseq=rest + body.heap, pure2=conj(st.pure2, body.pure),
                           V=st.V | set(vs), focus=selfs[0], fuel=st.fuel - 1, trace=trace)
            got = self.search(sub)
            if got is not None:
                return got
        return None

    def fold_base(self, st: _State, c: Node, rest: tuple):
        self.s.tick()
        for k, (vs, body) in enumerate(self._pred_cases(c)):
            if body.heap:
                continue
            trace = st.trace + (f"FOLD-BASE {show(c)} case {k + 1}",)
            sub = st.with_(conseq=rest, pure2=conj(st.pure2, body.pure),
                           V=st.V | set(vs), focus=None, trace=trace)
            got = self.search(sub)
            if got is not None:
                return got
        return None

    # -- EMP ------------------------------------------------------------------------------

    def emp(self, st: _State):
        hyp = self._hyp(st)
        goal = st.pure2
        if not pure_implies(hyp, goal, st.V):
            # a pure goal may still follow by case analysis on a predicate
            if st.fuel > 0:
                for i, a in enumerate(st.ante):
                    if self.defs.kind(a.name) == "pred":
                        got = self.unfold(st, i, a, None)
                        if got is not None:
                            return got
            return self.s.fail(st.trace, f"EMP: cannot prove {show(goal)}")
        keep = [g for g in conjuncts(goal) if free_vars(g) & st.V]
        delta = Disjunct(st.ante, conj(st.pure1, *keep))
        return [Residue(delta, dict(st.bind))]


def entail(ante, conseq, defs: Defs, evars: Iterable[str] = (),
           budget: int = STEP_BUDGET) -> EntailResult:
    """Prove ``ante |- exists evars. conseq``.

    ``ante`` may be a Disjunct or a Formula (every disjunct must succeed);
    ``conseq`` may be a Node list, Disjunct or Formula (first disjunct that
    succeeds wins).  Bindings in each residue are keyed by the names in
    ``evars`` and by nothing else.
    """
    if isinstance(ante, Formula):
        out = EntailResult(True)
        for d in ante.disjuncts:
            r = entail(d, conseq, defs, evars, budget)
            out.steps += r.steps
            if not r.ok:
                return EntailResult(False, [], r.trace, out.steps)
            out.residues.extend(r.residues)
        return out
    if isinstance(conseq, Disjunct):
        conseq = Formula(conseq)
    evars = tuple(evars)
    eng = Entailer(defs, budget)
    _, a = open_disjunct(ante)
    ren = {v: fresh(v) for v in evars}
    start_hyp = heap_hypothesis(a.heap, a.pure, defs)
    if pure_unsat(start_hyp):
        return EntailResult(True, [], ["antecedent unsatisfiable"], eng.s.used)
    for d in conseq.disjuncts:
        vs, body = open_disjunct(subst(d, {k: Var(v) for k, v in ren.items()}))
        st = _State(ante=a.heap, pure1=a.pure, conseq=body.heap, pure2=body.pure,
                    V=frozenset(vs) | frozenset(ren.values()), bind={})
        got = eng.search(st)
        if got is not None:
            for r in got:
                r.bindings = {k: r.bindings.get(v, Var(v)) for k, v in ren.items()}
            return EntailResult(True, got, [], eng.s.used)
    return EntailResult(False, [], eng.s.failure or ["no consequent disjunct"], eng.s.used)


# -- predicate well-formedness ---------------------------------------------------------------

@dataclass
class WFReport:
    name: str
    ok: bool
    problems: List[str] = field(default_factory=list)


def check_pred_wf(p: PredDef, defs: Defs) -> WFReport:
    problems = []
    goal = conj(p.inv, *(ne(Var(v), NULL) for v in sorted(p.nonnull)))
    for k, d in enumerate(p.body.disjuncts, 1):
        if d.heap and not any(n.ptr == Var("self") for n in d.heap):
            problems.append(f"branch {k} is not rooted at self")
            continue
        try:
            hyp = heap_hypothesis(d.heap, d.pure, defs)
            ok = pure_implies(hyp, goal)
        except (FragmentError, ResourceLimit) as exc:
            ok = False
            problems.append(f"branch {k}: {exc}")
            continue
        if not ok:
            problems.append(f"branch {k} does not imply the invariant")
    return WFReport(p.name, not problems, problems)
