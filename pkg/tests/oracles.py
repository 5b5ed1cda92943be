"""Brute-force oracles shared by the module tests and the acceptance suite."""

from __future__ import annotations

import random

import numpy as np

from barrierlogic import shares as sh
from barrierlogic.share_solver import (Bounded, ConstEq, Join, ShareSystem, holds, is_var,
                                       solve, system_holds)

# -- share systems over bitmasks ------------------------------------------------------

def _grid(n_vars: int, depth: int):
    """Every assignment of positive depth-``depth`` masks to ``n_vars`` variables."""
    vals = np.arange(1, 1 << (1 << depth), dtype=np.int32)
    if n_vars == 0:
        return [], 1
    axes = np.meshgrid(*([vals] * n_vars), indexing="ij")
    return [a.ravel() for a in axes], axes[0].size


def brute_solutions(system: ShareSystem, depth: int):
    """Return (variable order, int array of solutions as masks) for ``system``."""
    if system.aliases:
        raise ValueError("brute force expects an alias-free system")
    names = sorted(system.variables)
    cols, size = _grid(len(names), depth)
    col = dict(zip(names, cols))
    full = (1 << (1 << depth)) - 1

    def term(t):
        if is_var(t):
            return col[t]
        if sh.depth(t) > depth:
            raise ValueError("constant deeper than the brute-force depth")
        return np.full(size, sh.to_mask(t, depth), dtype=np.int32)

    ok = np.ones(size, dtype=bool)
    for e in system.equations:
        if isinstance(e, Join):
            a, b, c = term(e.a), term(e.b), term(e.c)
            ok &= ((a & b) == 0) & ((a | b) == c)
        elif isinstance(e, ConstEq):
            ok &= term(e.v) == sh.to_mask(e.value, depth)
        elif isinstance(e, Bounded):
            x = term(e.v)
            lo, hi = sh.to_mask(e.lo, depth), sh.to_mask(e.hi, depth)
            ok &= ((lo & ~x & full) == 0) & ((x & ~hi & full) == 0)
    if not names:
        return names, np.zeros((int(ok.all()), 0), dtype=np.int32)
    return names, np.stack([col[v][ok] for v in names], axis=1)


def random_system(rng: random.Random, max_vars: int = 4, const_depth: int = 2,
                  planted: bool = False) -> ShareSystem:
    """A random alias-free system mixing joins, constants and bounds.

    With ``planted`` every equation is resampled until it holds under a hidden
    assignment, so the system is satisfiable.
    """
    n = rng.randint(1, max_vars)
    names = [f"v{i}" for i in range(n)]
    consts = sh.positive_trees_up_to(const_depth)

    def term(p_var=0.7):
        return rng.choice(names) if rng.random() < p_var else rng.choice(consts)

    hidden = {v: rng.choice(consts) for v in names}

    def one():
        k = rng.random()
        if k < 0.6:
            return Join(term(), term(), term(0.5))
        if k < 0.8:
            return ConstEq(rng.choice(names), rng.choice(consts))
        lo, hi = (rng.choice(sh.trees_up_to(const_depth)) for _ in range(2))
        return Bounded(rng.choice(names), lo, sh.t_or(lo, hi))

    eqs = []
    for _ in range(rng.randint(1, 4)):
        e = one()
        for _ in range(50 if planted else 0):
            if holds(e, hidden):
                break
            e = one()
        else:
            if planted:
                continue
        eqs.append(e)
    used = set()
    for e in eqs:
        for t in ((e.a, e.b, e.c) if isinstance(e, Join) else (e.v,)):
            if is_var(t):
                used.add(t)
    return ShareSystem(tuple(eqs), (), frozenset(used))


def solver_properties(system: ShareSystem, depth: int = 2):
    """Check FALSE, COMPLETE and SAT-PRECISE for one system.

    Returns a list of violation strings (empty when all hold).
    """
    res = solve(system)
    names, sols = brute_solutions(system, depth)
    bad = []
    if res.unsat:
        if len(sols):
            bad.append(f"FALSE: solver says unsat but {len(sols)} solutions exist")
        return bad
    for i, v in enumerate(names):
        lo, hi = res.domains[v]
        d = max(depth, sh.depth(lo), sh.depth(hi))
        lo_m, hi_m = sh.to_mask(lo, d), sh.to_mask(hi, d)
        col = sols[:, i]
        if d > depth:
            col = np.array([sh.to_mask(sh.from_mask(int(m), depth), d) for m in col], dtype=np.int64)
        full = (1 << (1 << d)) - 1
        if np.any((lo_m & ~col & full) != 0) or np.any((col & ~hi_m & full) != 0):
            bad.append(f"COMPLETE: a solution of {v} lies outside [{sh.format_share(lo)}, "
                       f"{sh.format_share(hi)}]")
    if res.precise:
        env = res.assignment()
        if not all(sh.is_positive(x) for x in env.values()):
            bad.append("SAT-PRECISE: non-positive assignment")
        elif not system_holds(system, env):
            bad.append(f"SAT-PRECISE: assignment {env} violates the system")
    return bad


# -- separation algebra laws ----------------------------------------------------------

def dsa_law_violations(depth: int = 3) -> dict:
    """Check the DSA laws over every canonical tree of at most ``depth``.

    Returns a map law -> number of counterexamples.  Associativity is checked
    on leaf masks over all triples, after confirming that the tree join agrees
    with disjoint union of masks on every pair.
    """
    trees = sh.trees_up_to(depth)
    mask = {t: sh.to_mask(t, depth) for t in trees}
    bad = dict.fromkeys(("function", "commutative", "associative", "cancellative",
                         "units", "disjointness", "mask-model"), 0)
    for a in trees:
        seen = {}
        for b in trees:
            j = sh.join(a, b)
            if j != sh.join(a, b) or (j is not None and not sh.is_canonical(j)):
                bad["function"] += 1
            if j != sh.join(b, a):
                bad["commutative"] += 1
            if j is not None:
                if j in seen:
                    bad["cancellative"] += 1
                seen[j] = b
            want = None if mask[a] & mask[b] else mask[a] | mask[b]
            if (None if j is None else mask[j]) != want:
                bad["mask-model"] += 1
        if sh.join(sh.EMPTY, a) != a:
            bad["units"] += 1
        j = sh.join(a, a)
        if j is not None and not (a == j == sh.EMPTY):
            bad["disjointness"] += 1
    m = np.arange(1 << (1 << depth), dtype=np.int32)
    x, y, z = m[:, None, None], m[None, :, None], m[None, None, :]
    left = ((x & y) == 0) & (((x | y) & z) == 0)
    right = ((y & z) == 0) & ((x & (y | z)) == 0)
    bad["associative"] = int(np.count_nonzero(left != right))
    return bad


# -- barrier transitions at model level -----------------------------------------------

def _value_models(pure, env, names, dom):
    """Assignments of ``names`` (extending ``env``) satisfying the conjunction ``pure``.

    Equalities with a unit coefficient on their only unbound variable are
    solved directly; every other variable ranges over ``dom``.
    """
    from barrierlogic.interp import eval_pure
    from barrierlogic.logic import BinOp, Cmp, conjuncts
    from barrierlogic.pure import linearize

    eqs = [linearize(BinOp("-", a.left, a.right)) for a in conjuncts(pure)
           if isinstance(a, Cmp) and a.op == "="]

    def go(env):
        env = dict(env)
        changed = True
        while changed:
            changed = False
            for coefs, c in eqs:
                free = [(k, v) for k, v in coefs if k not in env]
                if len(free) == 1 and abs(free[0][1]) == 1:
                    k, v = free[0]
                    rest = c + sum(w * env[y] for y, w in coefs if y != k)
                    env[k] = -rest * v
                    changed = True
        left = sorted(n for n in names if n not in env)
        if not left:
            if eval_pure(pure, env):
                yield env
            return
        for x in dom:
            yield from go({**env, left[0]: x})

    yield from go(env)


def barrier_model_check(b, defs, dom=(1, 2)):
    """Model-level check of every transition of barrier ``b``.

    Parameters get distinct addresses, ``self`` a separate one.  For every
    value assignment satisfying the joined preconditions the joined heap must
    hold the full barrier in the source state, and the same data heap with the
    barrier moved to the target state must satisfy the joined postconditions
    exactly.  Returns (models checked, list of violations).
    """
    import itertools

    from barrierlogic.interp import eval_term
    from barrierlogic.logic import Disjunct, conj, free_vars, open_disjunct
    from barrierlogic.semantics import Models, _heap_join

    m = Models(defs)
    base = {p: i + 1 for i, p in enumerate(b.params)}
    base["self"] = len(b.params) + 1
    checked, bad = 0, []
    for t in b.transitions:
        for pres in itertools.product(*(pre.disjuncts for pre, _ in t.specs)):
            opened = [open_disjunct(d)[1] for d in pres]
            heap_nodes = tuple(n for d in opened for n in d.heap)
            pure = conj(*(d.pure for d in opened))
            names = free_vars(Disjunct(heap_nodes, pure)) - set(base)
            posts = Disjunct(tuple(n for _, post in t.specs for n in post.disjuncts[0].heap),
                             conj(*(post.disjuncts[0].pure for _, post in t.specs)))
            post_only = sorted(free_vars(posts) - names - set(base))
            for env in _value_models(pure, dict(base), names, dom):
                heap = {}
                for n in heap_nodes:
                    vals = tuple(eval_term(a, env) for a in n.args)
                    heap = _heap_join(heap, eval_term(n.ptr, env), n.name, vals,
                                      eval_term(n.share, env))
                    if heap is None:
                        break
                if heap is None:
                    continue
                checked += 1
                cell = heap.get(base["self"])
                if cell != (b.name, (t.src,), sh.FULL):
                    bad.append(f"{t.src}->{t.dst}: joined barrier share is {cell}")
                    continue
                target = dict(heap)
                target[base["self"]] = (b.name, (t.dst,), sh.FULL)
                if not m.sat(env, target, posts, post_only):
                    bad.append(f"{t.src}->{t.dst}: postconditions do not cover {env}")
    return checked, bad
