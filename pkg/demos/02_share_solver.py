"""Solving equations over share variables.

Verification conditions mention unknown fractions. The solver narrows each
variable to an interval of shares and reports Unsat when no assignment fits.
"""
from barrierlogic import shares as sh
from barrierlogic.share_solver import (And, ConstEq, Exists, Join, query_exists_elim, query_impl,
                                       query_unsat, solve, to_dnf)

L, R = sh.from_path("L"), sh.from_path("R")


def solve_one(f):
    (system,) = to_dnf(f)
    return solve(system)


def show(res):
    if res.unsat:
        return "Unsat"
    return ", ".join(f"{v} in [{sh.format_share(lo)}, {sh.format_share(hi)}]"
                     for v, (lo, hi) in sorted(res.domains.items()))


# v joined with [R] gives the full share, so v must be [L]
print("v + [R] = full      ->", show(solve_one(Join("v", R, sh.FULL))))
# two unknowns whose sum is [L]: each lies somewhere below [L]
print("a + b = [L]         ->", show(solve_one(Join("a", "b", L))))
# a = [L] overlaps the [L] it must join with
print("a + [L] = full, a=[L] ->",
      show(solve_one(And(Join("a", L, sh.FULL), ConstEq("a", L)))))

print("\nThe three questions the entailment checker asks:")
print("  unsat(v=[L] & v=[R])               :", query_unsat(And(ConstEq("v", L), ConstEq("v", R))))
print("  unique v with v + [R] = full       :",
      sh.format_share(query_exists_elim(Join("v", R, sh.FULL), "v")))
print("  v=[L] implies exists w. v + w = full:",
      query_impl(ConstEq("v", L), Exists("w", Join("v", "w", sh.FULL))))
