"""Acceptance criteria, one test each.

Every test prints a ``PASS``/``FAIL`` line (also collected into the pytest
terminal summary).  Run directly with ``python tests/test_acceptance.py`` to
get just those lines.
"""

import random
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent))

from barrierlogic.barrier import check_barrier  # noqa: E402
from barrierlogic.cli import run_checks  # noqa: E402
from barrierlogic.entail import entail  # noqa: E402
from barrierlogic.interp import Scheduler, check_erasure_commute, initial_state, run  # noqa: E402
from barrierlogic.logic import show  # noqa: E402
from barrierlogic.semantics import (Models, check_sound, oracle_defs,  # noqa: E402
                                    random_satisfiable_entailment)
from barrierlogic.share_solver import solve  # noqa: E402
from barrierlogic.syntax import parse_file  # noqa: E402
from barrierlogic.verifier import verify_program  # noqa: E402

from oracles import dsa_law_violations, random_system, solver_properties  # noqa: E402

CORPUS = Path(__file__).resolve().parent.parent / "src" / "barrierlogic" / "corpus"
RESULTS = {}


def record(n: int, title: str, ok: bool, detail: str) -> bool:
    line = f"{'PASS' if ok else 'FAIL'} [{n}] {title}: {detail}"
    RESULTS[n] = line
    print(line)
    return ok


# -- the criteria --------------------------------------------------------------------

def criterion_1():
    rows, ok = [], True
    for name in ("barrier-strong.ss", "barrier-weak.ss", "barrier-paper.ss"):
        prog = parse_file(CORPUS / name)
        t0 = time.perf_counter()
        rep = verify_program(prog)
        dt = time.perf_counter() - t0
        ok &= rep.ok and dt < 30
        rows.append(f"{name.split('.')[0]} {'verified' if rep.ok else 'FAILED'} {dt:.2f}s")
        if name == "barrier-strong.ss":
            post = show(prog.procs["th1_loop"].ensures)
            ok &= "v1=59" in post.replace(" ", "")
    return record(1, "appendix program verifies (exact x1=59, weak and true variants)",
                  ok, "; ".join(rows))


BARRIERS = {
    "appendix.bar": [],
    "three-way.bar": [],
    "handoff.bar": [],
    "broken-frame.bar": ["g"],
    "broken-guard.bar": ["h"],
    "bad-count.bar": ["a"],
}


def criterion_2():
    t0 = time.perf_counter()
    ok, total, got = True, 0, []
    for name, want in BARRIERS.items():
        prog = parse_file(CORPUS / name)
        for b in prog.defs.barriers.values():
            rep = check_barrier(b, prog.defs)
            total += rep.entailments
            ok &= rep.failed() == want
            got.append(f"{name.split('.')[0]}={'/'.join(rep.failed()) or 'ok'}")
    dt = time.perf_counter() - t0
    ok &= dt < 25 and len(got) == 6
    return record(2, "barrier corpus pass/fail pattern", ok,
                  f"{', '.join(got)}; {total} entailments in {dt:.2f}s")


def criterion_3():
    t0 = time.perf_counter()
    prog = parse_file(CORPUS / "fractions.slk")
    results = run_checks(prog)
    dt = time.perf_counter() - t0
    by_text = {r.text: r for r in results}
    emp_yes = by_text.get("x::cl@[L]<1> * y::cl@[L]<1> |- x != y")
    emp_no = by_text.get("x::cl@[L]<1> * y::cl@[R]<1> |- x != y")
    lsf = [r for r in results if "lsf" in r.text and r.valid]
    ok = (len(results) >= 54 and all(r.met and r.expect is not None for r in results)
          and emp_yes is not None and emp_yes.valid
          and emp_no is not None and not emp_no.valid
          and len(lsf) >= 3 and dt < 5)
    bad = sum(not r.met for r in results)
    return record(3, "fractional entailment suite", ok,
                  f"{len(results)} checks, {bad} unexpected, {dt:.2f}s")


def criterion_4():
    bad = dsa_law_violations(3)
    ok = not any(bad.values())
    return record(4, "share algebra laws at depth <= 3", ok,
                  "256 trees; " + ", ".join(f"{k}={v}" for k, v in bad.items()))


def criterion_5():
    t0 = time.perf_counter()
    rng = random.Random(2024)
    violations, unsat, precise = [], 0, 0
    for _ in range(1000):
        s = random_system(rng, max_vars=4, planted=rng.random() < 0.5)
        r = solve(s)
        unsat += r.unsat
        precise += r.precise
        violations += solver_properties(s, 2)
    dt = time.perf_counter() - t0
    ok = not violations and dt < 60
    return record(5, "share solver differential", ok,
                  f"1000 systems ({unsat} unsat, {precise} precise), "
                  f"{len(violations)} violations, {dt:.2f}s")


def criterion_6():
    defs = oracle_defs()
    models = Models(defs)
    rng = random.Random(6)
    proved, violations = 0, []
    for _ in range(200):
        ante, conseq, evars = random_satisfiable_entailment(rng, models)
        r = entail(ante, conseq, defs, evars)
        if not r.ok:
            continue
        proved += 1
        cex = check_sound(ante, conseq, r, defs, evars, models)
        if cex is not None:
            violations.append(f"{show(ante)} |- {show(conseq)}: {cex}")
    ok = not violations
    return record(6, "entailment small-model oracle", ok,
                  f"200 entailments, {proved} proved, {len(violations)} soundness violations")


def criterion_7():
    prog = parse_file(CORPUS / "barrier-strong.ss")
    cs = initial_state(prog)
    x1, x2 = cs.threads[0].store["x1"], cs.threads[0].store["x2"]

    def schedules():
        # schedulers carry state, so every pass gets fresh ones
        return [Scheduler("rr")] + [Scheduler("rand", seed) for seed in range(1, 101)]

    done = commute = 0
    for sc in schedules():
        res = run(cs, prog, sc)
        mem = res.memory()
        done += res.outcome == "Done" and mem[x1] == (59,) and mem[x2] == (59,)
    for sc in schedules():
        commute += check_erasure_commute(cs, prog, sc).ok
    mutant = parse_file(CORPUS / "half-share-write.ss")
    mres = run(initial_state(mutant), mutant, Scheduler("rr"))
    stuck = mres.outcome == "Stuck"
    ok = done == 101 and commute == 101 and stuck
    return record(7, "dynamic cross-check", ok,
                  f"{done}/101 schedules Done with x1=x2=59, erasure commutes on {commute}/101, "
                  f"half-share mutant {mres.outcome} ({mres.reason})")


# -- pytest entry points ---------------------------------------------------------------

def test_criterion_1_appendix_verifies():
    assert criterion_1(), RESULTS[1]


def test_criterion_2_barrier_corpus():
    assert criterion_2(), RESULTS[2]


def test_criterion_3_fraction_suite():
    assert criterion_3(), RESULTS[3]


def test_criterion_4_share_laws():
    assert criterion_4(), RESULTS[4]


def test_criterion_5_solver_differential():
    assert criterion_5(), RESULTS[5]


def test_criterion_6_entailment_oracle():
    assert criterion_6(), RESULTS[6]


def test_criterion_7_dynamic_cross_check():
    assert criterion_7(), RESULTS[7]


if __name__ == "__main__":
    results = [c() for c in (criterion_1, criterion_2, criterion_3, criterion_4,
                             criterion_5, criterion_6, criterion_7)]
    sys.exit(0 if all(results) else 1)
