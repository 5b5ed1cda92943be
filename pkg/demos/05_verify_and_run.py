"""Verify a two-thread program, then run it and compare with the proof.

The program alternates two threads through a barrier thirty times while each
thread writes only cells it owns in full during its stage. After verification,
the interpreter runs the same program under several schedules and checks that
stepping the permission-carrying state agrees with stepping plain memory.
"""
from pathlib import Path

import barrierlogic
from barrierlogic.interp import Scheduler, check_erasure_commute, initial_state, run
from barrierlogic.syntax import parse_file
from barrierlogic.verifier import verify_program

CORPUS = Path(barrierlogic.__file__).parent / "corpus"

prog = parse_file(CORPUS / "barrier-strong.ss")
print("Static verification:")
for p in verify_program(prog).procs:
    print(f"  {p.name:10} {'verified' if p.ok else 'FAILED'}")

cs = initial_state(prog)
x1, x2 = cs.threads[0].store["x1"], cs.threads[0].store["x2"]
print("\nExecution:")
for label, sched in [("round robin", Scheduler("rr"))] + \
        [(f"random seed {s}", Scheduler("rand", s)) for s in (1, 2, 3)]:
    res = run(cs, prog, sched)
    mem = res.memory()
    print(f"  {label:14} {res.outcome} after {len(res.steps)} steps, x1={mem[x1][0]} x2={mem[x2][0]}")
print("  erasure commutes (rr):", check_erasure_commute(cs, prog, Scheduler("rr")).ok)

mutant = parse_file(CORPUS / "half-share-write.ss")
print("\nA variant that writes through a half share:")
print("  verifies:", verify_program(mutant).ok)
res = run(initial_state(mutant), mutant, Scheduler("rr"))
print(f"  runs to:  {res.outcome} ({res.reason})")
