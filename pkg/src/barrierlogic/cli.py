"""Command-line front end.

Exit codes: 0 every outcome matched its expectation, 1 some did not,
2 usage or parse error, 3 a resource limit was hit.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from typing import List, Optional

from .barrier import check_barrier
from .entail import check_pred_wf, entail
from .interp import InterpError, Scheduler, check_erasure_commute, initial_state, run
from .logic import free_vars, show
from .program import Program
from .share_solver import ResourceLimit
from .syntax import ParseError, parse_file
from .verifier import verify_program

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_LIMIT = 0, 1, 2, 3


@dataclass
class CheckResult:
    index: int
    line: int
    text: str
    valid: bool
    expect: Optional[bool]
    steps: int

    @property
    def met(self) -> bool:
        return self.expect is None or self.valid == self.expect

    def as_dict(self):
        return {"index": self.index, "line": self.line, "text": self.text,
                "verdict": "valid" if self.valid else "fail",
                "expect": None if self.expect is None else ("valid" if self.expect else "fail"),
                "met": self.met}


def run_checks(prog: Program, default_expect: Optional[bool] = None) -> List[CheckResult]:
    """Decide every ``checkentail`` of ``prog``.

    Consequent variables that do not occur in the antecedent are existential.
    """
    out = []
    for i, c in enumerate(prog.checks, 1):
        evars = tuple(sorted(free_vars(c.conseq) - free_vars(c.ante)))
        r = entail(c.ante, c.conseq, prog.defs, evars)
        expect = c.expect if c.expect is not None else default_expect
        out.append(CheckResult(i, c.line, c.text, r.ok, expect, r.steps))
    return out


# -- subcommands ------------------------------------------------------------------------------

def _expect_flag(args) -> Optional[bool]:
    return None if args.expect is None else args.expect == "pass"


def cmd_sleek(args, prog: Program) -> int:
    results = run_checks(prog, _expect_flag(args))
    if args.json:
        print(json.dumps({"checks": [r.as_dict() for r in results]}, indent=2))
    else:
        for r in results:
            verdict = "Valid." if r.valid else "Fail."
            note = "" if r.met else "  <-- unexpected"
            print(f"Entail {r.index} (line {r.line}): {verdict}{note}")
        bad = sum(not r.met for r in results)
        print(f"{len(results)} checks, {bad} unexpected")
    return EXIT_OK if all(r.met for r in results) else EXIT_FAIL


def cmd_barrier(args, prog: Program) -> int:
    default = _expect_flag(args)
    rows = []
    all_met = True
    for name, b in prog.defs.barriers.items():
        rep = check_barrier(b, prog.defs)
        expect = prog.barrier_expect.get(name, default if default is not None else True)
        met = rep.ok == expect
        all_met &= met
        rows.append((rep, expect, met))
    if args.json:
        print(json.dumps({"barriers": [
            {"name": rep.barrier, "ok": rep.ok, "failed": rep.failed(),
             "expect": "valid" if expect else "fail", "met": met,
             "entailments": rep.entailments,
             "items": [{"check": i.check, "ok": i.ok, "transition": i.transition,
                        "move": None if i.move is None else i.move + 1, "detail": i.detail}
                       for i in rep.items]}
            for rep, expect, met in rows]}, indent=2))
    else:
        for rep, expect, met in rows:
            print(rep.render() if args.verbose or not rep.ok else rep.render().splitlines()[0])
            if not met:
                print(f"  expected {'OK' if expect else 'a failure'}  <-- unexpected")
        total = sum(r.entailments for r, _, _ in rows)
        print(f"{len(rows)} barriers, {total} entailments")
    return EXIT_OK if all_met else EXIT_FAIL


def cmd_verify(args, prog: Program) -> int:
    rep = verify_program(prog)
    procs = [p for p in rep.procs if not args.proc or p.name in args.proc]
    expect = _expect_flag(args)
    expect = True if expect is None else expect
    if args.json:
        rows = []
        for p in procs:
            d = p.as_dict()
            if not args.timing:
                d.pop("seconds", None)
            rows.append(d)
        print(json.dumps({"procedures": rows}, indent=2))
    else:
        for p in procs:
            verdict = "VERIFIED" if p.ok else "FAILED"
            timing = f" ({p.seconds:.2f} s)" if args.timing else ""
            print(f"{p.name}: {verdict}{timing}")
            for o in p.failures:
                print(f"  line {o.line}: {o.rule} failed" + (f": {o.detail}" if o.detail else ""))
            for w in p.warnings:
                print(f"  warning: {w}")
    ok = all(p.ok for p in procs)
    return EXIT_OK if ok == expect else EXIT_FAIL


def _scheduler(args) -> Scheduler:
    order = [int(x) for x in args.order.split(",")] if args.order else []
    kind = "list" if order else args.sched
    return Scheduler(kind, args.seed, order)


def cmd_run(args, prog: Program) -> int:
    cs = initial_state(prog)
    res = run(cs, prog, _scheduler(args), args.cap)
    mem = res.memory()
    if args.trace_json:
        print(json.dumps({"outcome": res.outcome, "reason": res.reason,
                          "steps": [{"tid": s.tid, "rule": s.rule, "cmd": s.cmd}
                                    for s in res.steps],
                          "memory": {str(a): list(v) for a, v in mem.items()}}, indent=2))
    else:
        if not args.quiet:
            for s in res.steps:
                print(s.line())
        print(f"outcome: {res.outcome} ({res.reason}) after {len(res.steps)} steps")
        for a, v in mem.items():
            print(f"  [{a}] = {', '.join(map(str, v))}")
    if res.outcome == "Cap":
        return EXIT_LIMIT
    expect = _expect_flag(args)
    expect = True if expect is None else expect
    return EXIT_OK if (res.outcome == "Done") == expect else EXIT_FAIL


def cmd_erasure(args, prog: Program) -> int:
    cs = initial_state(prog)
    all_ok = True
    for k in range(args.runs):
        sched = _scheduler(args)
        if args.sched == "rand" and not args.order:
            sched = Scheduler("rand", args.seed + k)
        r = check_erasure_commute(cs, prog, sched, args.cap)
        label = f"run {k + 1}" if args.runs > 1 else "run"
        if r.ok:
            print(f"{label}: erasure commutes on all {r.steps} steps")
        else:
            print(f"{label}: first non-commuting step {r.first_bad}: {r.detail}")
        all_ok &= r.ok
    expect = _expect_flag(args)
    expect = True if expect is None else expect
    return EXIT_OK if all_ok == expect else EXIT_FAIL


# -- argument parsing -------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="barrierlogic",
        description="Entailment checking, barrier checking, verification and execution "
                    "for programs with barriers and tree shares.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("file", help="input file")
        p.add_argument("--json", action="store_true", help="machine-readable output")
        p.add_argument("--expect", choices=("pass", "fail"),
                       help="expected outcome for items without an inline expectation")

    def sched(p):
        p.add_argument("--sched", choices=("rr", "rand"), default="rr")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--cap", type=int, default=100_000, help="step cap")
        p.add_argument("--order", help="explicit schedule, comma-separated thread ids")

    p = sub.add_parser("sleek", help="check the checkentail items of a .slk file")
    common(p)
    p = sub.add_parser("barrier", help="check barrier definitions")
    common(p)
    p.add_argument("-v", "--verbose", action="store_true", help="list every check")
    p = sub.add_parser("verify", help="verify procedures and the par directive")
    common(p)
    p.add_argument("--proc", action="append", help="only report this procedure")
    p.add_argument("--timing", action="store_true", help="include timings")
    p = sub.add_parser("run", help="execute the par directive")
    common(p)
    sched(p)
    p.add_argument("--trace-json", action="store_true", help="trace as JSON")
    p.add_argument("-q", "--quiet", action="store_true", help="omit the step trace")
    p = sub.add_parser("erasure-check", help="check that erasure commutes with execution")
    common(p)
    sched(p)
    p.add_argument("--runs", type=int, default=1, help="number of runs (seeds count up)")
    return ap


COMMANDS = {"sleek": cmd_sleek, "barrier": cmd_barrier, "verify": cmd_verify,
            "run": cmd_run, "erasure-check": cmd_erasure}


def main(argv: Optional[List[str]] = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        prog = parse_file(args.file)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ParseError as exc:
        print(f"{args.file}:{exc}", file=sys.stderr)
        return EXIT_USAGE
    bad = [r for r in (check_pred_wf(p, prog.defs) for p in prog.defs.preds.values()) if not r.ok]
    for r in bad:
        print(f"{args.file}: predicate {r.name} is ill-formed: {'; '.join(r.problems)}",
              file=sys.stderr)
    if bad:
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args, prog)
    except ResourceLimit as exc:
        print(f"resource limit: {exc}", file=sys.stderr)
        return EXIT_LIMIT
    except InterpError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
