"""Checking a barrier definition before any program uses it.

A barrier lists, for each transition between states, one pre/post pair per
participating thread. The checker confirms that the threads together hand
over exactly the resources they take back, that guards pick one direction,
and so on. Each check is named by a letter.
"""
from pathlib import Path

import barrierlogic
from barrierlogic.barrier import check_barrier
from barrierlogic.syntax import parse_file

CORPUS = Path(barrierlogic.__file__).parent / "corpus"

for name in ("appendix.bar", "broken-frame.bar", "broken-guard.bar", "bad-count.bar"):
    prog = parse_file(CORPUS / name)
    for b in prog.defs.barriers.values():
        rep = check_barrier(b, prog.defs)
        verdict = "ok" if rep.ok else "fails " + ", ".join(rep.failed())
        print(f"{name:18} barrier {b.name}: {verdict} ({rep.entailments} entailments)")
        for item in rep.items:
            if not item.ok:
                where = item.transition if item.move is None else f"{item.transition} move {item.move}"
                print(f"    ({item.check}) {where}: {item.detail}")
                break
