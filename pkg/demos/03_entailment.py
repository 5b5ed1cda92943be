"""Entailment between heaps that hold fractions of cells.

Each query reads ``antecedent |- consequent``. A proof may leave part of the
antecedent unused; that leftover is the frame.
"""
from barrierlogic.entail import entail
from barrierlogic.logic import show
from barrierlogic.syntax import parse_formula, parse_program

defs = parse_program("data cl { int val; }").defs

QUERIES = [
    ("two halves make a whole", "x::cl@[L]<1> * x::cl@[R]<1>", "x::cl<1>"),
    ("a half is not the whole", "x::cl@[L]<1>", "x::cl<1>"),
    ("a whole can pay for a half", "x::cl<1> * y::cl<2>", "x::cl@[L]<1>"),
    ("two left halves must live at different cells",
     "x::cl@[L]<1> * y::cl@[L]<1>", "x != y"),
    ("left and right halves may share a cell", "x::cl@[L]<1> * y::cl@[R]<1>", "x != y"),
]

for title, ante, conseq in QUERIES:
    r = entail(parse_formula(ante), parse_formula(conseq), defs)
    print(f"{title}\n  {ante} |- {conseq}\n  -> {'valid' if r.ok else 'not proved'}")
    if r.ok:
        print(f"  frame: {show(r.residues[0].delta)}")
    print()
