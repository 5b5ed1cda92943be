"""Tree-share separation logic with barriers: entailment, barrier checks,
a symbolic verifier and a permission-tracking interpreter."""

from .barrier import BarrierDef, check_barrier
from .entail import entail
from .interp import Scheduler, check_erasure_commute, initial_state, run
from .syntax import ParseError, parse_file, parse_formula, parse_program
from .verifier import verify_par, verify_procedure, verify_program

__version__ = "0.1.0"

__all__ = [
    "BarrierDef", "ParseError", "Scheduler", "check_barrier", "check_erasure_commute",
    "entail", "initial_state", "parse_file", "parse_formula", "parse_program", "run",
    "verify_par", "verify_procedure", "verify_program",
]
