"""Program syntax: expressions, commands, procedures and whole programs."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .logic import Defs, Formula


# -- expressions -------------------------------------------------------------------

@dataclass(frozen=True)
class EVar:
    name: str


@dataclass(frozen=True)
class EInt:
    value: int


@dataclass(frozen=True)
class ENull:
    pass


@dataclass(frozen=True)
class EBool:
    value: bool


@dataclass(frozen=True)
class EBin:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class ENot:
    body: object


@dataclass(frozen=True)
class EField:
    """Field read ``e.f``; removed by desugaring before execution."""
    target: object
    field: str


ARITH_OPS = {"+", "-", "*"}
REL_OPS = {"<", "<=", ">", ">=", "==", "!="}
BOOL_OPS = {"&&", "||"}


def expr_vars(e) -> set:
    if isinstance(e, EVar):
        return {e.name}
    if isinstance(e, EBin):
        return expr_vars(e.left) | expr_vars(e.right)
    if isinstance(e, ENot):
        return expr_vars(e.body)
    if isinstance(e, EField):
        return expr_vars(e.target)
    return set()


def show_expr(e) -> str:
    if isinstance(e, EVar):
        return e.name
    if isinstance(e, EInt):
        return str(e.value)
    if isinstance(e, ENull):
        return "null"
    if isinstance(e, EBool):
        return "true" if e.value else "false"
    if isinstance(e, EBin):
        return f"({show_expr(e.left)} {e.op} {show_expr(e.right)})"
    if isinstance(e, ENot):
        return f"!{show_expr(e.body)}"
    if isinstance(e, EField):
        return f"{show_expr(e.target)}.{e.field}"
    raise TypeError(e)


# -- commands ------------------------------------------------------------------------

@dataclass(frozen=True)
class Skip:
    line: int = 0


@dataclass(frozen=True)
class Decl:
    var: str
    type: str
    line: int = 0


@dataclass(frozen=True)
class Assign:
    var: str
    expr: object
    line: int = 0


@dataclass(frozen=True)
class Load:
    var: str
    ptr: object
    dtype: str
    field: str
    line: int = 0


@dataclass(frozen=True)
class Store:
    ptr: object
    dtype: str
    field: str
    expr: object
    line: int = 0


@dataclass(frozen=True)
class New:
    var: str
    dtype: str
    args: tuple
    line: int = 0


@dataclass(frozen=True)
class Free:
    ptr: object
    dtype: str
    line: int = 0


@dataclass(frozen=True)
class Seq:
    first: object
    second: object
    line: int = 0


@dataclass(frozen=True)
class If:
    cond: object
    then: object
    orelse: object
    line: int = 0


@dataclass(frozen=True)
class While:
    cond: object
    inv: Optional[Formula]
    body: object
    line: int = 0


@dataclass(frozen=True)
class BarrierCmd:
    var: str
    line: int = 0


@dataclass(frozen=True)
class Call:
    proc: str
    args: tuple
    line: int = 0


@dataclass(frozen=True)
class Return:
    """Restore the caller's store (interpreter only)."""
    saved: tuple
    line: int = 0


def seq(*cmds):
    cmds = [c for c in cmds if not isinstance(c, Skip)]
    if not cmds:
        return Skip()
    out = cmds[-1]
    for c in reversed(cmds[:-1]):
        out = Seq(c, out, getattr(c, "line", 0))
    return out


def show_cmd(c) -> str:
    if isinstance(c, Skip):
        return "skip"
    if isinstance(c, Decl):
        return f"{c.type} {c.var}"
    if isinstance(c, Assign):
        return f"{c.var} = {show_expr(c.expr)}"
    if isinstance(c, Load):
        return f"{c.var} = {show_expr(c.ptr)}.{c.field}"
    if isinstance(c, Store):
        return f"{show_expr(c.ptr)}.{c.field} = {show_expr(c.expr)}"
    if isinstance(c, New):
        return f"{c.var} = new {c.dtype}({', '.join(show_expr(a) for a in c.args)})"
    if isinstance(c, Free):
        return f"free({show_expr(c.ptr)})"
    if isinstance(c, Seq):
        return show_cmd(c.first)
    if isinstance(c, If):
        return f"if {show_expr(c.cond)}"
    if isinstance(c, While):
        return f"while {show_expr(c.cond)}"
    if isinstance(c, BarrierCmd):
        return f"barrier {c.var}"
    if isinstance(c, Call):
        return f"{c.proc}({', '.join(show_expr(a) for a in c.args)})"
    if isinstance(c, Return):
        return "return"
    raise TypeError(c)


# -- procedures and programs ----------------------------------------------------------

@dataclass
class Proc:
    name: str
    params: tuple                 # ((type, name), ...)
    requires: Formula
    ensures: Formula
    body: object
    types: Dict[str, str] = field(default_factory=dict)
    line: int = 0

    @property
    def param_names(self) -> tuple:
        return tuple(n for _, n in self.params)


@dataclass
class Par:
    requires: Formula
    threads: tuple                # ((proc name, (arg names...)), ...)
    line: int = 0


@dataclass
class Check:
    ante: Formula
    conseq: Formula
    expect: Optional[bool] = None
    line: int = 0
    text: str = ""


@dataclass
class Program:
    defs: Defs = field(default_factory=Defs)
    procs: Dict[str, Proc] = field(default_factory=dict)
    par: Optional[Par] = None
    checks: List[Check] = field(default_factory=list)
    barrier_expect: Dict[str, bool] = field(default_factory=dict)
    order: List[Tuple[str, str]] = field(default_factory=list)
