"""Recursive-descent parser for `.slk`, `.bar` and `.ss` sources.

Grammar summary (terminals quoted)::

    file      := item*
    item      := data | pred | barrier | proc | par | check | expect
    data      := 'data' ID '{' (TYPE ID ';')* '}'
    pred      := 'pred' ID '<' ids '>' '==' formula ['inv' formula] ('.' | ';')
    check     := 'checkentail' formula '|-' formula ('.' | ';')
    expect    := 'expect' [':'] ('valid' | 'fail' | 'pass') ('.' | ';')
    barrier   := 'barrier' ID ',' INT ',' ID* ',' '[' trans (',' trans)* ']' ';'
    trans     := '(' INT ',' INT ',' '[' spec* ']' ')'
    spec      := 'requires' formula 'ensures' formula ';' [',']
    proc      := ('void' | TYPE) ID '(' [TYPE ID (',' TYPE ID)*] ')'
                 'requires' formula 'ensures' formula ';' block
    par       := 'par' 'requires' formula '{' call ('||' call)* '}' [';']

    formula   := alt (('or' | '|') alt)*
    alt       := 'exists' ids ':' alt | piece (('*' | '&') piece)*
    piece     := node | 'emp' | '(' formula ')' | pure-atom
    node      := ptr '::' ID ['@' share] '<' [expr (',' expr)*] '>'
    share     := '[' ']' | '[' '.' ']' | '[' PATH (',' PATH)* ']' | ID | '_'
    pure-atom := 'true' | 'false' | '!' piece | 'forall' ids ':' piece
               | 'join' '(' s ',' s ',' s ')' | 'bound' '(' s ',' share ',' share ')'
               | expr (REL expr)+

``_`` stands for a fresh existential variable scoped to the enclosing
alternative.  ``null`` is the null pointer.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import List, Optional

from . import shares as sh
from .logic import (FULL_SHARE, NULL, TRUE, BinOp, BoolConst, Cmp, DataDef, Defs,
                    Disjunct, Exists, Forall, Formula, IntLit, MinMax, Node, Not,
                    PredDef, ShareBound, ShareJoin, ShareLit, SortError, Var, conj,
                    disj, fix_sorts, free_vars, fresh, open_disjunct, share_vars,
                    star)
from .program import (Assign, BarrierCmd, Call, Check, Decl, EBin, EBool, EField,
                      EInt, ENot, ENull, EVar, Free, If, Load, New, Par, Proc, Program,
                      Skip, Store, While, seq)


class ParseError(ValueError):
    def __init__(self, msg: str, line: int = 0, col: int = 0):
        super().__init__(f"{line}:{col}: {msg}" if line else msg)
        self.line = line
        self.col = col


_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r\n]+|//[^\n]*|/\*.*?\*/)
  | (?P<int>\d+)
  | (?P<id>[A-Za-z_][A-Za-z0-9_']*(?:~\d+)?)
  | (?P<op>::|\|-|<=|>=|!=|==|&&|\|\||[@\[\]().,;:<>=+\-*&|!{}])
""", re.VERBOSE | re.DOTALL)


@dataclass
class Tok:
    kind: str
    text: str
    line: int
    col: int
    pos: int = 0


def tokenize(text: str) -> List[Tok]:
    out = []
    pos, line, start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - start + 1)
        kind = m.lastgroup
        s = m.group()
        if kind != "ws":
            out.append(Tok(kind, s, line, pos - start + 1, pos))
        nl = s.count("\n")
        if nl:
            line += nl
            start = pos + s.rfind("\n") + 1
        pos = m.end()
    out.append(Tok("eof", "", line, pos - start + 1, pos))
    return out


_REL = {"=", "!=", "<", "<=", ">", ">="}
_KEYWORDS = {"exists", "forall", "or", "emp", "true", "false", "null", "join",
             "bound", "inv", "requires", "ensures", "expect"}


class Parser:
    def __init__(self, text: str, defs: Optional[Defs] = None):
        self.src = text
        self.toks = tokenize(text)
        self.i = 0
        self.defs = defs or Defs()
        self.anon: List[str] = []

    # -- token helpers --------------------------------------------------------

    @property
    def tok(self) -> Tok:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Tok:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, *texts) -> bool:
        t = self.tok
        return t.kind in ("op", "id") and t.text in texts

    def error(self, msg: str, tok: Optional[Tok] = None):
        t = tok or self.tok
        raise ParseError(msg, t.line, t.col)

    def expect(self, text: str) -> Tok:
        if not self.at(text):
            self.error(f"expected {text!r}, found {self.tok.text or 'end of input'!r}")
        t = self.tok
        self.i += 1
        return t

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def ident(self) -> str:
        t = self.tok
        if t.kind != "id":
            self.error(f"expected identifier, found {t.text or 'end of input'!r}")
        self.i += 1
        return t.text

    def integer(self) -> int:
        neg = self.accept("-")
        t = self.tok
        if t.kind != "int":
            self.error(f"expected integer, found {t.text!r}")
        self.i += 1
        return -int(t.text) if neg else int(t.text)

    # -- formulas --------------------------------------------------------------

    def formula(self) -> Formula:
        parts = list(self.alt().disjuncts)
        while self.at("or", "|"):
            self.i += 1
            parts.extend(self.alt().disjuncts)
        return Formula(tuple(parts))

    def alt(self) -> Formula:
        mark = len(self.anon)
        if self.accept("exists"):
            vs = self.ids_until(":")
            body = self.alt()
            out = Formula(tuple(Disjunct(d.heap, d.pure, d.evars + tuple(vs)) for d in body.disjuncts))
        else:
            out = self.piece()
            while self.at("*", "&"):
                self.i += 1
                rhs = self.piece()
                out = Formula(tuple(star(a, b) for a in out.disjuncts for b in rhs.disjuncts))
        new = self.anon[mark:]
        del self.anon[mark:]
        if new:
            out = Formula(tuple(Disjunct(d.heap, d.pure, d.evars + tuple(new)) for d in out.disjuncts))
        return out

    def ids_until(self, end: str) -> List[str]:
        vs = [self.ident()]
        while self.accept(","):
            vs.append(self.ident())
        self.expect(end)
        return vs

    def _node_ahead(self) -> bool:
        return (self.tok.kind == "id" or self.at("null")) and self.peek().text == "::"

    def piece(self) -> Formula:
        if self._node_ahead():
            return Formula(Disjunct((self.node(),)))
        if self.accept("emp"):
            return Formula(Disjunct())
        if self.at("("):
            save = self.i
            saved_anon = list(self.anon)
            try:
                self.i += 1
                f = self.formula()
                self.expect(")")
                if not (self.at(*_REL) or self.at("+", "-") or
                        (self.at("*") and not self._star_follows())):
                    return f
            except ParseError:
                pass
            self.i = save
            self.anon = saved_anon
        return Formula(Disjunct((), self.pure_atom()))

    def node(self) -> Node:
        if self.accept("null"):
            ptr = NULL
        else:
            ptr = Var(self.ident())
        self.expect("::")
        name = self.ident()
        share = FULL_SHARE
        if self.accept("@"):
            share = self.share_term()
        self.expect("<")
        args = []
        if not self.at(">"):
            args.append(self.expr())
            while self.accept(","):
                args.append(self.expr())
        self.expect(">")
        return Node(ptr, name, share, tuple(args))

    def share_const(self):
        start = self.tok
        self.expect("[")
        paths = []
        if self.accept("."):
            self.expect("]")
            return sh.FULL
        while not self.at("]"):
            t = self.tok
            if t.kind != "id" or not re.fullmatch(r"[LR]+", t.text):
                self.error(f"bad share path {t.text!r}")
            paths.append(t.text)
            self.i += 1
            if not self.accept(","):
                break
        self.expect("]")
        try:
            return sh.share_from_paths(paths)
        except sh.ShareSyntaxError as e:
            self.error(str(e), start)

    def share_term(self):
        if self.at("["):
            return ShareLit(self.share_const())
        name = self.ident()
        if name == "_":
            name = fresh("f")
            self.anon.append(name)
        return Var(name)

    def pure_atom(self):
        if self.accept("true"):
            return TRUE
        if self.accept("false"):
            return BoolConst(False)
        if self.accept("!"):
            f = self.piece()
            return Not(self._as_pure(f))
        if self.accept("forall"):
            vs = self.ids_until(":")
            return Forall(tuple(vs), self._as_pure(self.piece()))
        if self.at("join") and self.peek().text == "(":
            self.i += 2
            a = self.share_term()
            self.expect(",")
            b = self.share_term()
            self.expect(",")
            c = self.share_term()
            self.expect(")")
            return ShareJoin(a, b, c)
        if self.at("bound") and self.peek().text == "(":
            self.i += 2
            v = self.share_term()
            self.expect(",")
            lo = self.share_const()
            self.expect(",")
            hi = self.share_const()
            self.expect(")")
            return ShareBound(v, lo, hi)
        left = self.expr()
        if not self.at(*_REL):
            self.error(f"expected comparison, found {self.tok.text or 'end of input'!r}")
        atoms = []
        while self.at(*_REL):
            op = self.tok.text
            self.i += 1
            right = self.expr()
            atoms.append(Cmp(op, left, right))
            left = right
        return conj(*atoms)

    def _as_pure(self, f: Formula):
        out = []
        for d in f.disjuncts:
            if d.heap:
                self.error("heap assertion where a pure formula is required")
            out.append(Exists(d.evars, d.pure) if d.evars else d.pure)
        return disj(*out)

    # arithmetic ----------------------------------------------------------------

    def expr(self):
        left = self.term()
        while self.at("+", "-"):
            op = self.tok.text
            self.i += 1
            left = BinOp(op, left, self.term())
        return left

    def _star_follows(self) -> bool:
        """At '*': does a separating conjunct (not a factor) follow?"""
        nxt, nxt2 = self.peek(1), self.peek(2)
        if nxt.text in ("emp", "true", "false", "exists", "!", "join", "bound", "forall"):
            return True
        if (nxt.kind == "id" or nxt.text == "null") and nxt2.text == "::":
            return True
        if nxt.text == "(":
            j = self.i + 2
            t = self.toks[j]
            if t.text in ("exists", "emp") or self.toks[j + 1].text == "::":
                return True
        return False

    def term(self):
        left = self.unary()
        while self.at("*") and not self._star_follows():
            self.i += 1
            left = BinOp("*", left, self.unary())
        return left

    def unary(self):
        if self.accept("-"):
            inner = self.unary()
            if isinstance(inner, IntLit):
                return IntLit(-inner.value)
            return BinOp("-", IntLit(0), inner)
        return self.primary()

    def primary(self):
        t = self.tok
        if t.kind == "int":
            self.i += 1
            return IntLit(int(t.text))
        if self.accept("null"):
            return NULL
        if self.at("["):
            return ShareLit(self.share_const())
        if self.at("max", "min") and self.peek().text == "(":
            op = t.text
            self.i += 2
            a = self.expr()
            self.expect(",")
            b = self.expr()
            self.expect(")")
            return MinMax(op, a, b)
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        if t.kind == "id" and t.text not in _KEYWORDS:
            self.i += 1
            if t.text == "_":
                name = fresh("a")
                self.anon.append(name)
                return Var(name)
            return Var(t.text)
        self.error(f"unexpected {t.text or 'end of input'!r} in expression")

    def closed_formula(self) -> Formula:
        """A formula with share-sort equalities resolved."""
        return fix_sorts(self.formula())

    # -- declarations -------------------------------------------------------------

    def data_decl(self) -> DataDef:
        self.expect("data")
        name = self.ident()
        self.expect("{")
        fields = []
        while not self.accept("}"):
            ty = self.ident()
            fname = self.ident()
            self.expect(";")
            fields.append((ty, fname))
        return DataDef(name, tuple(fields))

    def pred_decl(self) -> PredDef:
        start = self.expect("pred")
        name = self.ident()
        self.expect("<")
        params = []
        if not self.at(">"):
            params.append(self.ident())
            while self.accept(","):
                params.append(self.ident())
        self.expect(">")
        self.expect("==")
        body = self.formula()
        inv_f = TRUE
        if self.accept("inv"):
            inv_formula = self.formula()
            inv_f = self._as_pure(inv_formula)
        self.terminator()
        body = fix_sorts(body)
        allowed = {"self", *params}
        # other free names in a branch are implicitly existential
        body = Formula(tuple(
            Disjunct(d.heap, d.pure, d.evars + tuple(sorted(free_vars(d) - allowed)))
            for d in body.disjuncts))
        extra = free_vars(inv_f) - allowed
        if extra:
            self.error(f"invariant of {name} mentions unbound {sorted(extra)}", start)
        arith, nonnull = [], set()
        for c in _conjuncts(inv_f):
            if (isinstance(c, Cmp) and c.op == "!=" and isinstance(c.left, Var)
                    and c.left.name in allowed and c.right == NULL):
                nonnull.add(c.left.name)
            else:
                arith.append(c)
        return PredDef(name, tuple(params), body, conj(*arith), frozenset(nonnull))

    def terminator(self):
        if not (self.accept(".") or self.accept(";")):
            self.error(f"expected '.' or ';', found {self.tok.text or 'end of input'!r}")

    def barrier_decl(self):
        from .barrier import BarrierDef, Transition
        start = self.expect("barrier")
        name = self.ident()
        self.expect(",")
        count = self.integer()
        self.expect(",")
        params = []
        while self.tok.kind == "id":
            params.append(self.ident())
            self.accept(",") if self.at(",") and self.peek().kind == "id" else None
        self.expect(",")
        self.expect("[")
        transitions = []
        while not self.at("]"):
            self.expect("(")
            src = self.integer()
            self.expect(",")
            dst = self.integer()
            self.expect(",")
            self.expect("[")
            specs = []
            while not self.at("]"):
                self.expect("requires")
                pre = self.formula()
                self.expect("ensures")
                post = self.formula()
                self.expect(";")
                self.accept(",")
                svars = share_vars(pre) | share_vars(post)
                specs.append((fix_sorts(pre, svars), fix_sorts(post, svars)))
            self.expect("]")
            self.expect(")")
            transitions.append(Transition(src, dst, tuple(specs)))
            if not self.accept(","):
                break
        self.expect("]")
        self.expect(";")
        return BarrierDef(name, count, tuple(params), tuple(transitions), start.line)

    # -- programs -------------------------------------------------------------------

    def program(self) -> Program:
        prog = Program(defs=self.defs)
        pending_procs = []
        last = None
        while self.tok.kind != "eof":
            if self.at("data"):
                d = self.data_decl()
                prog.defs.data[d.name] = d
                prog.order.append(("data", d.name))
            elif self.at("pred"):
                p = self.pred_decl()
                prog.defs.preds[p.name] = p
                prog.order.append(("pred", p.name))
            elif self.at("barrier"):
                b = self.barrier_decl()
                prog.defs.barriers[b.name] = b
                prog.order.append(("barrier", b.name))
                last = ("barrier", b.name)
            elif self.at("checkentail"):
                start = self.tok
                j0 = self.i
                self.i += 1
                ante = self.formula()
                self.expect("|-")
                conseq = self.formula()
                j1 = self.i
                self.terminator()
                svars = share_vars(ante) | share_vars(conseq)
                first, last_tok = self.toks[j0 + 1], self.toks[j1 - 1]
                text = " ".join(self.src[first.pos:last_tok.pos + len(last_tok.text)].split())
                prog.checks.append(Check(fix_sorts(ante, svars), fix_sorts(conseq, svars),
                                         None, start.line, text))
                last = ("check", len(prog.checks) - 1)
            elif self.at("expect"):
                start = self.tok
                self.i += 1
                self.accept(":")
                word = self.ident().lower()
                self.terminator()
                if word not in ("valid", "fail", "pass"):
                    self.error(f"unknown expectation {word!r}", start)
                if last is None:
                    self.error("expect without a preceding check", start)
                ok = word in ("valid", "pass")
                if last[0] == "check":
                    prog.checks[last[1]].expect = ok
                else:
                    prog.barrier_expect[last[1]] = ok
            elif self.at("par"):
                prog.par = self.par_decl()
            else:
                pending_procs.append(self.proc_header())
        for proc in [p for p, _ in pending_procs]:
            prog.procs[proc.name] = proc
        for proc, body_start in pending_procs:
            self.i = body_start
            body = self.block(proc)
            prog.procs[proc.name] = Proc(proc.name, proc.params, proc.requires,
                                         proc.ensures, body, proc.types, proc.line)
        self._check_calls(prog)
        return prog

    def proc_header(self):
        start = self.tok
        self.ident()                     # return type (void)
        name = self.ident()
        self.expect("(")
        params = []
        if not self.at(")"):
            while True:
                ty = self.ident()
                pn = self.ident()
                params.append((ty, pn))
                if not self.accept(","):
                    break
        self.expect(")")
        self.expect("requires")
        req = self.formula()
        self.expect("ensures")
        ens = self.formula()
        self.expect(";")
        svars = share_vars(req) | share_vars(ens)
        proc = Proc(name, tuple(params), fix_sorts(req, svars), fix_sorts(ens, svars),
                    Skip(), {n: t for t, n in params}, start.line)
        body_start = self.i
        self.skip_block()
        return proc, body_start

    def skip_block(self):
        self.expect("{")
        depth = 1
        while depth:
            t = self.tok
            if t.kind == "eof":
                self.error("unterminated block")
            if t.text == "{":
                depth += 1
            elif t.text == "}":
                depth -= 1
            self.i += 1

    def par_decl(self) -> Par:
        start = self.expect("par")
        self.expect("requires")
        init = self.closed_formula()
        self.expect("{")
        threads = []
        while True:
            pname = self.ident()
            self.expect("(")
            args = []
            if not self.at(")"):
                args.append(self.ident())
                while self.accept(","):
                    args.append(self.ident())
            self.expect(")")
            threads.append((pname, tuple(args)))
            if not self.accept("||"):
                break
        self.expect("}")
        self.accept(";")
        return Par(init, tuple(threads), start.line)

    # statements ---------------------------------------------------------------------

    def block(self, proc: Proc):
        self.expect("{")
        cmds = []
        while not self.accept("}"):
            cmds.append(self.stmt(proc))
        return seq(*cmds)

    def _is_type(self, name: str) -> bool:
        return name in ("int", "bool") or name in self.defs.data or name in self.defs.barriers

    def stmt(self, proc: Proc):
        t = self.tok
        line = t.line
        if self.accept(";"):
            return Skip(line)
        if self.at("{"):
            return self.block(proc)
        if self.accept("skip"):
            self.expect(";")
            return Skip(line)
        if self.accept("if"):
            self.expect("(")
            cond = self.pexpr()
            self.expect(")")
            then = self.stmt(proc)
            orelse = self.stmt(proc) if self.accept("else") else Skip(line)
            pre, cond = self.desugar(cond, proc, line)
            return seq(*pre, If(cond, then, orelse, line))
        if self.accept("while"):
            self.expect("(")
            cond = self.pexpr()
            self.expect(")")
            inv = None
            if self.accept("inv"):
                inv = self.closed_formula()
                self.accept(";")
            body = self.stmt(proc)
            pre, cond = self.desugar(cond, proc, line)
            if pre:
                # re-evaluate the reads at the end of every iteration
                body = seq(body, *pre)
            return seq(*pre, While(cond, inv, body, line))
        if self.accept("barrier"):
            name = self.ident()
            self.expect(";")
            return BarrierCmd(name, line)
        if self.accept("free"):
            self.expect("(")
            e = self.pexpr()
            self.expect(")")
            self.expect(";")
            pre, e = self.desugar(e, proc, line)
            return seq(*pre, Free(e, self.type_of(e, proc, t), line))
        if t.kind == "id" and self._is_type(t.text) and self.peek().kind == "id":
            ty = self.ident()
            name = self.ident()
            proc.types[name] = ty
            if self.accept("="):
                rhs = self.rhs(name, proc, line)
                self.expect(";")
                return seq(Decl(name, ty, line), rhs)
            self.expect(";")
            return Decl(name, ty, line)
        if t.kind == "id" and self.peek().text == "(":
            name = self.ident()
            self.expect("(")
            args = []
            if not self.at(")"):
                args.append(self.pexpr())
                while self.accept(","):
                    args.append(self.pexpr())
            self.expect(")")
            self.expect(";")
            pre = []
            out = []
            for a in args:
                p, a2 = self.desugar(a, proc, line)
                pre.extend(p)
                out.append(a2)
            return seq(*pre, Call(name, tuple(out), line))
        target = self.pexpr()
        self.expect("=")
        if isinstance(target, EVar):
            rhs = self.rhs(target.name, proc, line)
            self.expect(";")
            return rhs
        if isinstance(target, EField):
            val = self.pexpr()
            self.expect(";")
            pre1, ptr = self.desugar(target.target, proc, line)
            pre2, val = self.desugar(val, proc, line)
            dtype = self.type_of(ptr, proc, t)
            self._field_index(dtype, target.field, t)
            return seq(*pre1, *pre2, Store(ptr, dtype, target.field, val, line))
        self.error("invalid assignment target", t)

    def rhs(self, var: str, proc: Proc, line: int):
        t = self.tok
        if self.accept("new"):
            dtype = self.ident()
            self.expect("(")
            args = []
            if not self.at(")"):
                args.append(self.pexpr())
                while self.accept(","):
                    args.append(self.pexpr())
            self.expect(")")
            d = self.defs.data.get(dtype)
            if d is None:
                self.error(f"unknown data type {dtype}", t)
            if len(args) != len(d.fields):
                self.error(f"{dtype} takes {len(d.fields)} fields, got {len(args)}", t)
            pre = []
            out = []
            for a in args:
                p, a2 = self.desugar(a, proc, line)
                pre.extend(p)
                out.append(a2)
            proc.types.setdefault(var, dtype)
            return seq(*pre, New(var, dtype, tuple(out), line))
        e = self.pexpr()
        if isinstance(e, EField):
            pre, ptr = self.desugar(e.target, proc, line)
            dtype = self.type_of(ptr, proc, t)
            ftype = self.defs.data[dtype].fields[self._field_index(dtype, e.field, t)][0]
            proc.types.setdefault(var, ftype)
            return seq(*pre, Load(var, ptr, dtype, e.field, line))
        pre, e = self.desugar(e, proc, line)
        return seq(*pre, Assign(var, e, line))

    def _field_index(self, dtype, fname, tok):
        try:
            return self.defs.data[dtype].index(fname)
        except KeyError as exc:
            self.error(str(exc), tok)

    def type_of(self, e, proc: Proc, tok) -> str:
        if isinstance(e, EVar):
            ty = proc.types.get(e.name)
            if ty is None:
                self.error(f"unknown variable {e.name}", tok)
            if ty not in self.defs.data:
                self.error(f"{e.name} is not a pointer to a data type", tok)
            return ty
        self.error("pointer expression must be a variable", tok)

    def desugar(self, e, proc: Proc, line: int):
        """Hoist field reads out of ``e`` into loads of fresh temporaries."""
        pre = []

        def go(x):
            if isinstance(x, EField):
                ptr = go(x.target)
                tok = self.tok
                dtype = self.type_of(ptr, proc, tok)
                ftype = self.defs.data[dtype].fields[self._field_index(dtype, x.field, tok)][0]
                tmp = f"t_{len(proc.types)}"
                while tmp in proc.types:
                    tmp += "_"
                proc.types[tmp] = ftype
                pre.append(Load(tmp, ptr, dtype, x.field, line))
                return EVar(tmp)
            if isinstance(x, EBin):
                return EBin(x.op, go(x.left), go(x.right))
            if isinstance(x, ENot):
                return ENot(go(x.body))
            return x

        return pre, go(e)

    # program expressions -----------------------------------------------------------------

    def pexpr(self):
        left = self.p_and()
        while self.accept("||"):
            left = EBin("||", left, self.p_and())
        return left

    def p_and(self):
        left = self.p_rel()
        while self.accept("&&"):
            left = EBin("&&", left, self.p_rel())
        return left

    def p_rel(self):
        left = self.p_add()
        if self.at("<", "<=", ">", ">=", "==", "!="):
            op = self.tok.text
            self.i += 1
            left = EBin(op, left, self.p_add())
        return left

    def p_add(self):
        left = self.p_mul()
        while self.at("+", "-"):
            op = self.tok.text
            self.i += 1
            left = EBin(op, left, self.p_mul())
        return left

    def p_mul(self):
        left = self.p_unary()
        while self.accept("*"):
            left = EBin("*", left, self.p_unary())
        return left

    def p_unary(self):
        if self.accept("-"):
            inner = self.p_unary()
            if isinstance(inner, EInt):
                return EInt(-inner.value)
            return EBin("-", EInt(0), inner)
        if self.accept("!"):
            return ENot(self.p_unary())
        return self.p_postfix()

    def p_postfix(self):
        t = self.tok
        if t.kind == "int":
            self.i += 1
            e = EInt(int(t.text))
        elif self.accept("null"):
            e = ENull()
        elif self.accept("true"):
            e = EBool(True)
        elif self.accept("false"):
            e = EBool(False)
        elif self.accept("("):
            e = self.pexpr()
            self.expect(")")
        elif t.kind == "id":
            self.i += 1
            e = EVar(t.text)
        else:
            self.error(f"unexpected {t.text or 'end of input'!r} in expression")
        while self.at(".") and self.peek().kind == "id":
            self.i += 1
            e = EField(e, self.ident())
        return e

    def _check_calls(self, prog: Program):
        from .program import Seq, If as _If, While as _While

        def walk(c):
            if isinstance(c, Seq):
                walk(c.first)
                walk(c.second)
            elif isinstance(c, _If):
                walk(c.then)
                walk(c.orelse)
            elif isinstance(c, _While):
                walk(c.body)
            elif isinstance(c, Call):
                callee = prog.procs.get(c.proc)
                if callee is None:
                    raise ParseError(f"call to unknown procedure {c.proc}", c.line)
                if len(callee.params) != len(c.args):
                    raise ParseError(f"{c.proc} expects {len(callee.params)} arguments", c.line)

        for p in prog.procs.values():
            walk(p.body)
        if prog.par is not None:
            for name, args in prog.par.threads:
                callee = prog.procs.get(name)
                if callee is None:
                    raise ParseError(f"par names unknown procedure {name}", prog.par.line)
                if len(callee.params) != len(args):
                    raise ParseError(f"{name} expects {len(callee.params)} arguments", prog.par.line)


def _conjuncts(p):
    from .logic import Conj
    if isinstance(p, Conj):
        return p.parts
    if p == TRUE:
        return ()
    return (p,)


def parse_formula(text: str) -> Formula:
    p = Parser(text)
    f = p.closed_formula()
    if p.tok.kind != "eof":
        p.error(f"trailing input {p.tok.text!r}")
    return f


def parse_program(text: str, defs: Optional[Defs] = None) -> Program:
    return Parser(text, defs).program()


def parse_file(path: str) -> Program:
    with open(path, encoding="utf-8") as fh:
        return parse_program(fh.read())
