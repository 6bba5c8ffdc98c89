"""Recursive-descent parser for instruction pseudocode.

Layout rules (indentation is ignored):

* statements are separated by newlines or ``;``;
* ``then``/``else``/``do`` followed by a newline open a block that runs to
  the next ``else``, ``end`` or end of input; followed by a statement on the
  same line they take exactly that one statement;
* ``end`` optionally closes the last block of an ``if``/``for``.  After a
  one-line block it must sit on the same line;
* a dangling ``else`` binds to the innermost open ``if``.

See ``docs/grammar.ebnf`` for the full grammar.
"""
from __future__ import annotations

import re

from ..catalog.builtins import BUILTINS, PROCEDURES
from ..state import ProcessorMode
from .ast import (
    CPSR, PARAM_KINDS, SPSR, Assign, BinOp, BitRange, Block, Case, Const, Exp,
    Flag, For, Fun, If, IfExp, Memory, OldFlag, OldParam, OperationAst, Param,
    Proc, Reg, Stm, UnpredictableStm, Var,
)
from .lexer import ParseError, Token, tokenize

_MODES = {m.name for m in ProcessorMode}
_SPSR_MODES = {m.name for m in ProcessorMode if m.has_spsr}
_REG_VAR = re.compile(r"^R([a-z][A-Za-z0-9_]*)$")
_REG_NUM = re.compile(r"^R(1[0-5]|[0-9])$")
_REG_ALIAS = {"SP": 13, "LR": 14, "PC": 15}
_HEADER = re.compile(r"^\s*([A-Z][0-9]+(?:\.[0-9]+)*)\s+([A-Z][A-Za-z0-9_]*)\s*$")

# Binary operator precedence (higher binds tighter), C ordering.
PRECEDENCE = {
    "or": 1, "and": 2, "OR": 3, "EOR": 4, "AND": 5,
    "==": 6, "!=": 6, "<<": 7, ">>": 7, "+": 8, "-": 8,
}
_SYMBOL_OPS = {"&": "AND", "|": "OR", "^": "EOR"}
_BLOCK_END = {"else", "end", "endcase", "otherwise"}

# Source-level carry/borrow/overflow forms and the primitive each maps to.
_SUGAR = {
    ("CarryFrom", "+"): "CarryFrom_add",
    ("OverflowFrom", "+"): "OverflowFrom_add",
    ("BorrowFrom", "-"): "BorrowFrom_sub",
    ("OverflowFrom", "-"): "OverflowFrom_sub",
}


def _flatten(e: Exp, op: str) -> list[Exp]:
    if isinstance(e, BinOp) and e.op == op:
        return _flatten(e.left, op) + [e.right]
    return [e]


class _Parser:
    def __init__(self, text: str, params: dict[str, str] | None = None):
        self.toks = tokenize(text)
        self.i = 0
        self.params = params or {}

    # -- token helpers --------------------------------------------------------

    def peek(self, k: int = 0) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def advance(self) -> Token:
        t = self.toks[self.i]
        if t.kind != "EOF":
            self.i += 1
        return t

    def error(self, msg: str, tok: Token | None = None, expected=()):
        tok = tok or self.peek()
        raise ParseError(msg, tok.line, tok.col, expected)

    def at(self, kind: str, text: str | None = None) -> bool:
        return self.peek().is_(kind, text)

    def at_kw(self, *words: str) -> bool:
        t = self.peek()
        return t.kind == "KW" and t.text in words

    def at_op(self, *ops: str) -> bool:
        t = self.peek()
        return t.kind == "OP" and t.text in ops

    def expect_kw(self, word: str) -> Token:
        if not self.at_kw(word):
            self.error(f"unexpected {self._describe(self.peek())}", expected=[repr(word)])
        return self.advance()

    def expect_op(self, op: str) -> Token:
        if not self.at_op(op):
            self.error(f"unexpected {self._describe(self.peek())}", expected=[repr(op)])
        return self.advance()

    def expect_int(self) -> int:
        if not self.at("INT"):
            self.error(f"unexpected {self._describe(self.peek())}", expected=["integer"])
        return self.advance().value

    @staticmethod
    def _describe(t: Token) -> str:
        if t.kind == "EOF":
            return "end of input"
        if t.kind == "NL":
            return "end of line"
        return repr(t.text)

    def skip_seps(self):
        while self.at("NL"):
            self.advance()

    # -- statements -------------------------------------------------------------

    def stmt_list(self) -> list[Stm]:
        # Statements never start with an integer, so a case-arm label also
        # ends the list.
        out: list[Stm] = []
        while True:
            self.skip_seps()
            t = self.peek()
            if t.kind in ("EOF", "INT") or (t.kind == "KW" and t.text in _BLOCK_END):
                return out
            out.append(self.statement())
            t = self.peek()
            if t.kind not in ("NL", "EOF") and not (t.kind == "KW" and t.text in _BLOCK_END):
                self.error(f"unexpected {self._describe(t)} after statement",
                           expected=["end of line", "';'"])

    def block(self) -> tuple[Stm, bool]:
        """Parse a block; returns (statement, spans_lines)."""
        if self.at("NL"):
            return Block(tuple(self.stmt_list())), True
        if self.at("EOF"):
            self.error("missing statement", expected=["statement"])
        return self.statement(), False

    def _close(self, multi: bool):
        # Optional ``end``: after a multi-line block it may follow separators,
        # after a one-line block it has to be the very next token.
        if multi:
            j = self.i
            while self.toks[j].kind == "NL":
                j += 1
            if self.toks[j].is_("KW", "end"):
                self.i = j + 1
        elif self.at_kw("end"):
            self.advance()

    def statement(self) -> Stm:
        t = self.peek()
        if t.is_("KW", "if"):
            return self.if_stmt()
        if t.is_("KW", "for"):
            return self.for_stmt()
        if t.is_("KW", "case"):
            return self.case_stmt()
        if t.is_("KW", "UNPREDICTABLE"):
            self.advance()
            return UnpredictableStm()
        if t.kind == "IDENT" and self.peek(1).is_("OP", "(") and t.text in PROCEDURES:
            name = self.advance().text
            args = self.call_args()
            if len(args) != PROCEDURES[name]:
                self.error(f"{name} takes {PROCEDURES[name]} arguments", t)
            return Proc(name, tuple(args))
        if t.kind in ("NL", "EOF"):
            self.error("missing statement", expected=["statement"])
        dst = self.postfix()
        if not self.at_op("="):
            if isinstance(dst, Fun):
                self.error(f"{dst.name} is a function, not a procedure", t)
            self.error(f"unexpected {self._describe(self.peek())}", expected=["'='"])
        self.advance()
        self._check_lvalue(dst, t)
        return Assign(dst, self.expression())

    def _check_lvalue(self, dst: Exp, tok: Token):
        ok = isinstance(dst, (Reg, CPSR, SPSR, Memory, Flag, Var)) or (
            isinstance(dst, BitRange) and isinstance(dst.exp, Reg))
        if not ok:
            self.error("cannot assign to this expression", tok)
        if isinstance(dst, Var) and dst.name in self.params:
            self.error(f"cannot assign to parameter {dst.name!r}", tok)

    def if_stmt(self) -> Stm:
        self.expect_kw("if")
        cond = self.expression()
        self.expect_kw("then")
        then, multi = self.block()
        orelse = None
        # After a one-line block no separator may precede the ``else``.
        if self.at_kw("else"):
            self.advance()
            orelse, multi = self.block()
        self._close(multi)
        return If(cond, then, orelse)

    def for_stmt(self) -> Stm:
        self.expect_kw("for")
        if not self.at("IDENT"):
            self.error("expected loop counter", expected=["identifier"])
        name = self.advance().text
        if name in self.params:
            self.error(f"loop counter shadows parameter {name!r}")
        self.expect_op("=")
        start = self.expression()
        self.expect_kw("to")
        stop = self.expression()
        self.expect_kw("do")
        body, multi = self.block()
        self._close(multi)
        return For(name, start, stop, body)

    def case_stmt(self) -> Stm:
        self.expect_kw("case")
        exp = self.expression()
        self.expect_kw("of")
        arms: list[tuple[int, Stm]] = []
        default: Stm = Block(())
        seen = set()
        while True:
            self.skip_seps()
            if self.at("INT"):
                tok = self.peek()
                value = self.advance().value
                if value in seen:
                    self.error(f"duplicate case label {value}", tok)
                seen.add(value)
                self.expect_op(":")
                body, _ = self.block()
                arms.append((value, body))
            elif self.at_kw("otherwise"):
                self.advance()
                self.expect_op(":")
                default, _ = self.block()
            elif self.at_kw("endcase"):
                self.advance()
                return Case(exp, tuple(arms), default)
            else:
                self.error(f"unexpected {self._describe(self.peek())} in case",
                           expected=["integer label", "'otherwise'", "'endcase'"])

    # -- expressions ------------------------------------------------------------

    def expression(self) -> Exp:
        if self.at_kw("if"):
            self.advance()
            c = self.expression()
            self.expect_kw("then")
            a = self.expression()
            self.expect_kw("else")
            b = self.expression()
            return IfExp(c, a, b)
        return self.binary(1)

    def _binop_here(self) -> str | None:
        t = self.peek()
        if t.kind == "KW" and t.text in PRECEDENCE:
            return t.text
        if t.kind == "OP":
            op = _SYMBOL_OPS.get(t.text, t.text)
            if op in PRECEDENCE:
                return op
        return None

    def binary(self, level: int) -> Exp:
        if level > 8:
            return self.unary()
        left = self.binary(level + 1)
        while True:
            op = self._binop_here()
            if op is None or PRECEDENCE[op] != level:
                return left
            self.advance()
            right = self.binary(level + 1)
            left = BinOp(left, op, right)

    def unary(self) -> Exp:
        if self.at_kw("NOT") or self.at_op("~"):
            self.advance()
            operand = self.unary()
            name = "NOT_bit" if self.width(operand) == 1 else "NOT"
            return Fun(name, (operand,))
        return self.postfix()

    def postfix(self) -> Exp:
        e = self.primary()
        while self.at_op("["):
            tok = self.advance()
            hi = self.expect_int()
            lo = hi
            if self.at_op(":"):
                self.advance()
                lo = self.expect_int()
            self.expect_op("]")
            if not 0 <= lo <= hi <= 31:
                self.error(f"bit range [{hi}:{lo}] outside 31..0", tok)
            e = BitRange(e, hi, lo)
        return e

    def call_args(self) -> list[Exp]:
        self.expect_op("(")
        args: list[Exp] = []
        if not self.at_op(")"):
            args.append(self.expression())
            while self.at_op(","):
                self.advance()
                args.append(self.expression())
        self.expect_op(")")
        return args

    def primary(self) -> Exp:
        t = self.peek()
        if t.kind == "INT":
            self.advance()
            if t.value > 0xFFFFFFFF:
                self.error("constant does not fit in 32 bits", t)
            return Const(t.value)
        if t.is_("OP", "("):
            self.advance()
            e = self.expression()
            self.expect_op(")")
            return e
        if t.is_("KW", "CPSR"):
            self.advance()
            return CPSR()
        if t.is_("KW", "Reg"):
            self.advance()
            self.expect_op("[")
            idx = self.expression()
            mode = None
            if self.at_op(","):
                self.advance()
                mode = self._mode_name(_MODES)
            self.expect_op("]")
            return Reg(idx, mode)
        if t.is_("KW", "Memory"):
            self.advance()
            self.expect_op("[")
            addr = self.expression()
            self.expect_op(",")
            size_tok = self.peek()
            size = self.expect_int()
            if size not in (1, 2, 4):
                self.error("memory access size must be 1, 2 or 4", size_tok)
            self.expect_op("]")
            return Memory(addr, size)
        if t.is_("KW", "old"):
            self.advance()
            self.expect_op("(")
            inner = self.primary()
            self.expect_op(")")
            if isinstance(inner, Reg) and isinstance(inner.index, Var) and inner.mode is None:
                return OldParam(inner.index.name)
            if isinstance(inner, Flag):
                return OldFlag(inner.name)
            self.error("old(...) takes a register parameter or a flag", t)
        if t.kind == "IDENT":
            return self._ident()
        self.error(f"unexpected {self._describe(t)}", expected=["expression"])

    def _mode_name(self, allowed) -> str:
        t = self.peek()
        if t.kind != "IDENT" or t.text not in allowed:
            self.error(f"unknown processor mode {t.text!r}", t, expected=sorted(allowed))
        return self.advance().text

    def _ident(self) -> Exp:
        t = self.advance()
        name = t.text
        if self.at_kw("Flag"):
            if name not in ("N", "Z", "C", "V"):
                self.error(f"unknown flag {name!r}", t)
            self.advance()
            return Flag(name)
        if self.at_op("("):
            return self._call(t)
        if name == "SPSR":
            return SPSR()
        if name.startswith("SPSR_"):
            mode = name[5:]
            if mode not in _SPSR_MODES:
                self.error(f"mode {mode!r} has no SPSR", t)
            return SPSR(mode)
        if name in _REG_ALIAS:
            return Reg(Const(_REG_ALIAS[name]))
        m = _REG_NUM.match(name)
        if m:
            return Reg(Const(int(m.group(1))))
        m = _REG_VAR.match(name)
        if m:
            return Reg(Var(m.group(1)))
        return Var(name)

    def _call(self, t: Token) -> Exp:
        name = t.text
        args = self.call_args()
        if name in ("CarryFrom", "BorrowFrom", "OverflowFrom"):
            if len(args) != 1:
                self.error(f"{name} takes a single sum or difference", t)
            arg = args[0]
            op = arg.op if isinstance(arg, BinOp) else None
            prim = _SUGAR.get((name, op))
            terms = _flatten(arg, op) if prim else []
            if not prim or len(terms) not in (2, 3):
                self.error(f"{name} expects two or three terms joined by "
                           f"{'+' if name == 'CarryFrom' else '-' if name == 'BorrowFrom' else '+ or -'}", t)
            return Fun(f"{prim}{len(terms)}", tuple(terms))
        b = BUILTINS.get(name)
        if b is None or name in ("NOT", "NOT_bit"):
            self.error(f"unknown function {name!r}", t)
        if len(args) != b.arity:
            self.error(f"{name} takes {b.arity} arguments, got {len(args)}", t)
        return Fun(name, tuple(args))

    # -- static width of an expression (1 = bit, 32 = word) --------------------

    def width(self, e: Exp) -> int:
        return expression_width(e, self.params)


def expression_width(e: Exp, params: dict[str, str] | None = None) -> int:
    params = params or {}
    match e:
        case Flag() | OldFlag():
            return 1
        case BitRange(hi=hi, lo=lo):
            return 1 if hi == lo else 32
        case Fun(name=name):
            return BUILTINS[name].width
        case BinOp(op=op, left=l, right=r):
            if op in ("==", "!=", "and", "or"):
                return 1
            if op in ("AND", "OR", "EOR"):
                return 1 if expression_width(l, params) == expression_width(r, params) == 1 else 32
            return 32
        case IfExp(then=a, orelse=b):
            return 1 if expression_width(a, params) == expression_width(b, params) == 1 else 32
        case Const(value=v):
            return 1 if v in (0, 1) else 32
        case Var(name=n):
            return 1 if params.get(n) == "bit" else 32
    return 32


# ---- entry points ----------------------------------------------------------------


def _finish(p: _Parser, stmts: list[Stm]) -> Stm:
    t = p.peek()
    if t.kind != "EOF":
        p.error(f"unexpected {p._describe(t)}", expected=["end of input"])
    return stmts[0] if len(stmts) == 1 else Block(tuple(stmts))


def parse_exp(text: str, params: dict[str, str] | None = None) -> Exp:
    p = _Parser(text, params)
    p.skip_seps()
    e = p.expression()
    p.skip_seps()
    if not p.at("EOF"):
        p.error(f"unexpected {p._describe(p.peek())}", expected=["end of input"])
    return e


def parse_stm(text: str, params: dict[str, str] | None = None) -> Stm:
    p = _Parser(text, params)
    return _finish(p, p.stmt_list())


def split_operations(text: str) -> list[tuple[int, str]]:
    """Split a multi-operation file on ``===`` lines; returns (first line, chunk)."""
    chunks, current, start = [], [], 1
    for lineno, line in enumerate(text.splitlines(keepends=True), 1):
        if line.strip() == "===":
            chunks.append((start, "".join(current)))
            current, start = [], lineno + 1
        else:
            current.append(line)
    chunks.append((start, "".join(current)))
    return [(s, c) for s, c in chunks if c.strip()]


def parse_operation(text: str, check: bool = True) -> OperationAst:
    """Parse one operation: header line, ``param`` prologue, body."""
    lines = text.splitlines(keepends=True)
    k = 0
    while k < len(lines) and not lines[k].strip():
        k += 1
    if k == len(lines):
        raise ParseError("empty operation", 1, 1, ["header line"])
    m = _HEADER.match(lines[k])
    if not m:
        raise ParseError("expected a header such as 'A4.1.2 ADC'", k + 1, 1, ["header line"])
    section, name = m.groups()
    params: list[Param] = []
    k += 1
    param_re = re.compile(r"^\s*param\s+([A-Za-z_][A-Za-z0-9_]*)\s*:\s*([a-z-]+)\s*$")
    while k < len(lines):
        line = lines[k]
        if not line.strip() or line.strip().startswith("//"):
            k += 1
            continue
        if not line.lstrip().startswith("param"):
            break
        pm = param_re.match(line)
        if not pm:
            raise ParseError("malformed param line", k + 1, 1, ["param <name> : <kind>"])
        pname, kind = pm.groups()
        if kind not in PARAM_KINDS:
            raise ParseError(f"unknown parameter kind {kind!r}", k + 1, line.index(kind) + 1,
                             PARAM_KINDS)
        if any(p.name == pname for p in params):
            raise ParseError(f"duplicate parameter {pname!r}", k + 1, 1)
        params.append(Param(pname, kind))
        k += 1
    # Blank out consumed lines so body diagnostics keep file line numbers.
    body_text = "\n" * k + "".join(lines[k:])
    p = _Parser(body_text, {q.name: q.kind for q in params})
    body = _finish(p, p.stmt_list())
    op = OperationAst(name, section, tuple(params), body)
    if check:
        from .analysis import check_bindings
        check_bindings(op)
    return op


def parse_operations(text: str) -> list[OperationAst]:
    return [parse_operation("\n" * (start - 1) + chunk)
            for start, chunk in split_operations(text)]
