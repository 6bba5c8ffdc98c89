"""Pretty-printer producing text that parses back to the same AST."""
from __future__ import annotations

import re

from .ast import (
    CPSR, SPSR, Assign, BinOp, BitRange, Block, Case, Const, Exp, Flag, For,
    Fun, If, IfExp, Memory, OldFlag, OldParam, OperationAst, Proc, Reg, Stm,
    UnpredictableStm, Var,
)
from .parser import PRECEDENCE

INDENT = "    "
_UNARY = 9
_ATOM = 10
_REG_VAR = re.compile(r"^[a-z][A-Za-z0-9_]*$")
_REG_NAMES = {13: "SP", 14: "LR", 15: "PC"}
_SUGAR = {
    "CarryFrom_add": ("CarryFrom", "+"),
    "OverflowFrom_add": ("OverflowFrom", "+"),
    "BorrowFrom_sub": ("BorrowFrom", "-"),
    "OverflowFrom_sub": ("OverflowFrom", "-"),
}


def _prec(e: Exp) -> int:
    if isinstance(e, IfExp):
        return 0
    if isinstance(e, BinOp):
        return PRECEDENCE[e.op]
    if isinstance(e, Fun) and e.name in ("NOT", "NOT_bit"):
        return _UNARY
    return _ATOM


def _wrap(e: Exp, min_prec: int) -> str:
    s = format_exp(e)
    return f"({s})" if _prec(e) < min_prec else s


def format_exp(e: Exp) -> str:
    match e:
        case Const(value=v):
            return str(v) if v < 64 else f"{v:#x}"
        case Var(name=n):
            return n
        case Reg(index=Var(name=n), mode=None) if _REG_VAR.match(n):
            return f"R{n}"
        case Reg(index=Const(value=k), mode=None) if 0 <= k <= 15:
            return _REG_NAMES.get(k, f"R{k}")
        case Reg(index=i, mode=m):
            return f"Reg[{format_exp(i)}, {m}]" if m else f"Reg[{format_exp(i)}]"
        case CPSR():
            return "CPSR"
        case SPSR(mode=m):
            return f"SPSR_{m}" if m else "SPSR"
        case Memory(addr=a, size=n):
            return f"Memory[{format_exp(a)}, {n}]"
        case Flag(name=n):
            return f"{n} Flag"
        case OldParam(name=n):
            return f"old(R{n})"
        case OldFlag(name=n):
            return f"old({n} Flag)"
        case BinOp(left=l, op=op, right=r):
            p = PRECEDENCE[op]
            return f"{_wrap(l, p)} {op} {_wrap(r, p + 1)}"
        case IfExp(cond=c, then=t, orelse=o):
            return f"if {_wrap(c, 1)} then {_wrap(t, 1)} else {format_exp(o)}"
        case BitRange(exp=x, hi=hi, lo=lo):
            inner = _wrap(x, _ATOM)
            return f"{inner}[{hi}]" if hi == lo else f"{inner}[{hi}:{lo}]"
        case Fun(name="NOT" | "NOT_bit", args=(x,)):
            if isinstance(x, (Flag, OldFlag)) or _prec(x) < _UNARY:
                return f"NOT({format_exp(x)})"
            return f"NOT {format_exp(x)}"
        case Fun(name=name, args=args):
            stem = name.rstrip("23")
            if stem in _SUGAR:
                fname, op = _SUGAR[stem]
                p = PRECEDENCE[op]
                terms = [_wrap(args[0], p)] + [_wrap(a, p + 1) for a in args[1:]]
                return f"{fname}({f' {op} '.join(terms)})"
            return f"{name}({', '.join(format_exp(a) for a in args)})"
    raise TypeError(f"not an expression: {e!r}")


# ---- statements ---------------------------------------------------------------------
#
# ``ctx`` describes what follows a statement: ("eof"|"more"|"else"|"end", same_line).
# An ``if``/``for`` gets an explicit ``end`` exactly when the parser would
# otherwise attach the following token to its last block.

Line = tuple[int, str]


def _final_block(s: Stm) -> Stm:
    if isinstance(s, If):
        return s.orelse if s.orelse is not None else s.then
    return s.body


def _needs_end(s: Stm, ctx) -> bool:
    kind, same_line = ctx
    multi = isinstance(_final_block(s), Block)
    if kind == "more":
        return multi
    if kind == "else":
        if isinstance(s, If) and s.orelse is not None:
            return False
        then = s.then if isinstance(s, If) else s.body
        return isinstance(then, Block) or same_line
    if kind == "end":
        return multi or same_line
    return False


def _append(lines: list[Line], text: str) -> list[Line]:
    # A trailing ``;`` would separate the line from what is appended to it.
    ind, last = lines[-1]
    return lines[:-1] + [(ind, last.removesuffix(";") + text)]


def _inline(prefix: str, body: list[Line], indent: int) -> list[Line]:
    first_ind, first = body[0]
    return [(indent, prefix + first)] + body[1:]


def _render_block(b: Stm, indent: int, header: str, ctx) -> list[Line]:
    """Render ``header`` followed by block ``b`` (multi-line if it is a Block)."""
    if isinstance(b, Block):
        return [(indent, header)] + _render_list(b.body, indent + 1, ctx)
    return _inline(header + " ", _render(b, indent, ctx), indent)


def _render_list(stms, indent: int, ctx) -> list[Line]:
    out: list[Line] = []
    for i, s in enumerate(stms):
        sub_ctx = ctx if i == len(stms) - 1 else ("more", False)
        out += _render(s, indent, sub_ctx)
    return out


def _render(s: Stm, indent: int, ctx) -> list[Line]:
    match s:
        case Assign(dst=d, src=src):
            return [(indent, f"{format_exp(d)} = {format_exp(src)};")]
        case UnpredictableStm():
            return [(indent, "UNPREDICTABLE")]
        case Proc(name=n, args=args):
            return [(indent, f"{n}({', '.join(format_exp(a) for a in args)});")]
        case Block(body=body):
            # A bare block only occurs at top level.
            return _render_list(body, indent, ctx)
        case Case(exp=x, arms=arms, default=d):
            out = [(indent, f"case {format_exp(x)} of")]
            arm_ctx = ("eof", False)
            for v, a in arms:
                out += _render_block(a, indent + 1, f"{v}:", arm_ctx)
            if d != Block(()):
                out += _render_block(d, indent + 1, "otherwise:", arm_ctx)
            return out + [(indent, "endcase")]
        case If() | For():
            end = _needs_end(s, ctx)
            final = _final_block(s)
            final_ctx = ("end", isinstance(final, Block) is False) if end else ctx
            if isinstance(s, For):
                head = f"for {s.counter} = {format_exp(s.start)} to {format_exp(s.stop)} do"
                out = _render_block(s.body, indent, head, final_ctx)
            else:
                head = f"if {format_exp(s.cond)} then"
                if s.orelse is None:
                    out = _render_block(s.then, indent, head, final_ctx)
                else:
                    then_multi = isinstance(s.then, Block)
                    out = _render_block(s.then, indent, head, ("else", not then_multi))
                    if then_multi:
                        out += _render_block(s.orelse, indent, "else", final_ctx)
                    else:
                        tail = _render_block(s.orelse, indent, "else", final_ctx)
                        out = _append(out, " " + tail[0][1]) + tail[1:]
            if end:
                if isinstance(final, Block):
                    out.append((indent, "end"))
                else:
                    out = _append(out, " end")
            return out
    raise TypeError(f"not a statement: {s!r}")


def format_stm(s: Stm) -> str:
    return "\n".join(INDENT * i + text for i, text in _render(s, 0, ("eof", False)))


def format_operation(op: OperationAst) -> str:
    lines = [f"{op.section} {op.name}"]
    lines += [f"param {p.name} : {p.kind}" for p in op.params]
    lines.append(format_stm(op.body))
    return "\n".join(lines) + "\n"
