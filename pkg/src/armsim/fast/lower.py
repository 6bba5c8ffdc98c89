"""Lowering of operation ASTs to compiled-engine source.

``Lowerer.exp`` and ``Lowerer.stm`` follow the AST constructor by
constructor, the way the manual's expressions map onto C calls in a
generated simulator:

=====================  =============================================
AST                    lowered form
=====================  =============================================
Reg(e)                 ``regs[e]`` (range-checked unless e is static)
Reg(e, m)              ``rt.get_reg_m(..., e, <mode bits>)``
Assign(Reg(e), v)      ``rt.set_reg_or_pc(regs, ctrl, e, v)``
CPSR / SPSR(m)         ``rt.read_cpsr`` / ``rt.read_spsr``
Assign(CPSR, SPSR)     ``rt.write_cpsr(..., rt.read_spsr(...))``
Flag f                 ``flags[i]`` byte
OldParam p             ``old_p`` captured before the body runs
OldFlag f              ``old_flag_f`` captured before the body runs
Fun(name, args)        ``rt.<primitive>(args)``
UnpredictableStm       ``raise Fault(UNPREDICTABLE, ...)``
=====================  =============================================

The generated text is ordinary Python over numpy arrays, so the same code
runs compiled (numba) or interpreted.
"""
from __future__ import annotations

from dataclasses import dataclass

from ..pseudocode.ast import (
    CPSR, SPSR, Assign, BinOp, BitRange, Block, Case, Const, Exp, Flag, For, Fun, If, IfExp,
    Memory, OldFlag, OldParam, OperationAst, Param, Proc, Reg, Stm, UnpredictableStm, Var,
    stm_exps, sub_stms, walk_exp, walk_stm,
)
from ..state import ProcessorMode
from . import runtime as rt

STATE_ARGS = ("regs", "flags", "ctrl", "phys", "spsr", "pagetab", "pages", "slot_page", "tags")
FLAG_INDEX = {"N": 0, "Z": 1, "C": 2, "V": 3}

# Two-operand forms call the three-operand primitive with a zero carry/borrow.
_PRIMS = {
    "CarryFrom_add2": "carry_from_add3", "CarryFrom_add3": "carry_from_add3",
    "OverflowFrom_add2": "overflow_from_add3", "OverflowFrom_add3": "overflow_from_add3",
    "BorrowFrom_sub2": "borrow_from_sub3", "BorrowFrom_sub3": "borrow_from_sub3",
    "OverflowFrom_sub2": "overflow_from_sub3", "OverflowFrom_sub3": "overflow_from_sub3",
    "get_bit": "get_bit", "SignExtend": "sign_extend",
}


class LoweringError(ValueError):
    pass


def _mode_bits(name: str | None) -> int:
    return ProcessorMode[name].value if name else 0


@dataclass
class Lowered:
    """Source of one lowered operation plus what the engine needs to call it."""
    name: str
    func_name: str
    params: tuple[str, ...]
    source: str


class Lowerer:
    def __init__(self, op: OperationAst, invert_flag: str | None = None):
        self.op = op
        self.kinds = {p.name: p.kind for p in op.params}
        self.invert_flag = invert_flag
        self._tmp = 0

    def tmp(self) -> str:
        self._tmp += 1
        return f"_t{self._tmp}"

    # -- expressions ------------------------------------------------------------------

    def reg_index(self, e: Exp) -> tuple[str, bool]:
        """Index source and whether it is statically within 0..15."""
        if isinstance(e, Const) and 0 <= e.value <= 15:
            return str(e.value), True
        if isinstance(e, Var) and self.kinds.get(e.name) == "register-index":
            return f"v_{e.name}", True
        return f"rt.check_reg({self.exp(e)})", False

    def exp(self, e: Exp) -> str:
        match e:
            case Const(value=v):
                return str(v & rt.M)
            case Var(name=n):
                return f"v_{n}"
            case Flag(name=n):
                return f"np.int64(flags[{FLAG_INDEX[n]}])"
            case OldFlag(name=n):
                return f"old_flag_{n}"
            case OldParam(name=p):
                return f"old_{p}"
            case Reg(index=i, mode=None):
                idx, _ = self.reg_index(i)
                return f"regs[{idx}]"
            case Reg(index=i, mode=m):
                return f"rt.get_reg_m(regs, ctrl, phys, {self.exp(i)}, {_mode_bits(m)})"
            case CPSR():
                return "rt.read_cpsr(flags, ctrl)"
            case SPSR(mode=m):
                return f"rt.read_spsr(ctrl, spsr, {_mode_bits(m)})"
            case Memory(addr=a, size=n):
                return f"rt.mem_read(pagetab, pages, {self.exp(a)}, {n})"
            case BinOp(left=l, op=op, right=r):
                a, b = self.exp(l), self.exp(r)
                if op == "+":
                    return f"(({a} + {b}) & M)"
                if op == "-":
                    return f"(({a} - {b}) & M)"
                if op == "==":
                    return f"(1 if {a} == {b} else 0)"
                if op == "!=":
                    return f"(1 if {a} != {b} else 0)"
                if op in ("AND", "OR", "EOR"):
                    sym = {"AND": "&", "OR": "|", "EOR": "^"}[op]
                    return f"({a} {sym} {b})"
                if op == "<<":
                    return f"rt.shl({a}, {b})"
                if op == ">>":
                    return f"rt.shr({a}, {b})"
                if op == "and":
                    return f"(1 if ({a}) != 0 and ({b}) != 0 else 0)"
                if op == "or":
                    return f"(1 if ({a}) != 0 or ({b}) != 0 else 0)"
                raise LoweringError(f"{self.op.ident}: operator {op!r} has no lowering")
            case IfExp(cond=c, then=t, orelse=o):
                return f"({self.exp(t)} if ({self.exp(c)}) != 0 else {self.exp(o)})"
            case BitRange(exp=x, hi=hi, lo=lo):
                return f"(({self.exp(x)} >> {lo}) & {(1 << (hi - lo + 1)) - 1})"
            case Fun(name=name, args=args):
                return self.fun(name, [self.exp(a) for a in args])
        raise LoweringError(f"{self.op.ident}: no lowering for expression {type(e).__name__}")

    def fun(self, name: str, args: list[str]) -> str:
        if name == "ConditionPassed":
            return f"rt.condition_passed(flags, {args[0]})"
        if name == "CurrentModeHasSPSR":
            return "rt.has_spsr(ctrl)"
        if name == "NOT":
            return f"(M ^ {args[0]})"
        if name == "NOT_bit":
            return f"(1 ^ ({args[0]} & 1))"
        if name in _PRIMS:
            prim = _PRIMS[name]
            if prim.endswith("3"):
                args = args + ["0"] * (3 - len(args))
            return f"rt.{prim}({', '.join(args)})"
        raise LoweringError(f"{self.op.ident}: primitive {name!r} has no lowering")

    # -- statements -------------------------------------------------------------------

    def stm(self, s: Stm, ind: int) -> list[str]:
        pad = "    " * ind
        match s:
            case Block(body=body):
                out = []
                for sub in body:
                    out += self.stm(sub, ind)
                return out or [pad + "pass"]
            case Assign(dst=dst, src=src):
                return self.assign(dst, src, pad)
            case If(cond=c, then=t, orelse=o):
                out = [f"{pad}if ({self.exp(c)}) != 0:"] + self.stm(t, ind + 1)
                if o is not None:
                    out += [f"{pad}else:"] + self.stm(o, ind + 1)
                return out
            case For(counter=k, start=a, stop=b, body=body):
                return ([f"{pad}for v_{k} in range({self.exp(a)}, {self.exp(b)} + 1):"]
                        + self.stm(body, ind + 1))
            case Case(exp=x, arms=arms, default=d):
                t = self.tmp()
                out = [f"{pad}{t} = {self.exp(x)}"]
                kw = "if"
                for label, arm in arms:
                    out += [f"{pad}{kw} {t} == {label}:"] + self.stm(arm, ind + 1)
                    kw = "elif"
                if arms:
                    out += [f"{pad}else:"] + self.stm(d, ind + 1)
                else:
                    out += self.stm(d, ind)
                return out
            case UnpredictableStm():
                return [f"{pad}raise Fault({rt.K_UNPREDICTABLE}, {rt.E_STMT})"]
            case Proc(name="Todo"):
                return [f"{pad}raise Fault({rt.K_NOT_IMPLEMENTED}, {rt.E_TODO})"]
        raise LoweringError(f"{self.op.ident}: no lowering for statement {type(s).__name__}")

    def assign(self, dst: Exp, src: Exp, pad: str) -> list[str]:
        if isinstance(dst, Var):
            return [f"{pad}v_{dst.name} = ({self.exp(src)}) & M"]
        t = self.tmp()
        out = [f"{pad}{t} = {self.exp(src)}"]
        match dst:
            case Flag(name=n):
                v = f"({t} & 1)"
                if n == self.invert_flag:
                    v = f"(1 - {v})"
                out.append(f"{pad}flags[{FLAG_INDEX[n]}] = {v}")
            case Reg(index=i, mode=None):
                idx, _ = self.reg_index(i)
                out.append(f"{pad}rt.set_reg_or_pc(regs, ctrl, {idx}, {t})")
            case Reg(index=i, mode=m):
                out.append(f"{pad}rt.set_reg_m(regs, ctrl, phys, {self.exp(i)}, {_mode_bits(m)}, {t})")
            case BitRange(exp=Reg(index=i, mode=m), hi=hi, lo=lo):
                r = self.tmp()
                out.append(f"{pad}{r} = rt.check_reg({self.exp(i)})")
                mb = _mode_bits(m)
                old = f"rt.get_reg_m(regs, ctrl, phys, {r}, {mb})" if m else f"regs[{r}]"
                new = f"rt.set_bit_range({old}, {hi}, {lo}, {t})"
                if m:
                    out.append(f"{pad}rt.set_reg_m(regs, ctrl, phys, {r}, {mb}, {new})")
                else:
                    out.append(f"{pad}rt.set_reg_or_pc(regs, ctrl, {r}, {new})")
            case CPSR():
                out.append(f"{pad}rt.write_cpsr(regs, flags, ctrl, phys, {t})")
            case SPSR(mode=m):
                out.append(f"{pad}rt.write_spsr(ctrl, spsr, {_mode_bits(m)}, {t})")
            case Memory(addr=a, size=n):
                out.append(f"{pad}rt.mem_write(pagetab, pages, ctrl, slot_page, tags, "
                           f"{self.exp(a)}, {n}, {t})")
            case _:
                raise LoweringError(f"{self.op.ident}: cannot assign to {type(dst).__name__}")
        return out


def _memory_writes(op: OperationAst) -> int:
    """Upper bound on fresh pages one execution can touch (loops count 64 each)."""
    def count(s: Stm, weight: int) -> int:
        match s:
            case Assign(dst=Memory()):
                return weight
            case For(body=b):
                return count(b, weight * 64)
        return sum(count(x, weight) for x in sub_stms(s))
    return count(op.body, 1)


def lower_operation(op: OperationAst, func_name: str | None = None,
                    invert_flag: str | None = None) -> Lowered:
    """Lower an old-param-resolved operation to a function definition.

    The function takes the state arrays followed by the operation's
    parameters (``v_<name>``) and mutates the state in place.
    ``invert_flag`` is a fault-injection hook: every write of that flag
    stores the complement.
    """
    lw = Lowerer(op, invert_flag)
    func_name = func_name or f"op_{op.name}"
    params = tuple(p.name for p in op.params)
    sig = ", ".join(STATE_ARGS + tuple(f"v_{p}" for p in params))
    lines = [f"def {func_name}({sig}):"]
    pages = _memory_writes(op)
    if pages:
        lines.append(f"    rt.ensure_pages(ctrl, pages, {pages})")
    lines += [f"    {line}" for line in entry_captures(op)]
    lines += lw.stm(op.body, 1)
    return Lowered(op.name, func_name, params, "\n".join(lines) + "\n")


def entry_captures(op: OperationAst) -> list[str]:
    """Statements saving the entry values that ``old(...)`` reads refer to."""
    olds, old_flags = set(), set()
    for s in walk_stm(op.body):
        for e in stm_exps(s):
            for x in walk_exp(e):
                if isinstance(x, OldParam):
                    olds.add(x.name)
                elif isinstance(x, OldFlag):
                    old_flags.add(x.name)
    return ([f"old_{p} = regs[v_{p}]" for p in sorted(olds)]
            + [f"old_flag_{f} = np.int64(flags[{FLAG_INDEX[f]}])" for f in sorted(old_flags)])


def lower_expression(e: Exp, params: dict[str, str] | None = None) -> str:
    """Source of a single expression; parameters appear as ``v_<name>``."""
    op = OperationAst("expr", "X0", tuple(Param(n, k) for n, k in (params or {}).items()), Block(()))
    return Lowerer(op).exp(e)
