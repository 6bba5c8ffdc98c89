"""Abstract syntax of instruction pseudocode.

Nodes are frozen dataclasses so trees compare structurally and can be used
as dictionary keys.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

# ---- expressions -------------------------------------------------------------


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Const:
    value: int


@dataclass(frozen=True)
class Reg:
    index: "Exp"
    mode: Optional[str] = None


@dataclass(frozen=True)
class CPSR:
    pass


@dataclass(frozen=True)
class SPSR:
    mode: Optional[str] = None


@dataclass(frozen=True)
class Memory:
    addr: "Exp"
    size: int


@dataclass(frozen=True)
class Flag:
    name: str  # one of N, Z, C, V


@dataclass(frozen=True)
class BinOp:
    left: "Exp"
    op: str
    right: "Exp"


@dataclass(frozen=True)
class IfExp:
    cond: "Exp"
    then: "Exp"
    orelse: "Exp"


@dataclass(frozen=True)
class Fun:
    name: str
    args: tuple["Exp", ...] = ()


@dataclass(frozen=True)
class BitRange:
    exp: "Exp"
    hi: int
    lo: int


@dataclass(frozen=True)
class OldParam:
    """Value of register parameter ``name`` at operation entry."""
    name: str


@dataclass(frozen=True)
class OldFlag:
    """Value of a flag at operation entry."""
    name: str


Exp = Union[Var, Const, Reg, CPSR, SPSR, Memory, Flag, BinOp, IfExp, Fun,
            BitRange, OldParam, OldFlag]

# Binary operators, canonical spelling.  Bitwise AND/OR/EOR are words in the
# source; ``and``/``or`` are the short-circuit logical forms.
BINARY_OPS = ("==", "!=", "+", "-", "AND", "OR", "EOR", "<<", ">>", "and", "or")

# ---- statements ----------------------------------------------------------------


@dataclass(frozen=True)
class Assign:
    dst: Exp
    src: Exp


@dataclass(frozen=True)
class If:
    cond: Exp
    then: "Stm"
    orelse: Optional["Stm"] = None


@dataclass(frozen=True)
class For:
    counter: str
    start: Exp
    stop: Exp
    body: "Stm"


@dataclass(frozen=True)
class Case:
    exp: Exp
    arms: tuple[tuple[int, "Stm"], ...]
    default: "Stm" = field(default_factory=lambda: Block(()))


@dataclass(frozen=True)
class Block:
    body: tuple["Stm", ...] = ()


@dataclass(frozen=True)
class UnpredictableStm:
    pass


@dataclass(frozen=True)
class Proc:
    name: str
    args: tuple[Exp, ...] = ()


Stm = Union[Assign, If, For, Case, Block, UnpredictableStm, Proc]

# ---- operations --------------------------------------------------------------------

PARAM_KINDS = ("bit", "condition", "register-index", "word")


@dataclass(frozen=True)
class Param:
    name: str
    kind: str


@dataclass(frozen=True)
class OperationAst:
    name: str          # mnemonic, e.g. "ADC"
    section: str       # manual section tag, e.g. "A4.1.2"
    params: tuple[Param, ...]
    body: Stm

    @property
    def ident(self) -> str:
        return f"{self.section} {self.name}"

    def param(self, name: str) -> Param | None:
        for p in self.params:
            if p.name == name:
                return p
        return None


# ---- traversal helpers ------------------------------------------------------------


def sub_exps(e: Exp) -> tuple[Exp, ...]:
    match e:
        case Reg(index=i):
            return (i,)
        case Memory(addr=a):
            return (a,)
        case BinOp(left=l, right=r):
            return (l, r)
        case IfExp(cond=c, then=t, orelse=o):
            return (c, t, o)
        case Fun(args=args):
            return args
        case BitRange(exp=x):
            return (x,)
    return ()


def walk_exp(e: Exp):
    yield e
    for s in sub_exps(e):
        yield from walk_exp(s)


def stm_exps(s: Stm) -> tuple[Exp, ...]:
    """Expressions appearing directly in ``s`` (not in nested statements)."""
    match s:
        case Assign(dst=d, src=src):
            return (d, src)
        case If(cond=c):
            return (c,)
        case For(start=a, stop=b):
            return (a, b)
        case Case(exp=x):
            return (x,)
        case Proc(args=args):
            return args
    return ()


def sub_stms(s: Stm) -> tuple[Stm, ...]:
    match s:
        case If(then=t, orelse=o):
            return (t,) if o is None else (t, o)
        case For(body=b):
            return (b,)
        case Case(arms=arms, default=d):
            return tuple(a for _, a in arms) + (d,)
        case Block(body=b):
            return b
    return ()


def walk_stm(s: Stm):
    yield s
    for sub in sub_stms(s):
        yield from walk_stm(sub)


def map_exps(s: Stm, fn) -> Stm:
    """Rebuild ``s`` with ``fn`` applied to every directly contained expression."""
    match s:
        case Assign(dst=d, src=src):
            return Assign(fn(d), fn(src))
        case If(cond=c, then=t, orelse=o):
            return If(fn(c), map_exps(t, fn), None if o is None else map_exps(o, fn))
        case For(counter=k, start=a, stop=b, body=body):
            return For(k, fn(a), fn(b), map_exps(body, fn))
        case Case(exp=x, arms=arms, default=d):
            return Case(fn(x), tuple((v, map_exps(a, fn)) for v, a in arms), map_exps(d, fn))
        case Block(body=b):
            return Block(tuple(map_exps(x, fn) for x in b))
        case Proc(name=n, args=args):
            return Proc(n, tuple(fn(a) for a in args))
    return s
