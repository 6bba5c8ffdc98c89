"""Static passes over operation ASTs."""
from __future__ import annotations

import functools
from dataclasses import replace

from .ast import (
    Assign, BinOp, BitRange, Block, Case, CPSR, Const, Exp, Flag, For, Fun, If, IfExp, Memory,
    OldFlag, OldParam, OperationAst, Proc, Reg, SPSR, Stm, Var,
    stm_exps, sub_exps, walk_exp, walk_stm,
)
from .lexer import ParseError


# ---- binding check ---------------------------------------------------------------

def check_bindings(op: OperationAst) -> None:
    """Reject reads of names that are neither parameters nor assigned on every path."""
    kinds = {p.name: p.kind for p in op.params}

    def check_exp(e: Exp, defined: frozenset):
        for x in walk_exp(e):
            if isinstance(x, Var) and x.name not in defined:
                raise ParseError(f"{op.ident}: unbound variable {x.name!r}")
            if isinstance(x, OldParam) and kinds.get(x.name) != "register-index":
                raise ParseError(f"{op.ident}: old({x.name}) needs a register-index parameter")

    def lvalue_reads(dst: Exp) -> tuple[Exp, ...]:
        if isinstance(dst, Var):
            return ()
        if isinstance(dst, BitRange):
            return sub_exps(dst.exp)
        return sub_exps(dst)

    def visit(s: Stm, defined: frozenset) -> frozenset:
        match s:
            case Assign(dst=dst, src=src):
                check_exp(src, defined)
                for e in lvalue_reads(dst):
                    check_exp(e, defined)
                if isinstance(dst, Var):
                    return defined | {dst.name}
                return defined
            case If(cond=c, then=t, orelse=o):
                check_exp(c, defined)
                d1 = visit(t, defined)
                d2 = visit(o, defined) if o is not None else defined
                return d1 & d2
            case For(counter=k, start=a, stop=b, body=body):
                check_exp(a, defined)
                check_exp(b, defined)
                visit(body, defined | {k})
                return defined
            case Case(exp=x, arms=arms, default=d):
                check_exp(x, defined)
                outs = [visit(a, defined) for _, a in arms] + [visit(d, defined)]
                return frozenset.intersection(*outs)
            case Block(body=body):
                for sub in body:
                    defined = visit(sub, defined)
                return defined
            case Proc(args=args):
                for a in args:
                    check_exp(a, defined)
        return defined

    visit(op.body, frozenset(kinds))


# ---- entry-value rewriting --------------------------------------------------------

def _writes(s: Stm) -> set:
    """Register and flag locations assigned anywhere inside ``s``."""
    out = set()
    for x in walk_stm(s):
        if isinstance(x, Assign):
            dst = x.dst.exp if isinstance(x.dst, BitRange) else x.dst
            if isinstance(dst, Reg):
                out.add(("reg", dst))
            elif isinstance(dst, Flag):
                out.add(("flag", dst.name))
    return out


def resolve_old_params(op: OperationAst) -> OperationAst:
    """Make operand reads refer to operation-entry values where needed.

    * A read ``R<p>`` of register parameter ``p`` becomes ``old(R<p>)`` once a
      different register location has possibly been written, since that
      write may alias ``R<p>``.  After a write to ``R<p>`` itself the read
      keeps the new value.
    * A flag read after a possible write of the same flag becomes
      ``old(<flag> Flag)``: the manual computes every flag of a
      data-processing result from the pre-instruction operands.
    """
    reg_params = {p.name for p in op.params if p.kind == "register-index"}

    def rewrite(e: Exp, written: frozenset) -> Exp:
        match e:
            case Reg(index=Var(name=p), mode=None) if p in reg_params:
                regs = {w[1] for w in written if w[0] == "reg"}
                if e not in regs and regs:
                    return OldParam(p)
                return e
            case Flag(name=n):
                return OldFlag(n) if ("flag", n) in written else e
        return _rebuild(e, lambda x: rewrite(x, written))

    def rewrite_lvalue(dst: Exp, written: frozenset) -> Exp:
        # Only sub-expressions of an lvalue are reads; the location itself is not.
        if isinstance(dst, BitRange):
            return replace(dst, exp=rewrite_lvalue(dst.exp, written))
        if isinstance(dst, Reg):
            return replace(dst, index=rewrite(dst.index, written))
        if isinstance(dst, Memory):
            return replace(dst, addr=rewrite(dst.addr, written))
        return dst

    def visit(s: Stm, written: frozenset) -> tuple[Stm, frozenset]:
        match s:
            case Assign(dst=dst, src=src):
                new = Assign(rewrite_lvalue(dst, written), rewrite(src, written))
                return new, written | _writes(s)
            case If(cond=c, then=t, orelse=o):
                c2 = rewrite(c, written)
                t2, w1 = visit(t, written)
                if o is None:
                    return If(c2, t2, None), w1 | written
                o2, w2 = visit(o, written)
                return If(c2, t2, o2), w1 | w2
            case For(counter=k, start=a, stop=b, body=body):
                inside = written | _writes(body)
                body2, _ = visit(body, inside)
                return For(k, rewrite(a, written), rewrite(b, written), body2), inside
            case Case(exp=x, arms=arms, default=d):
                x2 = rewrite(x, written)
                out = set(written)
                new_arms = []
                for v, a in arms:
                    a2, w = visit(a, written)
                    new_arms.append((v, a2))
                    out |= w
                d2, w = visit(d, written)
                out |= w
                return Case(x2, tuple(new_arms), d2), frozenset(out)
            case Block(body=body):
                new_body = []
                for sub in body:
                    sub2, written = visit(sub, written)
                    new_body.append(sub2)
                return Block(tuple(new_body)), written
            case Proc(name=n, args=args):
                return Proc(n, tuple(rewrite(a, written) for a in args)), written
        return s, written

    body, _ = visit(op.body, frozenset())
    return replace(op, body=body)


def _rebuild(e: Exp, fn) -> Exp:
    match e:
        case Reg(index=i, mode=m):
            return Reg(fn(i), m)
        case Memory(addr=a, size=n):
            return Memory(fn(a), n)
        case BinOp(left=l, op=o, right=r):
            return BinOp(fn(l), o, fn(r))
        case IfExp(cond=c, then=t, orelse=o):
            return IfExp(fn(c), fn(t), fn(o))
        case Fun(name=n, args=args):
            return Fun(n, tuple(fn(a) for a in args))
        case BitRange(exp=x, hi=hi, lo=lo):
            return BitRange(fn(x), hi, lo)
    return e


# ---- write sets -------------------------------------------------------------------

@functools.lru_cache(maxsize=256)
def write_targets(op: OperationAst) -> tuple[Exp, ...]:
    """Every location an operation body may assign (locals excluded)."""
    return tuple(s.dst for s in walk_stm(op.body)
                 if isinstance(s, Assign) and not isinstance(s.dst, Var))


def register_written(target: Exp, args: dict[str, int]) -> int | None:
    """Register index a target writes, if statically known from ``args``.

    Returns ``None`` when the target is not a register, ``-1`` when it is a
    register whose index cannot be determined statically.
    """
    if isinstance(target, BitRange):
        target = target.exp
    if not isinstance(target, Reg):
        return None
    idx = target.index
    if isinstance(idx, Const):
        return idx.value
    if isinstance(idx, Var) and idx.name in args:
        return args[idx.name]
    return -1


def may_branch(op: OperationAst, args: dict[str, int]) -> bool:
    """Whether executing ``op`` with ``args`` can write the PC."""
    for t in write_targets(op):
        r = register_written(t, args)
        if r == 15 or r == -1:
            return True
    return False


def reads_entry_values(op: OperationAst) -> tuple[set[str], set[str]]:
    """Register parameters and flags read through ``old(...)``."""
    regs, flags = set(), set()
    for s in walk_stm(op.body):
        for e in stm_exps(s):
            for x in walk_exp(e):
                if isinstance(x, OldParam):
                    regs.add(x.name)
                elif isinstance(x, OldFlag):
                    flags.add(x.name)
    return regs, flags


def uses_cpsr_or_spsr(op: OperationAst) -> bool:
    return any(isinstance(t, (CPSR, SPSR)) for t in write_targets(op))
