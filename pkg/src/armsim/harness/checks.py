"""Differential checks between the reference interpreter and the fast engine."""
from __future__ import annotations

import threading
from dataclasses import dataclass
from types import MappingProxyType

import numpy as np

from ..catalog import builtin
from ..decoder import DecodedInstr, disassemble
from ..fast import runtime as rt
from ..fast.engine import FastEngine, FastProcessor
from ..pseudocode.analysis import register_written
from ..pseudocode.ast import (
    CPSR, SPSR, Assign, BinOp, BitRange, Block, Case, Const, Exp, Flag, For, Fun, If, IfExp,
    Memory, Reg, Stm, Var,
)
from ..reference import ReferenceEngine, binop, eval_exp
from ..state import (
    BANKING, FLAG_NAMES, SPSR_MODES, Ok, ProcessorMode, RefState, SemState, Unimplemented,
    Unpredictable, outcome_class, phys_name,
)
from .generators import SeedRng, random_state


# ---- verdicts ---------------------------------------------------------------------

@dataclass(frozen=True)
class Pass:
    ok = True


@dataclass(frozen=True)
class Mismatch:
    """Both engines succeeded but disagree; ``diff`` is (component, ref value, fast value)."""
    instr: DecodedInstr | None
    seed: int | None
    diff: tuple[tuple[str, object, object], ...]
    ok = False

    @property
    def components(self) -> tuple[str, ...]:
        return tuple(c for c, _, _ in self.diff)


@dataclass(frozen=True)
class OutcomeDisagree:
    instr: DecodedInstr | None
    seed: int | None
    ref_outcome: str
    fast_outcome: str
    ok = False


Verdict = Pass | Mismatch | OutcomeDisagree
PASS = Pass()


def describe(v: Verdict) -> str:
    if isinstance(v, Pass):
        return "pass"
    where = disassemble(v.instr) if v.instr is not None else "?"
    if isinstance(v, OutcomeDisagree):
        return f"outcome disagree on {where}: ref={v.ref_outcome} fast={v.fast_outcome}"
    parts = ", ".join(f"{c}: ref={_fmt(a)} fast={_fmt(b)}" for c, a, b in v.diff)
    return f"mismatch on {where}: {parts}"


def _fmt(v) -> str:
    return f"{v:#x}" if isinstance(v, int) else str(v)


# ---- state comparison ----------------------------------------------------------------

def component_name(index: int) -> str:
    return "pc" if index == 15 else phys_name(index)


def state_diff(a: RefState, b: RefState) -> list[tuple[str, object, object]]:
    """Every component where ``a`` and ``b`` differ, in a fixed order."""
    out = []
    if a.regs != b.regs:
        for i, (x, y) in enumerate(zip(a.regs, b.regs)):
            if x != y:
                out.append((component_name(i), x, y))
    if a.cpsr != b.cpsr:
        for f in FLAG_NAMES:
            x, y = a.cpsr.flag(f), b.cpsr.flag(f)
            if x != y:
                out.append((f"{f}_flag", x, y))
        if a.cpsr.mode != b.cpsr.mode:
            out.append(("mode", a.cpsr.mode.name, b.cpsr.mode.name))
        if a.cpsr.other != b.cpsr.other:
            out.append(("cpsr_other", a.cpsr.other, b.cpsr.other))
    if a.spsr != b.spsr:
        for m in SPSR_MODES:
            if a.spsr[m] != b.spsr[m]:
                out.append((f"spsr_{m.name}", a.spsr[m].pack(), b.spsr[m].pack()))
    if a.mem != b.mem:
        for addr in sorted(set(a.mem) | set(b.mem)):
            x, y = a.mem.get(addr, 0), b.mem.get(addr, 0)
            if x != y:
                out.append((f"mem[{addr:#010x}]", x, y))
    return out


# ---- per-thread engines ----------------------------------------------------------------

class Context:
    """Engines and a reusable processor; one per thread."""

    def __init__(self, invert: tuple[str, str] | None = None):
        self.ref = ReferenceEngine()
        self.fast = FastEngine.get(invert=invert)
        self.proc = FastProcessor(self.fast)


_local = threading.local()


def default_context(invert: tuple[str, str] | None = None) -> Context:
    cache = getattr(_local, "contexts", None)
    if cache is None:
        cache = _local.contexts = {}
    if invert not in cache:
        cache[invert] = Context(invert)
    return cache[invert]


# ---- commutation with projection -----------------------------------------------------

def reference_step(ctx: Context, instr: DecodedInstr, st: RefState) -> tuple[str, RefState | None]:
    res = ctx.ref.execute(instr, st)
    if not isinstance(res, Ok):
        return outcome_class(res), None
    new = res.st
    if res.sem.bo:
        new = new.with_pc(st.pc + 4)
    return "ok", new


def check_state(instr: DecodedInstr, st: RefState, ctx: Context | None = None,
                seed: int | None = None, loaded: bool = False) -> Verdict:
    """Run ``instr`` on ``st`` in both engines and compare.

    ``loaded`` says ``ctx.proc`` already holds a state projecting to ``st``.
    """
    ctx = ctx or default_context()
    if not loaded:
        ctx.proc.load_ref(st)
    ref_out, ref_st = reference_step(ctx, instr, st)
    fast_out, _ = ctx.proc.execute(instr)
    if ref_out != fast_out:
        return OutcomeDisagree(instr, seed, ref_out, fast_out)
    if ref_out != "ok":
        return PASS
    if not np.all(ctx.proc.flags <= 1):
        return Mismatch(instr, seed, (("flag_bytes", 1, int(ctx.proc.flags.max())),))
    diff = state_diff(ref_st, ctx.proc.project())
    return Mismatch(instr, seed, tuple(diff)) if diff else PASS


def check_commutes(instr: DecodedInstr, seed: int, ctx: Context | None = None) -> Verdict:
    """Fast execution followed by projection equals reference execution after projection."""
    ctx = ctx or default_context()
    st, _ = random_state(seed, ctx.proc)
    return check_state(instr, st, ctx, seed, loaded=True)


# ---- footprint and frame ------------------------------------------------------------

def static_value(e: Exp, args: dict[str, int]) -> int | None:
    """Value of ``e`` if it depends only on ``args``, else ``None``."""
    match e:
        case Const(value=v):
            return v
        case Var(name=n):
            return args.get(n)
        case BinOp(left=l, op="and", right=r):
            a = static_value(l, args)
            if a == 0:
                return 0
            b = static_value(r, args)
            if b == 0:
                return 0
            return None if a is None or b is None else 1
        case BinOp(left=l, op="or", right=r):
            a = static_value(l, args)
            b = static_value(r, args)
            if a or b:
                return 1
            return None if a is None or b is None else 0
        case BinOp(left=l, op=op, right=r):
            a, b = static_value(l, args), static_value(r, args)
            return None if a is None or b is None else binop(op, a, b)
        case IfExp(cond=c, then=t, orelse=o):
            v = static_value(c, args)
            return None if v is None else static_value(t if v else o, args)
        case BitRange(exp=x, hi=hi, lo=lo):
            v = static_value(x, args)
            return None if v is None else (v >> lo) & ((1 << (hi - lo + 1)) - 1)
    return None


def _reachable_assigns(s: Stm, args: dict[str, int]):
    match s:
        case Assign():
            yield s
        case Block(body=body):
            for sub in body:
                yield from _reachable_assigns(sub, args)
        case If(cond=c, then=t, orelse=o):
            v = static_value(c, args)
            if v != 0:
                yield from _reachable_assigns(t, args)
            if v is None or v == 0:
                if o is not None:
                    yield from _reachable_assigns(o, args)
        case For(body=b):
            yield from _reachable_assigns(b, args)
        case Case(arms=arms, default=d):
            for _, arm in arms:
                yield from _reachable_assigns(arm, args)
            yield from _reachable_assigns(d, args)


ALL_REGS = frozenset(component_name(i) for i in range(31))
CPSR_PARTS = frozenset([f"{f}_flag" for f in FLAG_NAMES] + ["mode", "cpsr_other"])


def footprint(instr: DecodedInstr, st: RefState, ctx: Context | None = None) -> frozenset[str]:
    """Components ``instr`` may write when run on ``st``; memory appears as ``mem``.

    Branches whose guard depends only on instruction fields are pruned, and
    a failing condition field leaves only the PC.
    """
    ctx = ctx or default_context()
    spec = ctx.ref._ops[instr.op]
    args = instr.as_dict()
    out = {"pc"}
    cond = args.get("cond", 14)
    if cond != 15:
        if not builtin("ConditionPassed", [cond], st):
            return frozenset(out)
    for a in _reachable_assigns(spec.resolved.body, args):
        dst = a.dst.exp if isinstance(a.dst, BitRange) else a.dst
        match dst:
            case Reg(mode=m):
                r = register_written(dst, args)
                if r == -1:
                    out |= ALL_REGS
                elif r is not None:
                    out.add(component_name(BANKING[ProcessorMode[m] if m else st.mode][r]))
            case Flag(name=n):
                out.add(f"{n}_flag")
            case CPSR():
                out |= CPSR_PARTS
            case SPSR(mode=m):
                out.add(f"spsr_{m or st.mode.name}")
            case Memory():
                out.add("mem")
    return frozenset(out)


def _outside(changes, fp: frozenset[str]) -> list:
    return [d for d in changes
            if d[0] not in fp and not (d[0].startswith("mem[") and "mem" in fp)]


def check_frame(instr: DecodedInstr, seed: int, ctx: Context | None = None) -> Verdict:
    """Everything outside the footprint is untouched, in the fast engine and the reference."""
    ctx = ctx or default_context()
    before, proc = random_state(seed, ctx.proc)
    fp = footprint(instr, before, ctx)
    out, _ = proc.execute(instr)
    after = proc.project()
    bad = _outside(state_diff(before, after), fp)
    if bad:
        return Mismatch(instr, seed, tuple(bad))
    ref_out, ref_st = reference_step(ctx, instr, before)
    if ref_out != out:
        return OutcomeDisagree(instr, seed, ref_out, out)
    if ref_st is not None:
        bad = _outside(state_diff(before, ref_st), fp)
        if bad:
            return Mismatch(instr, seed, tuple(bad))
    return PASS


# ---- purity and agreement ------------------------------------------------------------

def _snapshot(proc: FastProcessor) -> list[np.ndarray]:
    return [a.copy() for a in proc.state_arrays]


def _mutations(proc: FastProcessor, snap: list[np.ndarray]) -> tuple:
    names = ("regs", "flags", "ctrl", "phys", "spsr", "pagetab", "pages", "slot_page", "tags")
    return tuple((n, "before", "after") for n, a, b in zip(names, snap, proc.state_arrays)
                 if not np.array_equal(a, b))


def _ref_condition(cond: int, st: RefState) -> str | int:
    v = eval_exp(_COND_EXP[cond], st, SemState(st))
    return outcome_class(v) if isinstance(v, (Unpredictable, Unimplemented)) else v


def _fast_condition(cond: int, proc: FastProcessor) -> str | int:
    try:
        return int(rt.condition_passed(proc.flags, cond))
    except rt.Fault as f:
        return "unpredictable" if int(f.args[0]) == rt.K_UNPREDICTABLE else "not_implemented"


_COND_EXP = tuple(Fun("ConditionPassed", (Const(c),)) for c in range(16))


def check_condition_purity_and_agreement(cond: int, seed: int | None = None,
                                         ctx: Context | None = None,
                                         flags: tuple[int, int, int, int] | None = None) -> Verdict:
    """The fast condition test mutates nothing and agrees with the reference.

    ``flags`` overrides the random N, Z, C, V for exhaustive runs.
    """
    ctx = ctx or default_context()
    st, proc = random_state(seed or 0, ctx.proc)
    if flags is not None:
        proc.flags[:] = flags
        st = proc.project()
    snap = _snapshot(proc)
    fast = _fast_condition(cond, proc)
    mutated = _mutations(proc, snap)
    if mutated:
        return Mismatch(None, seed, mutated)
    ref = _ref_condition(cond, st)
    if ref != fast:
        return OutcomeDisagree(None, seed, str(ref), str(fast))
    return PASS


def check_expression_purity(mnemonic: str, k: int, seed: int,
                            ctx: Context | None = None) -> Verdict:
    """Evaluating expression ``k`` of ``mnemonic``'s body mutates nothing and agrees."""
    ctx = ctx or default_context()
    st, proc = random_state(seed, ctx.proc)
    rng = SeedRng(seed ^ 0x5EED)
    spec = ctx.ref._ops[mnemonic]
    args = {}
    for p in spec.resolved.params:
        if p.kind == "register-index":
            args[p.name] = rng.randrange(16)
        elif p.kind in ("bit", "condition"):
            args[p.name] = rng.randrange(2 if p.kind == "bit" else 16)
        else:
            args[p.name] = rng.getrandbits(32)
    snap = _snapshot(proc)
    fast = proc.probe(mnemonic, k, args)
    mutated = _mutations(proc, snap)
    if mutated:
        return Mismatch(None, seed, mutated)
    e = ctx.fast.probes(mnemonic)[k]
    ref = eval_exp(e, st, SemState(st, MappingProxyType(args)))
    ref_v = (outcome_class(ref),) if isinstance(ref, (Unpredictable, Unimplemented)) else ref
    fast_v = (fast[0],) if isinstance(fast, tuple) else fast
    if ref_v != fast_v:
        return OutcomeDisagree(None, seed, f"{mnemonic}[{k}]={ref_v}", f"{fast_v}")
    return PASS
