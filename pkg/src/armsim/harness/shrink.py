"""Minimising failing cases and the reproducer file format."""
from __future__ import annotations

from dataclasses import dataclass, replace
from types import MappingProxyType

from ..catalog import RRX, Immediate, Register, ShiftImm, ShiftReg
from ..decoder import DecodedInstr, Undefined, decode, disassemble, encode
from ..state import (
    NUM_PHYS_REGS, SPSR_MODES, Cpsr, ProcessorMode, RefState, phys_name,
)
from .checks import Context, Verdict, check_state, default_context, describe

FORMAT_HEADER = "armsim-repro 1"


@dataclass(frozen=True)
class FailingCase:
    """A seedless case: an instruction and the state it runs on."""
    instr: DecodedInstr
    state: RefState


def _fails(case: FailingCase, ctx: Context) -> bool:
    return not check_state(case.instr, case.state, ctx).ok


def _shifter_candidates(sh):
    match sh:
        case Immediate(rotate_imm=r, immed_8=i):
            if r:
                yield Immediate(0, i)
            if i:
                yield Immediate(r, 0)
        case ShiftReg(m=m) | ShiftImm(m=m) | RRX(m=m):
            yield Register(m)


def _candidates(case: FailingCase):
    """Simpler variants of ``case``, simplest first."""
    st, instr = case.state, case.instr
    if st.mem:
        yield replace(case, state=replace(st, mem=MappingProxyType({})))
    for i, v in enumerate(st.regs):
        if v:
            yield replace(case, state=st.with_phys(i, 0))
    for f in ("N", "Z", "C", "V"):
        if st.cpsr.flag(f):
            yield replace(case, state=st.with_cpsr(st.cpsr.with_flag(f, 0)))
    if st.cpsr.other:
        yield replace(case, state=st.with_cpsr(replace(st.cpsr, other=0)))
    default = Cpsr(mode=ProcessorMode.usr)
    if any(st.spsr[m] != default for m in SPSR_MODES):
        yield replace(case, state=replace(st, spsr={m: default for m in SPSR_MODES}))
    if instr.shifter is not None:
        for sh in _shifter_candidates(instr.shifter):
            yield replace(case, instr=instr.replace(shifter=sh))
    if instr.field("cond") not in (None, 14):
        yield replace(case, instr=instr.replace(cond=14))


def shrink(case: FailingCase, ctx: Context | None = None, max_rounds: int = 100) -> FailingCase:
    """Greedy minimisation that keeps the case failing; passing cases come back unchanged."""
    ctx = ctx or default_context()
    if not _fails(case, ctx):
        return case
    for _ in range(max_rounds):
        for cand in _candidates(case):
            if _fails(cand, ctx):
                case = cand
                break
        else:
            return case
    return case


# ---- text format ----------------------------------------------------------------------

def dump_reproducer(case: FailingCase, verdict: Verdict | None = None) -> str:
    st = case.state
    c = st.cpsr
    lines = [FORMAT_HEADER,
             f"instr {encode(case.instr):#010x}  ; {disassemble(case.instr)}",
             f"cpsr N={c.n} Z={c.z} C={c.c} V={c.v} mode={c.mode.name} other={c.other:#x}"]
    for m in SPSR_MODES:
        lines.append(f"spsr {m.name} {st.spsr[m].pack():#010x}")
    for i, v in enumerate(st.regs):
        lines.append(f"reg {phys_name(i)} {v:#010x}")
    for a in sorted(st.mem):
        lines.append(f"mem {a:#010x} {st.mem[a]:#04x}")
    if verdict is not None:
        lines.append(f"# {describe(verdict)}")
    return "\n".join(lines) + "\n"


class ReproducerError(ValueError):
    pass


_PHYS_INDEX = {phys_name(i): i for i in range(NUM_PHYS_REGS)}


def parse_reproducer(text: str) -> FailingCase:
    lines = [ln.split(";")[0].strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines or lines[0] != FORMAT_HEADER:
        raise ReproducerError(f"missing header {FORMAT_HEADER!r}")
    instr, cpsr = None, None
    spsr: dict[ProcessorMode, Cpsr] = {m: Cpsr(mode=ProcessorMode.usr) for m in SPSR_MODES}
    regs, mem = [0] * NUM_PHYS_REGS, {}
    for n, ln in enumerate(lines[1:], 2):
        key, *rest = ln.split()
        try:
            if key == "instr":
                instr = decode(int(rest[0], 16))
                if isinstance(instr, Undefined):
                    raise ReproducerError(f"line {n}: word does not decode")
            elif key == "cpsr":
                kv = dict(x.split("=") for x in rest)
                cpsr = Cpsr(int(kv["N"]), int(kv["Z"]), int(kv["C"]), int(kv["V"]),
                            ProcessorMode[kv["mode"]], int(kv["other"], 16))
            elif key == "spsr":
                spsr[ProcessorMode[rest[0]]] = Cpsr.unpack(int(rest[1], 16))
            elif key == "reg":
                regs[_PHYS_INDEX[rest[0]]] = int(rest[1], 16)
            elif key == "mem":
                mem[int(rest[0], 16)] = int(rest[1], 16)
            else:
                raise ReproducerError(f"line {n}: unknown key {key!r}")
        except (KeyError, IndexError, ValueError) as e:
            if isinstance(e, ReproducerError):
                raise
            raise ReproducerError(f"line {n}: {e}") from None
    if instr is None or cpsr is None:
        raise ReproducerError("reproducer needs instr and cpsr lines")
    return FailingCase(instr, RefState(cpsr, spsr, tuple(regs), mem))


def replay(case: FailingCase, ctx: Context | None = None) -> Verdict:
    return check_state(case.instr, case.state, ctx or default_context())
