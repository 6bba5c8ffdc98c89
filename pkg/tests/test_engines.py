from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from armsim import programs
from armsim.asm import assemble
from armsim.catalog import Immediate, Register, Shift, ShiftReg
from armsim.decoder import DecodedInstr, encode
from armsim.fast.engine import FastEngine, FastProcessor
from armsim.harness import Context, check_state
from armsim.harness.checks import reference_step
from armsim.reference import ReferenceEngine
from armsim.state import (
    Cpsr, ProcessorMode, RefState, load_bytes, mem_read, reg_content, set_reg, write_spsr,
)

M = 0xFFFFFFFF


@pytest.fixture(scope="module")
def ctx():
    return Context()


def _prog(src: str, **regs) -> RefState:
    s = load_bytes(RefState(), 0, assemble(src)).with_pc(0)
    for k, v in regs.items():
        s = set_reg(s, int(k[1:]), v)
    return s


def _run_all(st: RefState, steps: int = 10_000):
    """Final states from the reference and from the fast engine with and without basic blocks."""
    ref_st, n, out, _ = ReferenceEngine().run(st, steps)
    results = [(out, n, ref_st)]
    for bb in (True, False):
        p = FastProcessor.from_ref(st)
        rep = p.run(steps, basic_blocks=bb)
        results.append((rep.outcome, rep.steps, p.project()))
    return results


@pytest.mark.parametrize("name,expect", [("sum", {0: 55}), ("fib", {0: 55, 1: 89})])
def test_bundled_programs(name, expect):
    st = load_bytes(RefState(), 0, programs.binary(name)).with_pc(0)
    res = _run_all(st)
    assert all(r[0] == "halt" for r in res)
    assert res[0] == res[1] == res[2]
    for r, v in expect.items():
        assert reg_content(res[0][2], r) == v


def test_bundled_sources_match_binaries():
    for name in programs.NAMES:
        assert assemble(programs.source(name)) == programs.binary(name)


def test_conditional_skip_and_flags():
    st = _prog("""
        mov r0, #5
        cmp r0, #5
        moveq r1, #1
        movne r2, #1
        subs r3, r0, #6
        b .
    """)
    for out, _, s in _run_all(st, 7):
        assert out == "halt"
        assert [reg_content(s, i) for i in (1, 2, 3)] == [1, 0, 0xFFFFFFFF]
        assert (s.cpsr.n, s.cpsr.z, s.cpsr.c, s.cpsr.v) == (1, 0, 0, 0)


def test_bl_links_and_mov_pc_returns():
    st = _prog("""
        bl sub
        mov r1, #7
        b .
    sub: mov r0, #3
        mov pc, lr
    """)
    for out, _, s in _run_all(st):
        assert out == "halt"
        assert reg_content(s, 0) == 3 and reg_content(s, 1) == 7
        assert reg_content(s, 14) == 4


def test_pc_reads_eight_ahead():
    st = _prog("add r0, pc, #0\nb .")
    for _, _, s in _run_all(st):
        assert reg_content(s, 0) == 8


def test_unpredictable_outcomes(ctx):
    # register-specified shift naming r15
    i = DecodedInstr.make("ADD", ShiftReg(15, Shift.LSL, 1), cond=14, S=0, d=0, n=2)
    assert reference_step(ctx, i, RefState())[0] == "unpredictable"
    assert check_state(i, RefState(), ctx).ok
    # condition field 1111
    i = DecodedInstr.make("MOV", Immediate(0, 1), cond=15, S=0, d=0)
    assert reference_step(ctx, i, RefState())[0] == "unpredictable"
    assert check_state(i, RefState(), ctx).ok


def test_misaligned_fetch_after_branch():
    st = _prog("mov pc, #2")
    for out, n, _ in _run_all(st):
        assert out == "unpredictable" and n == 1


def test_undefined_word_stops():
    st = load_bytes(RefState(), 0, (0xE7F000F0).to_bytes(4, "little")).with_pc(0)
    for out, n, _ in _run_all(st):
        assert out == "undefined" and n == 0


def test_subs_pc_restores_cpsr_and_banks(ctx):
    saved = Cpsr(z=1, mode=ProcessorMode.usr)
    st = RefState().with_cpsr(Cpsr(mode=ProcessorMode.svc))
    st = set_reg(st, 14, 0x200)              # lr_svc
    st = set_reg(st, 13, 0x1000, ProcessorMode.usr)
    st = set_reg(st, 13, 0x2000)             # sp_svc
    st = write_spsr(st, saved)
    i = DecodedInstr.make("SUB", Immediate(0, 4), cond=14, S=1, d=15, n=14)
    out, new = reference_step(ctx, i, st)
    assert out == "ok"
    assert new.cpsr == saved and new.pc == 0x1FC
    assert reg_content(new, 13) == 0x1000
    assert check_state(i, st, ctx).ok


def test_self_modifying_code_sees_new_instruction():
    # The fast engine caches decoded words; writing memory must invalidate them.
    st = _prog("mov r0, #1\nb .")
    p = FastProcessor.from_ref(st)
    assert p.run(1).steps == 1
    p.set_fetch_address(0)
    p.write_bytes(0, encode(DecodedInstr.make("MOV", Immediate(0, 9), cond=14, S=0,
                                             d=0)).to_bytes(4, "little"))
    p.run(1)
    assert p.reg(0) == 9


def test_page_pool_grows():
    p = FastProcessor(page_slots=2)
    for k in range(40):
        p.write_bytes(k << 12, bytes([k + 1]))
    s = p.project()
    assert all(mem_read(s, k << 12, "byte") == k + 1 for k in range(40))


def test_from_ref_project_roundtrip(ctx):
    from armsim.harness import random_state
    for seed in range(200):
        s, _ = random_state(seed, ctx.proc)
        assert FastProcessor.from_ref(s).project() == s


def test_probe_exposes_expressions():
    e = FastEngine.get()
    assert len(e.probes("ADC")) > 5


@settings(max_examples=300, deadline=None)
@given(st.integers(0, M), st.integers(0, M), st.integers(0, 1), st.sampled_from(
    ["ADD", "ADC", "SUB", "SBC", "RSB", "RSC", "AND", "ORR", "EOR", "BIC"]), st.integers(0, 1))
def test_engines_agree_on_register_operands(ctx, a, b, c, op, s_bit):
    st_ = set_reg(set_reg(RefState().with_cpsr(Cpsr(c=c)), 1, a), 2, b).with_pc(0x40)
    i = DecodedInstr.make(op, Register(2), cond=14, S=s_bit, d=0, n=1)
    assert check_state(i, st_, ctx).ok
