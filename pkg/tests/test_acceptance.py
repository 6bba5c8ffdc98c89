"""Acceptance criteria, one test each.  Thresholds are pinned below."""
from __future__ import annotations

import io
import json
import random
import time

import pytest

from armsim import programs
from armsim.cli import main
from armsim.catalog import Register, Shift, ShiftImm, ShiftReg, catalog
from armsim.catalog.shifter import compute_shifter_operand
from armsim.decoder import DecodedInstr, Undefined, default_decoder
from armsim.fast import runtime as rt
from armsim.fast.engine import FastProcessor
from armsim.harness import (
    Context, check_condition_purity_and_agreement, check_expression_purity, run_suite,
)
from armsim.harness.checks import reference_step
from armsim.reference import ReferenceEngine
from armsim.state import Cpsr, ProcessorMode, RefState, load_bytes, set_reg, write_spsr

M = 0xFFFFFFFF

SUITE_CASES_PER_OP = 10_000
SUITE_BUDGET_S = 60.0
ADC_RANDOM = 100_000
ADC_TOLERANCE = 0                 # exact match on Rd, N, Z, C, V
CONDITION_CASES = 240
PURITY_CASES = 10_000
FRAME_CASES = 10_000
SHIFT_RANDOM = 1_000
DECODER_ROUNDTRIPS = 1_000_000
MIPS_THRESHOLD = 5.0
THROUGHPUT_STEPS = 10_000_000
REF_SLOWDOWN = 10.0
FAULT_BUDGET = 10_000

CORNERS = (0, 1, 0x7FFFFFFF, 0x80000000, 0xFFFFFFFF)


@pytest.fixture(scope="module")
def ctx():
    return Context()


# ---- independent oracles ----------------------------------------------------------------

def _signed(x: int) -> int:
    return x - (1 << 32) if x >> 31 else x


def adc_oracle(a: int, b: int, c: int):
    wide = a + b + c
    rd = wide & M
    s = _signed(a) + _signed(b) + c
    return rd, rd >> 31, int(rd == 0), wide >> 32, int(not -(1 << 31) <= s < (1 << 31))


def condition_oracle(cond: int, n: int, z: int, c: int, v: int) -> int:
    table = [z, 1 - z, c, 1 - c, n, 1 - n, v, 1 - v,
             c & (1 - z), (1 - c) | z, int(n == v), int(n != v),
             int(z == 0 and n == v), int(z == 1 or n != v), 1]
    return table[cond]


def shift_oracle(rm: int, kind: Shift, amount: int, carry: int):
    """Register-specified shift computed in widened integers."""
    if amount == 0:
        return rm, carry
    if kind is Shift.LSL:
        wide = rm << amount
        return wide & M, (wide >> 32) & 1
    if kind in (Shift.LSR, Shift.ASR):
        src = _signed(rm) if kind is Shift.ASR else rm
        wide = (src << 1) >> amount          # one guard bit below the result
        return (wide >> 1) & M, wide & 1
    k = amount % 32
    doubled = (rm << 32) | rm
    res = (doubled >> k) & M
    return res, res >> 31


# ---- helpers ----------------------------------------------------------------------------

def _adc_state(mode: ProcessorMode, rn: int, rm: int, c: int) -> RefState:
    st = RefState().with_cpsr(Cpsr(c=c, mode=mode))
    st = set_reg(st, 1, rn)
    return set_reg(st, 2, rm).with_pc(0x1000)


def _adc(s: int = 1, d: int = 0) -> DecodedInstr:
    return DecodedInstr.make("ADC", Register(2), cond=14, S=s, d=d, n=1)


def _both(ctx, instr, st):
    ref_out, ref_st = reference_step(ctx, instr, st)
    ctx.proc.load_ref(st)
    fast_out, _ = ctx.proc.execute(instr)
    return ref_out, ref_st, fast_out, ctx.proc.project() if fast_out == "ok" else None


def _result(st: RefState, d: int = 0):
    c = st.cpsr
    return st.regs[d], c.n, c.z, c.c, c.v


# ---- criteria ---------------------------------------------------------------------------

def test_differential_suite_commutes():
    rep = run_suite(cases=SUITE_CASES_PER_OP, seed=1)
    print(f"\nsuite: {rep.cases} cases, {rep.passed} passed, {rep.elapsed:.1f}s")
    assert len(rep.per_op) == 18
    assert rep.cases == 18 * SUITE_CASES_PER_OP
    assert rep.passed == rep.cases, rep.failures[:3]
    assert rep.elapsed < SUITE_BUDGET_S


def test_adc_flag_oracle(ctx):
    rng = random.Random(2)
    triples = [(a, b, c) for a in CORNERS for b in CORNERS for c in (0, 1)]
    assert len(triples) == 50
    for _ in range(ADC_RANDOM):
        triples.append((rng.getrandbits(32), rng.getrandbits(32), rng.getrandbits(1)))
    bad = 0
    for a, b, c in triples:
        st = _adc_state(ProcessorMode.usr, a, b, c)
        ref_out, ref_st, fast_out, fast_st = _both(ctx, _adc(), st)
        want = adc_oracle(a, b, c)
        if not (ref_out == fast_out == "ok" and _result(ref_st) == want == _result(fast_st)):
            bad += 1
    assert bad <= ADC_TOLERANCE

    # S=1, d=15: Unpredictable without an SPSR, CPSR := SPSR with one.
    for mode in (ProcessorMode.usr, ProcessorMode.sys):
        st = _adc_state(mode, 0x100, 0x20, 1)
        ref_out, _, fast_out, _ = _both(ctx, _adc(d=15), st)
        assert ref_out == fast_out == "unpredictable"
    saved = Cpsr(n=1, z=0, c=1, v=1, mode=ProcessorMode.usr)
    st = write_spsr(_adc_state(ProcessorMode.svc, 0x100, 0x20, 1), saved, ProcessorMode.svc)
    ref_out, ref_st, fast_out, fast_st = _both(ctx, _adc(d=15), st)
    assert ref_out == fast_out == "ok"
    for s in (ref_st, fast_st):
        assert s.cpsr == saved
        assert s.pc == 0x121


def test_condition_table(ctx):
    agree = 0
    for cond in range(15):
        for bits in range(16):
            flags = ((bits >> 3) & 1, (bits >> 2) & 1, (bits >> 1) & 1, bits & 1)
            v = check_condition_purity_and_agreement(cond, seed=cond * 16 + bits, ctx=ctx,
                                                     flags=flags)
            ctx.proc.flags[:] = flags
            fast = int(rt.condition_passed(ctx.proc.flags, cond))
            if v.ok and fast == condition_oracle(cond, *flags):
                agree += 1
    assert agree == CONDITION_CASES


def test_purity(ctx):
    bad = [s for s in range(PURITY_CASES)
           if not check_condition_purity_and_agreement(s % 15, seed=10_000 + s, ctx=ctx).ok]
    assert not bad, bad[:5]
    rng = random.Random(4)
    pairs = [(spec.mnemonic, len(ctx.fast.probes(spec.mnemonic))) for spec in catalog()]
    bad = []
    for s in range(PURITY_CASES):
        name, n = pairs[s % len(pairs)]
        k = rng.randrange(n)
        v = check_expression_purity(name, k, 20_000 + s, ctx)
        if not v.ok:
            bad.append((name, k, v))
    assert not bad, bad[:5]


def test_frame_suite():
    per_op = -(-FRAME_CASES // 18)
    rep = run_suite(cases=per_op, seed=5, check="frame")
    assert rep.cases >= FRAME_CASES
    assert rep.passed == rep.cases, rep.failures[:3]


def test_shifter_oracle(ctx):
    rng = random.Random(6)
    ref_bad = fast_bad = 0
    proc = ctx.proc
    for kind in Shift:
        for amount in range(33):
            for _ in range(SHIFT_RANDOM):
                rm, c = rng.getrandbits(32), rng.getrandbits(1)
                want = shift_oracle(rm, kind, amount, c)
                rs = amount | (rng.getrandbits(24) << 8)     # only the low byte counts
                st = set_reg(set_reg(RefState().with_cpsr(Cpsr(c=c)), 2, rm), 3, rs)
                if compute_shifter_operand(ShiftReg(2, kind, 3), st) != want:
                    ref_bad += 1
                proc.regs[2], proc.regs[3], proc.flags[2] = rm, rs, c
                got = rt.shifter(proc.regs, proc.flags, rt.SH_SHIFT_REG, 2, int(kind), 3)
                if (int(got[0]), int(got[1])) != want:
                    fast_bad += 1
                # Immediate-amount forms: 1..31, and 32 (encoded as 0) for LSR/ASR.
                if 1 <= amount <= 31:
                    enc = amount
                elif amount == 32 and kind in (Shift.LSR, Shift.ASR):
                    enc = 0
                else:
                    continue
                if compute_shifter_operand(ShiftImm(2, kind, enc), st) != want:
                    ref_bad += 1
                got = rt.shifter(proc.regs, proc.flags, rt.SH_SHIFT_IMM, 2, int(kind), enc)
                if (int(got[0]), int(got[1])) != want:
                    fast_bad += 1
    assert ref_bad == 0 and fast_bad == 0


def test_decoder_roundtrip():
    dec = default_decoder()
    rng = random.Random(7)
    specs = catalog()
    fails = 0
    # decode(encode(x)) == x from random decodable words' instructions
    for i in range(DECODER_ROUNDTRIPS):
        spec = specs[i % len(specs)]
        pat = spec.patterns[rng.randrange(len(spec.patterns))]
        w = pat.value | (rng.getrandbits(32) & ~pat.mask & M)
        instr = dec.decode(w)
        if isinstance(instr, Undefined) or dec.decode(dec.encode(instr)) != instr:
            fails += 1
    # encode(decode(w)) == w for uniformly random words that decode
    seen = 0
    while seen < DECODER_ROUNDTRIPS:
        w = rng.getrandbits(32)
        instr = dec.decode(w)
        if isinstance(instr, Undefined):
            continue
        seen += 1
        if dec.encode(instr) != w:
            fails += 1
    assert fails == 0


@pytest.mark.parametrize("name,expect", [("sum", {0: 55}), ("fib", {0: 55, 1: 89})])
def test_programs(name, expect):
    for engine in ("ref", "fast", "both"):
        out = io.StringIO()
        code = main(["--engine", engine, "--json", str(programs.path(name, "bin"))], out=out)
        summary = json.loads(out.getvalue().splitlines()[-1])
        assert code == 0 and summary["outcome"] == "halt", (engine, summary)
        for r, v in expect.items():
            assert summary["regs"][r] == v, (engine, r)


def test_throughput():
    st = load_bytes(RefState(), 0, programs.binary("arith")).with_pc(0)
    best = 0.0
    for _ in range(3):
        rep = FastProcessor.from_ref(st).run(THROUGHPUT_STEPS)
        assert rep.steps == THROUGHPUT_STEPS
        best = max(best, rep.mips)
    ref = ReferenceEngine()
    n = 20_000
    t0 = time.perf_counter()
    _, steps, _, _ = ref.run(st, n)
    ref_mips = steps / (time.perf_counter() - t0) / 1e6
    print(f"\nfast {best:.2f} MIPS, reference {ref_mips:.3f} MIPS, ratio {best / ref_mips:.0f}x")
    assert best >= MIPS_THRESHOLD
    assert best / ref_mips >= REF_SLOWDOWN


def test_fault_injection():
    per_op = FAULT_BUDGET // 18
    rep = run_suite(cases=per_op, seed=8, invert=("ADC", "C"), stop_on_fail=True)
    assert rep.cases <= FAULT_BUDGET
    assert rep.failures
    assert "C_flag" in rep.failures[0].components
