from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from armsim.catalog import Immediate, Register, catalog
from armsim.decoder import DecodedInstr, default_decoder
from armsim.harness import (
    CORNERS, Context, FailingCase, Mismatch, OutcomeDisagree, ReproducerError, case_seed,
    check_commutes, check_frame, describe, dump_reproducer, footprint, parse_reproducer,
    random_instr, random_state, replay, run_suite, shrink, state_diff,
)
from armsim.harness.generators import SeedRng
from armsim.state import Cpsr, ProcessorMode, RefState, mem_write, set_reg


@pytest.fixture(scope="module")
def ctx():
    return Context()


@pytest.fixture(scope="module")
def faulty():
    return Context(("ADC", "C"))


def test_generators_are_deterministic(ctx):
    a, _ = random_state(42, ctx.proc)
    b, _ = random_state(42, ctx.proc)
    c, _ = random_state(43, ctx.proc)
    assert a == b and a != c
    spec = catalog()[5]
    assert random_instr(SeedRng(1), spec, ctx.fast.decoder) == \
        random_instr(SeedRng(1), spec, ctx.fast.decoder)


def test_generators_hit_corners_and_all_modes(ctx):
    seen_modes, corners = set(), 0
    for s in range(500):
        st_, _ = random_state(s, ctx.proc)
        seen_modes.add(st_.mode)
        corners += sum(v in CORNERS for v in st_.regs)
    assert seen_modes == set(ProcessorMode)
    assert 0.2 < corners / (500 * 31) < 0.45


def test_case_seeds_are_distinct():
    seeds = {case_seed(b, op, i) for b in range(3) for op in range(18) for i in range(100)}
    assert len(seeds) == 3 * 18 * 100


def test_state_diff_names_components():
    a = RefState()
    b = set_reg(a.with_cpsr(Cpsr(c=1)), 13, 5, ProcessorMode.svc)
    b = mem_write(b, 0x10, "byte", 7)
    names = {c for c, _, _ in state_diff(a, b)}
    assert names == {"C_flag", "r13_svc", "mem[0x00000010]"}


def test_fault_injection_is_caught_and_shrunk(faulty):
    instr = DecodedInstr.make("ADC", Register(2), cond=14, S=1, d=0, n=1)
    bad = None
    for seed in range(50):
        v = check_commutes(instr, seed, faulty)
        if not v.ok:
            bad = (seed, v)
            break
    assert bad is not None
    seed, v = bad
    assert isinstance(v, Mismatch) and "C_flag" in v.components
    assert "C_flag" in describe(v)
    st_, _ = random_state(seed, faulty.proc)
    small = shrink(FailingCase(instr, st_), faulty)
    assert not replay(small, faulty).ok
    assert sum(1 for r in small.state.regs if r) <= 1
    text = dump_reproducer(small, v)
    again = parse_reproducer(text)
    assert again == small
    assert not replay(again, faulty).ok
    assert replay(again, Context()).ok


def test_shrink_leaves_passing_cases_alone(ctx):
    case = FailingCase(DecodedInstr.make("MOV", Immediate(0, 1), cond=14, S=0, d=0), RefState())
    assert shrink(case, ctx) == case


@pytest.mark.parametrize("text", [
    "",
    "armsim-repro 1\n",
    "armsim-repro 1\ninstr 0xe7f000f0\n",
    "armsim-repro 1\ninstr 0xe0810002\nreg r99 0x1\n",
    "armsim-repro 1\ninstr 0xe0810002\ncpsr N=1 Z=0 C=0 V=0 mode=bogus other=0x0\n",
    "armsim-repro 1\ninstr 0xe0810002\nmem 0x0 0x1ff\n",
])
def test_reproducer_parse_errors(text):
    with pytest.raises(ReproducerError):
        parse_reproducer(text)


def test_frame_check_and_footprint(ctx):
    instr = DecodedInstr.make("CMP", Register(2), cond=14, n=1)
    st_, _ = random_state(3, ctx.proc)
    fp = footprint(instr, st_, ctx)
    assert {"N_flag", "Z_flag", "C_flag", "V_flag", "pc"} <= fp
    assert not any(c.startswith("r") and c != "pc" for c in fp)
    assert check_frame(instr, 3, ctx).ok


def test_outcome_disagree_is_reported():
    v = OutcomeDisagree(None, 1, "ok", "unpredictable")
    assert not v.ok and "unpredictable" in describe(v)


def test_suite_small_run_and_threads():
    a = run_suite(cases=30, seed=9)
    b = run_suite(cases=30, seed=9, workers=3)
    assert a.ok and b.ok
    assert a.cases == b.cases == 18 * 30
    assert a.per_op == b.per_op


def test_suite_reports_injected_fault():
    rep = run_suite(cases=200, seed=9, ops=["ADC"], invert=("ADC", "C"))
    assert not rep.ok
    assert all("C_flag" in f.components for f in rep.failures if isinstance(f, Mismatch))


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 2**40))
def test_random_instr_always_decodes(seed):
    dec = default_decoder()
    rng = SeedRng(seed)
    spec = catalog()[seed % 18]
    i = random_instr(rng, spec, dec)
    assert i.op == spec.mnemonic
