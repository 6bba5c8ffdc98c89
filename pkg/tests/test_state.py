from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from armsim.bits import (
    borrow_from_sub3, carry_from_add3, get_bits, overflow_from_add3, overflow_from_sub3,
    set_bit_range, sign_extend,
)
from armsim.state import (
    BANKING, OTHER_MASK, SPSR_MODES, Cpsr, MalformedState, ProcessorMode, RefState,
    UnpredictableError, load_bytes, mem_read, mem_write, phys_name, read_spsr, reg_content,
    set_reg, write_cpsr_word, write_spsr,
)

M = 0xFFFFFFFF
words = st.integers(0, M)
modes = st.sampled_from(list(ProcessorMode))


def _s(x):
    return x - (1 << 32) if x >> 31 else x


@given(words, words, st.integers(0, 1))
def test_arithmetic_flags_against_wide_integers(a, b, c):
    assert carry_from_add3(a, b, c) == int(a + b + c > M)
    assert overflow_from_add3(a, b, c) == int(not -2**31 <= _s(a) + _s(b) + c < 2**31)
    assert borrow_from_sub3(a, b, c) == int(a - b - c < 0)
    assert overflow_from_sub3(a, b, c) == int(not -2**31 <= _s(a) - _s(b) - c < 2**31)


@given(words, st.integers(0, 31), st.integers(0, 31), words)
def test_bit_ranges(w, i, j, v):
    hi, lo = max(i, j), min(i, j)
    width = hi - lo + 1
    out = set_bit_range(w, hi, lo, v)
    assert get_bits(out, hi, lo) == v & ((1 << width) - 1)
    keep = M ^ (((1 << width) - 1) << lo)
    assert out & keep == w & keep


@given(st.integers(1, 32), words)
def test_sign_extend(bits, v):
    v &= (1 << bits) - 1
    r = sign_extend(v, bits)
    assert (r - v) % (1 << bits) == 0 and -(1 << (bits - 1)) <= _s(r) < (1 << (bits - 1))


@given(st.integers(0, 1), st.integers(0, 1), st.integers(0, 1), st.integers(0, 1), modes, words)
def test_cpsr_pack_unpack(n, z, c, v, mode, other):
    cp = Cpsr(n, z, c, v, mode, other & OTHER_MASK)
    assert Cpsr.unpack(cp.pack()) == cp


def test_bad_mode_bits():
    with pytest.raises(MalformedState):
        Cpsr.unpack(0x00000000)
    with pytest.raises(UnpredictableError):
        write_cpsr_word(RefState(), 0x14)


def test_banking_layout():
    assert BANKING[ProcessorMode.usr] == BANKING[ProcessorMode.sys] == tuple(range(16))
    fiq = BANKING[ProcessorMode.fiq]
    assert [phys_name(fiq[i]) for i in (8, 14)] == ["r8_fiq", "r14_fiq"]
    for m in (ProcessorMode.irq, ProcessorMode.svc, ProcessorMode.abt, ProcessorMode.und):
        row = BANKING[m]
        assert row[:13] == tuple(range(13)) and phys_name(row[13]) == f"r13_{m.name}"
    assert sorted({i for row in BANKING.values() for i in row}) == list(range(31))


@given(modes, modes, st.integers(0, 14), words)
def test_banked_writes_are_isolated(m1, m2, n, v):
    s = set_reg(RefState(), n, v, m1)
    assert reg_content(s, n, m1) == v
    shared = BANKING[m1][n] == BANKING[m2][n]
    assert reg_content(s, n, m2) == (v if shared else 0)


def test_pc_reads_ahead():
    s = RefState().with_pc(0x100)
    assert reg_content(s, 15) == 0x108


def test_spsr_only_in_exception_modes():
    s = RefState().with_cpsr(Cpsr(mode=ProcessorMode.usr))
    with pytest.raises(UnpredictableError):
        read_spsr(s)
    with pytest.raises(UnpredictableError):
        write_spsr(s, Cpsr())
    for m in SPSR_MODES:
        s2 = write_spsr(s, Cpsr(n=1), m)
        assert read_spsr(s2, m) == Cpsr(n=1)


@given(words, words)
def test_memory_little_endian_and_sparse(addr, v):
    addr &= ~3
    s = mem_write(RefState(), addr, "word", v)
    assert mem_read(s, addr) == v
    assert mem_read(s, addr, "byte") == v & 0xFF
    assert all(b != 0 for b in s.mem.values())
    assert mem_write(s, addr, 4, 0) == RefState()


def test_misaligned_access_is_unpredictable():
    with pytest.raises(UnpredictableError):
        mem_read(RefState(), 2)
    with pytest.raises(UnpredictableError):
        mem_write(RefState(), 1, "half", 0)


def test_load_bytes_wraps():
    s = load_bytes(RefState(), 0xFFFFFFFE, b"\x01\x02\x03\x04")
    assert mem_read(s, 0, "half") == 0x0403


def test_state_validation():
    with pytest.raises(MalformedState):
        RefState(regs=(0,) * 16)
    with pytest.raises(MalformedState):
        RefState(spsr={})
