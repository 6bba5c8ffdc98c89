"""Compiled helpers the lowered operations call.

State lives in a handful of flat arrays so that numba can compile the
simulation loop without boxing anything:

* ``regs``   int64[16]  current-mode register view; ``regs[15]`` is the
  pipeline PC (address of the executing instruction + 8)
* ``flags``  uint8[4]   N, Z, C, V
* ``ctrl``   int64[16]  mode bits, branch flag, other CPSR bits, counters
* ``phys``   int64[31]  backing store for registers not in the current view
* ``spsr``   int64[5]   packed SPSR words of fiq, irq, svc, abt, und
* ``pagetab`` int32[2**20] page number -> slot + 1 (0: never touched)
* ``pages``  uint8[cap, 4096] page slots
* ``tags``   int64[N]   instruction-cache tags, invalidated by stores
"""
from __future__ import annotations

import numpy as np
from numba import njit

from ..state import BANKING, OTHER_MASK, SPSR_MODES, ProcessorMode

M = 0xFFFFFFFF

# ctrl slots
C_MODE = 0
C_BRANCH = 1
C_OTHER = 2
C_STEPS = 3
C_PC = 4
C_SELF = 5
C_USED = 6
C_PAGEPEND = 7
C_MEMGEN = 8       # bumped on every memory write; lets projection reuse its memory map

PAGE_BITS = 12
PAGE_SIZE = 1 << PAGE_BITS
NUM_PAGES = 1 << (32 - PAGE_BITS)

# Fault kinds and detail codes.
K_UNPREDICTABLE = 1
K_NOT_IMPLEMENTED = 2
K_NEED_PAGES = 3

E_COND = 1
E_STMT = 2
E_NO_SPSR = 3
E_BAD_MODE = 4
E_MISALIGNED = 5
E_REG_INDEX = 6
E_BIT_INDEX = 7
E_WIDTH = 8
E_TODO = 9
E_PAGES = 10

FAULT_TEXT = {
    E_COND: "condition field 0b1111",
    E_STMT: "UNPREDICTABLE",
    E_NO_SPSR: "SPSR access in a mode without SPSR",
    E_BAD_MODE: "invalid mode bits in status register write",
    E_MISALIGNED: "misaligned memory access",
    E_REG_INDEX: "register index out of range",
    E_BIT_INDEX: "bit index out of range",
    E_WIDTH: "SignExtend width out of range",
    E_TODO: "Todo",
    E_PAGES: "page pool exhausted",
}


class Fault(Exception):
    """Raised from compiled code; ``args == (kind, code)``."""


MODES = tuple(ProcessorMode)
MODE_IDX = np.full(32, -1, dtype=np.int64)
for _i, _m in enumerate(MODES):
    MODE_IDX[_m.value] = _i
ROW = np.array([BANKING[m] for m in MODES], dtype=np.int64)
VIS = np.full((len(MODES), 31), -1, dtype=np.int64)
for _i, _m in enumerate(MODES):
    for _k, _p in enumerate(BANKING[_m]):
        VIS[_i, _p] = _k
SPSR_SLOT = np.full(len(MODES), -1, dtype=np.int64)
for _i, _m in enumerate(MODES):
    if _m in SPSR_MODES:
        SPSR_SLOT[_i] = SPSR_MODES.index(_m)
OTHER = OTHER_MASK


@njit(cache=True)
def condition_passed(flags, cond):
    n = flags[0]
    z = flags[1]
    c = flags[2]
    v = flags[3]
    if cond == 14:
        return 1
    if cond == 0:
        return 1 if z == 1 else 0
    if cond == 1:
        return 1 if z == 0 else 0
    if cond == 2:
        return 1 if c == 1 else 0
    if cond == 3:
        return 1 if c == 0 else 0
    if cond == 4:
        return 1 if n == 1 else 0
    if cond == 5:
        return 1 if n == 0 else 0
    if cond == 6:
        return 1 if v == 1 else 0
    if cond == 7:
        return 1 if v == 0 else 0
    if cond == 8:
        return 1 if c == 1 and z == 0 else 0
    if cond == 9:
        return 1 if c == 0 or z == 1 else 0
    if cond == 10:
        return 1 if n == v else 0
    if cond == 11:
        return 1 if n != v else 0
    if cond == 12:
        return 1 if z == 0 and n == v else 0
    if cond == 13:
        return 1 if z == 1 or n != v else 0
    raise Fault(K_UNPREDICTABLE, E_COND)


@njit(cache=True)
def has_spsr(ctrl):
    return 1 if SPSR_SLOT[MODE_IDX[ctrl[C_MODE]]] >= 0 else 0


# ---- registers -------------------------------------------------------------------


@njit(cache=True)
def check_reg(n):
    if n < 0 or n > 15:
        raise Fault(K_UNPREDICTABLE, E_REG_INDEX)
    return n


@njit(cache=True)
def get_reg(regs, n):
    return regs[check_reg(n)]


@njit(cache=True)
def set_reg_or_pc(regs, ctrl, d, v):
    if d == 15:
        regs[15] = (v + 8) & M
        ctrl[C_BRANCH] = 1
    else:
        regs[d] = v & M


@njit(cache=True)
def set_reg(regs, ctrl, d, v):
    set_reg_or_pc(regs, ctrl, check_reg(d), v)


@njit(cache=True)
def get_reg_m(regs, ctrl, phys, n, mode_bits):
    p = ROW[MODE_IDX[mode_bits], check_reg(n)]
    k = VIS[MODE_IDX[ctrl[C_MODE]], p]
    if k >= 0:
        return regs[k]
    return phys[p]


@njit(cache=True)
def set_reg_m(regs, ctrl, phys, n, mode_bits, v):
    p = ROW[MODE_IDX[mode_bits], check_reg(n)]
    k = VIS[MODE_IDX[ctrl[C_MODE]], p]
    if k >= 0:
        set_reg_or_pc(regs, ctrl, k, v)
    else:
        phys[p] = v & M


@njit(cache=True)
def switch_mode(regs, ctrl, phys, new_bits):
    cur = MODE_IDX[ctrl[C_MODE]]
    new = MODE_IDX[new_bits]
    if cur == new:
        return
    for k in range(15):
        phys[ROW[cur, k]] = regs[k]
    for k in range(15):
        regs[k] = phys[ROW[new, k]]
    ctrl[C_MODE] = new_bits


# ---- status registers -------------------------------------------------------------


@njit(cache=True)
def read_cpsr(flags, ctrl):
    return ((np.int64(flags[0]) << 31) | (np.int64(flags[1]) << 30) | (np.int64(flags[2]) << 29)
            | (np.int64(flags[3]) << 28) | ctrl[C_OTHER] | ctrl[C_MODE])


@njit(cache=True)
def write_cpsr(regs, flags, ctrl, phys, w):
    if MODE_IDX[w & 31] < 0:
        raise Fault(K_UNPREDICTABLE, E_BAD_MODE)
    switch_mode(regs, ctrl, phys, w & 31)
    flags[0] = (w >> 31) & 1
    flags[1] = (w >> 30) & 1
    flags[2] = (w >> 29) & 1
    flags[3] = (w >> 28) & 1
    ctrl[C_OTHER] = w & OTHER


@njit(cache=True)
def spsr_slot(ctrl, mode_bits):
    mb = ctrl[C_MODE] if mode_bits == 0 else mode_bits
    slot = SPSR_SLOT[MODE_IDX[mb]]
    if slot < 0:
        raise Fault(K_UNPREDICTABLE, E_NO_SPSR)
    return slot


@njit(cache=True)
def read_spsr(ctrl, spsr, mode_bits):
    return spsr[spsr_slot(ctrl, mode_bits)]


@njit(cache=True)
def write_spsr(ctrl, spsr, mode_bits, w):
    slot = spsr_slot(ctrl, mode_bits)
    if MODE_IDX[w & 31] < 0:
        raise Fault(K_UNPREDICTABLE, E_BAD_MODE)
    spsr[slot] = w & M


# ---- memory -------------------------------------------------------------------------


@njit(cache=True)
def ensure_pages(ctrl, pages, n):
    """Fault before any mutation when fewer than ``n`` free page slots remain."""
    if ctrl[C_USED] + n > pages.shape[0]:
        ctrl[C_PAGEPEND] = n
        raise Fault(K_NEED_PAGES, E_PAGES)


@njit(cache=True)
def mem_read(pagetab, pages, addr, size):
    addr = addr & M
    if addr % size != 0:
        raise Fault(K_UNPREDICTABLE, E_MISALIGNED)
    slot = pagetab[addr >> PAGE_BITS]
    if slot == 0:
        return np.int64(0)
    off = addr & (PAGE_SIZE - 1)
    v = np.int64(0)
    for i in range(size):
        v |= np.int64(pages[slot - 1, off + i]) << (8 * i)
    return v


@njit(cache=True)
def mem_write(pagetab, pages, ctrl, slot_page, tags, addr, size, v):
    addr = addr & M
    if addr % size != 0:
        raise Fault(K_UNPREDICTABLE, E_MISALIGNED)
    page = addr >> PAGE_BITS
    slot = pagetab[page]
    if slot == 0:
        if ctrl[C_USED] >= pages.shape[0]:
            ctrl[C_PAGEPEND] = 1
            raise Fault(K_NEED_PAGES, E_PAGES)
        slot = ctrl[C_USED] + 1
        ctrl[C_USED] = slot
        pagetab[page] = slot
        slot_page[slot - 1] = page
    off = addr & (PAGE_SIZE - 1)
    for i in range(size):
        pages[slot - 1, off + i] = (v >> (8 * i)) & 0xFF
    ctrl[C_MEMGEN] += 1
    word = addr & ~3
    idx = (word >> 2) & (tags.shape[0] - 1)
    if tags[idx] == word:
        tags[idx] = -1


@njit(cache=True)
def nonzero_bytes(pages, slot_page, used):
    """Addresses and values of every non-zero byte in the first ``used`` slots."""
    n = 0
    for s in range(used):
        for i in range(PAGE_SIZE):
            if pages[s, i] != 0:
                n += 1
    addrs = np.empty(n, dtype=np.int64)
    vals = np.empty(n, dtype=np.int64)
    k = 0
    for s in range(used):
        base = slot_page[s] << PAGE_BITS
        for i in range(PAGE_SIZE):
            if pages[s, i] != 0:
                addrs[k] = base | i
                vals[k] = pages[s, i]
                k += 1
    return addrs, vals


# ---- primitive functions -------------------------------------------------------------


@njit(cache=True)
def shl(a, b):
    return (a << b) & M if b < 32 else np.int64(0)


@njit(cache=True)
def shr(a, b):
    return a >> b if b < 32 else np.int64(0)


@njit(cache=True)
def set_bit_range(w, hi, lo, v):
    mask = ((np.int64(1) << (hi - lo + 1)) - 1) << lo
    return (w & ~mask & M) | ((v << lo) & mask)


@njit(cache=True)
def carry_from_add3(a, b, c):
    return (a + b + c) >> 32


@njit(cache=True)
def overflow_from_add3(a, b, c):
    r = (a + b + c) & M
    return (((a ^ r) & (b ^ r)) >> 31) & 1


@njit(cache=True)
def borrow_from_sub3(a, b, c):
    return 1 if a < b + c else 0


@njit(cache=True)
def overflow_from_sub3(a, b, c):
    r = (a - b - c) & M
    return (((a ^ b) & (a ^ r)) >> 31) & 1


@njit(cache=True)
def get_bit(w, i):
    if i < 0 or i > 31:
        raise Fault(K_UNPREDICTABLE, E_BIT_INDEX)
    return (w >> i) & 1


@njit(cache=True)
def sign_extend(w, width):
    if width < 1 or width > 32:
        raise Fault(K_UNPREDICTABLE, E_WIDTH)
    w = w & ((np.int64(1) << width) - 1)
    if (w >> (width - 1)) & 1:
        w = w | (M ^ ((np.int64(1) << width) - 1))
    return w


# ---- addressing mode 1 ----------------------------------------------------------------

SH_IMMEDIATE = 0
SH_REGISTER = 1
SH_SHIFT_IMM = 2
SH_SHIFT_REG = 3
SH_RRX = 4


@njit(cache=True)
def _ror(v, k):
    k = k & 31
    if k == 0:
        return v
    return ((v >> k) | (v << (32 - k))) & M


@njit(cache=True)
def shift_value(value, shift, amount, carry):
    """Register-specified shift of ``value`` by ``amount`` (the low byte of Rs)."""
    if amount == 0:
        return value, carry
    if shift == 0:
        if amount < 32:
            return (value << amount) & M, (value >> (32 - amount)) & 1
        if amount == 32:
            return np.int64(0), value & 1
        return np.int64(0), np.int64(0)
    if shift == 1:
        if amount < 32:
            return value >> amount, (value >> (amount - 1)) & 1
        if amount == 32:
            return np.int64(0), value >> 31
        return np.int64(0), np.int64(0)
    if shift == 2:
        if amount < 32:
            if value >> 31:
                return ((value | ~M) >> amount) & M, (value >> (amount - 1)) & 1
            return value >> amount, (value >> (amount - 1)) & 1
        if value >> 31:
            return np.int64(M), np.int64(1)
        return np.int64(0), np.int64(0)
    k = amount & 31
    if k == 0:
        return value, value >> 31
    return _ror(value, k), (value >> (k - 1)) & 1


@njit(cache=True)
def shifter(regs, flags, kind, a, b, c):
    """(shifter_operand, shifter_carry_out) for an encoded descriptor.

    kind 0: Immediate(a=rotate_imm, b=immed_8); 1: Register(a=m);
    2: ShiftImm(a=m, b=shift, c=amount); 3: ShiftReg(a=m, b=shift, c=s); 4: RRX(a=m).
    """
    carry = np.int64(flags[2])
    if kind == SH_IMMEDIATE:
        v = _ror(np.int64(b), 2 * a)
        if a == 0:
            return v, carry
        return v, v >> 31
    rm = regs[a]
    if kind == SH_REGISTER:
        return rm, carry
    if kind == SH_SHIFT_IMM:
        if c == 0:
            if b == 1 or b == 2:
                return shift_value(rm, b, 32, carry)
            if b == 3:
                return (carry << 31) | (rm >> 1), rm & 1
            return rm, carry
        return shift_value(rm, b, c, carry)
    if kind == SH_SHIFT_REG:
        return shift_value(rm, b, regs[c] & 0xFF, carry)
    return (carry << 31) | (rm >> 1), rm & 1
