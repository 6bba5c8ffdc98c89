"""Addressing mode 1: the data-processing second operand."""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Union

from ..bits import MASK32
from ..state import RefState, reg_content


class Shift(enum.IntEnum):
    LSL = 0
    LSR = 1
    ASR = 2
    ROR = 3


@dataclass(frozen=True)
class Immediate:
    rotate_imm: int
    immed_8: int


@dataclass(frozen=True)
class Register:
    m: int


@dataclass(frozen=True)
class ShiftImm:
    """Shift by a 5-bit immediate, with the encoding's meaning of 0.

    ``LSR #0`` and ``ASR #0`` shift by 32.  ``LSL #0`` and ``ROR #0`` are
    spelled :class:`Register` and :class:`RRX`; as descriptors they mean
    "no shift" and "rotate right with extend" respectively.
    """
    m: int
    shift: Shift
    amount: int


@dataclass(frozen=True)
class ShiftReg:
    m: int
    shift: Shift
    s: int


@dataclass(frozen=True)
class RRX:
    m: int


ShifterDescriptor = Union[Immediate, Register, ShiftImm, ShiftReg, RRX]


def _ror(v: int, k: int) -> int:
    k &= 31
    return ((v >> k) | (v << (32 - k))) & MASK32 if k else v


def shift_by_register(value: int, shift: Shift, amount: int, carry: int) -> tuple[int, int]:
    """Register-specified shifts; ``amount`` is the low byte of Rs."""
    if shift is Shift.LSL:
        if amount == 0:
            return value, carry
        if amount < 32:
            return (value << amount) & MASK32, (value >> (32 - amount)) & 1
        if amount == 32:
            return 0, value & 1
        return 0, 0
    if shift is Shift.LSR:
        if amount == 0:
            return value, carry
        if amount < 32:
            return value >> amount, (value >> (amount - 1)) & 1
        if amount == 32:
            return 0, value >> 31
        return 0, 0
    if shift is Shift.ASR:
        if amount == 0:
            return value, carry
        if amount < 32:
            signed = value - (1 << 32) if value >> 31 else value
            return (signed >> amount) & MASK32, (value >> (amount - 1)) & 1
        return (MASK32, 1) if value >> 31 else (0, 0)
    # ROR
    if amount == 0:
        return value, carry
    k = amount & 31
    if k == 0:
        return value, value >> 31
    return _ror(value, k), (value >> (k - 1)) & 1


def compute_shifter_operand(desc: ShifterDescriptor, st: RefState) -> tuple[int, int]:
    """Return ``(shifter_operand, shifter_carry_out)`` for ``desc`` in ``st``."""
    c = st.cpsr.c
    match desc:
        case Immediate(rotate_imm=rot, immed_8=imm):
            value = _ror(imm, 2 * rot)
            return value, (c if rot == 0 else value >> 31)
        case Register(m=m):
            return reg_content(st, m), c
        case RRX(m=m):
            rm = reg_content(st, m)
            return (c << 31) | (rm >> 1), rm & 1
        case ShiftImm(m=m, shift=shift, amount=amount):
            rm = reg_content(st, m)
            if amount == 0:
                if shift in (Shift.LSR, Shift.ASR):
                    return shift_by_register(rm, shift, 32, c)
                if shift is Shift.ROR:
                    return (c << 31) | (rm >> 1), rm & 1
                return rm, c
            return shift_by_register(rm, shift, amount, c)
        case ShiftReg(m=m, shift=shift, s=s):
            rm = reg_content(st, m)
            amount = reg_content(st, s) & 0xFF
            return shift_by_register(rm, shift, amount, c)
    raise TypeError(f"not a shifter descriptor: {desc!r}")


def format_shifter(desc: ShifterDescriptor) -> str:
    """Assembly spelling, e.g. ``r2, lsl #3`` or ``#0xff``."""
    match desc:
        case Immediate(rotate_imm=rot, immed_8=imm):
            return f"#{_ror(imm, 2 * rot):#x}"
        case Register(m=m):
            return f"r{m}"
        case RRX(m=m):
            return f"r{m}, rrx"
        case ShiftImm(m=m, shift=sh, amount=a):
            return f"r{m}, {sh.name.lower()} #{a or 32}"
        case ShiftReg(m=m, shift=sh, s=s):
            return f"r{m}, {sh.name.lower()} r{s}"
    raise TypeError(desc)
