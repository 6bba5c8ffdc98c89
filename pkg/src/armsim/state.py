"""Processor state for the reference model.

Everything here is an immutable value.  Updates return new objects, so a
state captured at operation entry stays valid while the body runs.
"""
from __future__ import annotations

import enum
import functools
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

from .bits import MASK32


def _evolve(obj, name: str, value):
    """Copy of a frozen dataclass with one field replaced, skipping re-validation.

    Only for values that keep the object's invariants.
    """
    new = object.__new__(type(obj))
    new.__dict__.update(obj.__dict__)
    new.__dict__[name] = value
    return new


class ProcessorMode(enum.Enum):
    usr = 0b10000
    fiq = 0b10001
    irq = 0b10010
    svc = 0b10011
    abt = 0b10111
    und = 0b11011
    sys = 0b11111

    # Members are singletons, so identity hashing is valid and much cheaper.
    __hash__ = object.__hash__

    @property
    def has_spsr(self) -> bool:
        return self in SPSR_MODES

    @classmethod
    def from_bits(cls, bits: int) -> "ProcessorMode":
        try:
            return cls(bits & 0x1F)
        except ValueError:
            raise MalformedState(f"invalid mode bits {bits & 0x1F:#07b}") from None


SPSR_MODES = (ProcessorMode.fiq, ProcessorMode.irq, ProcessorMode.svc,
              ProcessorMode.abt, ProcessorMode.und)

FLAG_NAMES = ("N", "Z", "C", "V")
_FLAG_SHIFT = {"N": 31, "Z": 30, "C": 29, "V": 28}
# Bits of a status word not covered by the flag and mode fields.
OTHER_MASK = 0x0FFFFFE0


class MalformedState(ValueError):
    pass


class UnpredictableError(Exception):
    """The architecture leaves the outcome unspecified; simulation stops."""


class NotImplementedInstr(Exception):
    """The model has no semantics for what was requested."""


@dataclass(frozen=True)
class Cpsr:
    n: int = 0
    z: int = 0
    c: int = 0
    v: int = 0
    mode: ProcessorMode = ProcessorMode.svc
    other: int = 0

    def flag(self, name: str) -> int:
        return getattr(self, name.lower())

    def with_flag(self, name: str, bit: int) -> "Cpsr":
        return _evolve(self, name.lower(), bit & 1)

    def pack(self) -> int:
        return ((self.n << 31) | (self.z << 30) | (self.c << 29) | (self.v << 28)
                | (self.other & OTHER_MASK) | self.mode.value)

    @classmethod
    def unpack(cls, word: int) -> "Cpsr":
        return _unpack_cpsr(word & MASK32)


@functools.lru_cache(maxsize=4096)
def _unpack_cpsr(word: int) -> Cpsr:
    return Cpsr(n=(word >> 31) & 1, z=(word >> 30) & 1, c=(word >> 29) & 1,
                v=(word >> 28) & 1, mode=ProcessorMode.from_bits(word),
                other=word & OTHER_MASK)


# Physical register file: r0-r15 shared by usr/sys (r15 is the PC for every
# mode), then fiq r8-r14, then r13-r14 for irq, svc, abt, und.
NUM_PHYS_REGS = 31
_BANK_BASE = {ProcessorMode.irq: 23, ProcessorMode.svc: 25,
              ProcessorMode.abt: 27, ProcessorMode.und: 29}


def _bank_row(mode: ProcessorMode) -> tuple[int, ...]:
    row = list(range(16))
    if mode is ProcessorMode.fiq:
        row[8:15] = range(16, 23)
    elif mode in _BANK_BASE:
        base = _BANK_BASE[mode]
        row[13], row[14] = base, base + 1
    return tuple(row)


BANKING: Mapping[ProcessorMode, tuple[int, ...]] = MappingProxyType(
    {m: _bank_row(m) for m in ProcessorMode})


def phys_name(index: int) -> str:
    """Human-readable name of a physical register slot, e.g. ``r13_svc``."""
    if index < 16:
        return f"r{index}"
    if index < 23:
        return f"r{index - 8}_fiq"
    for mode, base in _BANK_BASE.items():
        if index in (base, base + 1):
            return f"r{13 + index - base}_{mode.name}"
    raise IndexError(index)


def _default_spsr() -> Mapping[ProcessorMode, Cpsr]:
    return MappingProxyType({m: Cpsr(mode=ProcessorMode.usr) for m in SPSR_MODES})


def _freeze(d: Mapping) -> Mapping:
    return MappingProxyType(dict(d))


@dataclass(frozen=True, eq=False)
class RefState:
    """Architectural state: status registers, banked registers, memory.

    ``regs[15]`` holds the address of the instruction being executed; a
    read of r15 through :func:`reg_content` sees that address plus 8.
    ``mem`` only stores non-zero bytes, so unwritten memory reads as 0.
    """
    cpsr: Cpsr = Cpsr()
    spsr: Mapping[ProcessorMode, Cpsr] = field(default_factory=_default_spsr)
    regs: tuple[int, ...] = (0,) * NUM_PHYS_REGS
    mem: Mapping[int, int] = field(default_factory=lambda: MappingProxyType({}))

    def __post_init__(self):
        if len(self.regs) != NUM_PHYS_REGS:
            raise MalformedState(f"expected {NUM_PHYS_REGS} physical registers")
        if set(self.spsr) != set(SPSR_MODES):
            raise MalformedState("SPSR bank must cover exactly the exception modes")
        if not isinstance(self.mem, MappingProxyType):
            object.__setattr__(self, "mem", _freeze({a: b for a, b in self.mem.items() if b}))
        if not isinstance(self.spsr, MappingProxyType):
            object.__setattr__(self, "spsr", _freeze(self.spsr))

    def __eq__(self, other):
        if not isinstance(other, RefState):
            return NotImplemented
        return (self.cpsr == other.cpsr and self.regs == other.regs
                and dict(self.spsr) == dict(other.spsr) and dict(self.mem) == dict(other.mem))

    def __hash__(self):
        return hash((self.cpsr, self.regs, tuple(sorted(self.mem.items()))))

    @property
    def mode(self) -> ProcessorMode:
        return self.cpsr.mode

    @property
    def pc(self) -> int:
        return self.regs[15]

    def with_pc(self, pc: int) -> "RefState":
        return self.with_phys(15, pc)

    def with_phys(self, index: int, value: int) -> "RefState":
        regs = list(self.regs)
        regs[index] = value & MASK32
        return _evolve(self, "regs", tuple(regs))

    def with_cpsr(self, cpsr: Cpsr) -> "RefState":
        return _evolve(self, "cpsr", cpsr)


# ---- register and status access -------------------------------------------

def reg_content(st: RefState, n: int, mode: ProcessorMode | None = None) -> int:
    assert 0 <= n <= 15, f"register index {n}"
    if n == 15:
        return (st.regs[15] + 8) & MASK32
    return st.regs[BANKING[mode or st.mode][n]]


def set_reg(st: RefState, n: int, v: int, mode: ProcessorMode | None = None) -> RefState:
    """Write register ``n`` of ``mode`` (default: current mode).

    Writing r15 stores the new instruction address; the caller is
    responsible for suppressing the automatic PC increment.
    """
    assert 0 <= n <= 15, f"register index {n}"
    return st.with_phys(BANKING[mode or st.mode][n], v)


def current_mode_has_spsr(st: RefState) -> bool:
    return st.mode.has_spsr


def read_spsr(st: RefState, mode: ProcessorMode | None = None) -> Cpsr:
    mode = mode or st.mode
    if not mode.has_spsr:
        raise UnpredictableError(f"SPSR access in mode {mode.name}, which has none")
    return st.spsr[mode]


def write_spsr(st: RefState, value: Cpsr, mode: ProcessorMode | None = None) -> RefState:
    mode = mode or st.mode
    if not mode.has_spsr:
        raise UnpredictableError(f"SPSR write in mode {mode.name}, which has none")
    spsr = dict(st.spsr)
    spsr[mode] = value
    return _evolve(st, "spsr", MappingProxyType(spsr))


def write_cpsr_word(st: RefState, word: int) -> RefState:
    try:
        return st.with_cpsr(Cpsr.unpack(word))
    except MalformedState as e:
        raise UnpredictableError(f"CPSR write: {e}") from None


# ---- memory -----------------------------------------------------------------

SIZES = {"byte": 1, "half": 2, "word": 4, 1: 1, 2: 2, 4: 4}


def _nbytes(size) -> int:
    try:
        return SIZES[size]
    except KeyError:
        raise ValueError(f"bad access size {size!r}") from None


def mem_read(st: RefState, addr: int, size="word") -> int:
    n = _nbytes(size)
    addr &= MASK32
    if addr % n:
        raise UnpredictableError(f"misaligned {n}-byte read at {addr:#010x}")
    mem = st.mem
    value = 0
    for i in range(n):
        value |= mem.get((addr + i) & MASK32, 0) << (8 * i)
    return value


def mem_write(st: RefState, addr: int, size, v: int) -> RefState:
    n = _nbytes(size)
    addr &= MASK32
    if addr % n:
        raise UnpredictableError(f"misaligned {n}-byte write at {addr:#010x}")
    mem = dict(st.mem)
    for i in range(n):
        a = (addr + i) & MASK32
        b = (v >> (8 * i)) & 0xFF
        if b:
            mem[a] = b
        else:
            mem.pop(a, None)
    return _evolve(st, "mem", MappingProxyType(mem))


def load_bytes(st: RefState, base: int, data: bytes) -> RefState:
    mem = dict(st.mem)
    for i, b in enumerate(data):
        a = (base + i) & MASK32
        if b:
            mem[a] = b
        else:
            mem.pop(a, None)
    return _evolve(st, "mem", MappingProxyType(mem))


# ---- monadic results ---------------------------------------------------------

@dataclass(frozen=True)
class SemState:
    """Operation-local view: locals, the PC-increment flag, and the state."""
    st: RefState
    loc: Mapping[str, int] = field(default_factory=lambda: MappingProxyType({}))
    bo: bool = True

    def with_local(self, name: str, value: int) -> "SemState":
        loc = dict(self.loc)
        loc[name] = value & MASK32
        return _evolve(self, "loc", MappingProxyType(loc))

    def __eq__(self, other):
        if not isinstance(other, SemState):
            return NotImplemented
        return self.st == other.st and self.bo == other.bo and dict(self.loc) == dict(other.loc)

    __hash__ = None


@dataclass(frozen=True)
class Ok:
    sem: SemState

    @property
    def st(self) -> RefState:
        return self.sem.st


@dataclass(frozen=True)
class Unpredictable:
    message: str


@dataclass(frozen=True)
class Unimplemented:
    """A request the model does not cover (the ``Todo`` outcome)."""
    message: str


SemResult = Ok | Unpredictable | Unimplemented


def outcome_class(result) -> str:
    if isinstance(result, Ok):
        return "ok"
    if isinstance(result, Unpredictable):
        return "unpredictable"
    if isinstance(result, Unimplemented):
        return "not_implemented"
    raise TypeError(result)
