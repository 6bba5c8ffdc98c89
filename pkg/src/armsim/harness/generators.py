"""Random processor states and instructions for differential testing."""
from __future__ import annotations

import hashlib
import struct

from ..catalog import OperationSpec
from ..decoder import DecodedInstr, Decoder, Undefined
from ..fast import runtime as rt
from ..fast.engine import FastProcessor
from ..state import BANKING, OTHER_MASK, ProcessorMode, RefState


class SeedRng:
    """Deterministic byte stream expanded from a seed with SHAKE-128.

    Seeding is a single hash call, much cheaper than ``random.Random``.
    Implements the subset of the ``random.Random`` interface used here.
    """
    __slots__ = ("_key", "_buf", "_pos")

    def __init__(self, seed: int):
        self._key = str(seed).encode()
        self._buf = hashlib.shake_128(self._key).digest(256)
        self._pos = 0

    def bytes(self, n: int) -> bytes:
        end = self._pos + n
        if end > len(self._buf):
            self._buf = hashlib.shake_128(self._key).digest(2 * len(self._buf) + n)
        b = self._buf[self._pos:end]
        self._pos = end
        return b

    def take(self, n: int) -> int:
        """The next ``n`` bytes as a little-endian integer."""
        return int.from_bytes(self.bytes(n), "little")

    def getrandbits(self, k: int) -> int:
        return self.take((k + 7) >> 3) & ((1 << k) - 1)

    def random(self) -> float:
        return (self.take(7) >> 3) * (1.0 / (1 << 53))

    def randrange(self, n: int) -> int:
        return self.take(8) % n

    def choice(self, seq):
        return seq[self.take(8) % len(seq)]


CORNERS = (0, 1, 0x7FFFFFFF, 0x80000000, 0xFFFFFFFF)
CORNER_RATE = 0.3
MODES = tuple(ProcessorMode)


_CORNER_CUT = int(256 * CORNER_RATE)
_SMALL_CUT = _CORNER_CUT + 13


def _biased(sel: int, v: int) -> int:
    if sel < _CORNER_CUT:
        return CORNERS[sel % len(CORNERS)]
    if sel < _SMALL_CUT:
        return v & 31
    return v


def word(rng: SeedRng) -> int:
    """A 32-bit value, biased towards the arithmetic corner cases."""
    x = rng.take(5)
    return _biased(x & 0xFF, x >> 8)


# One draw covers a whole state: per physical register a selector byte and a
# value; mode, flags and CPSR extra bits; five SPSRs; up to two 8-byte
# memory chunks.
_NREG = 31
_STATE = struct.Struct(f"<{_NREG}B{_NREG}IBBBI5B5BB2I2Q")


def fill_random(proc: FastProcessor, rng: SeedRng) -> None:
    """Overwrite ``proc`` with a random state drawn from ``rng``."""
    d = _STATE.unpack(rng.bytes(_STATE.size))
    sels, vals = d[:_NREG], d[_NREG:2 * _NREG]
    mode_b, flag_b, other_sel, other, *rest = d[2 * _NREG:]
    spsr_modes, spsr_flags = rest[:5], rest[5:10]
    n_mem, addrs, chunks = rest[10], rest[11:13], rest[13:15]
    proc.reset()
    mode = MODES[mode_b % len(MODES)]
    phys = list(map(_biased, sels, vals))
    phys[15] &= ~3
    proc.phys[:] = phys
    regs = [phys[i] for i in BANKING[mode]]
    regs[15] = (phys[15] + 8) & rt.M
    proc.regs[:] = regs
    proc.flags[:] = (flag_b & 1, (flag_b >> 1) & 1, (flag_b >> 2) & 1, (flag_b >> 3) & 1)
    proc.ctrl[rt.C_MODE] = mode.value
    if other_sel < 64:
        proc.ctrl[rt.C_OTHER] = other & OTHER_MASK
    proc.spsr[:] = [(f << 28) & 0xF0000000 | MODES[m % len(MODES)].value
                    for m, f in zip(spsr_modes, spsr_flags)]
    for i in range(n_mem % 3):
        proc.write_bytes(addrs[i] & ~3, chunks[i].to_bytes(8, "little"))


def random_state(seed: int, proc: FastProcessor | None = None) -> tuple[RefState, FastProcessor]:
    """A projective-related pair: a random fast processor and its projection.

    Pass ``proc`` to refill an existing processor instead of allocating one.
    """
    proc = proc or FastProcessor()
    fill_random(proc, SeedRng(seed))
    return proc.project(), proc


def random_instr(rng: SeedRng, spec: OperationSpec, decoder: Decoder) -> DecodedInstr:
    """A random decodable instance of ``spec``: one of its patterns with random field bits."""
    pat = rng.choice(spec.patterns)
    w = pat.value | (rng.getrandbits(32) & ~pat.mask & rt.M)
    if rng.random() < 0.7:
        # Mostly AL so the body runs; other conditions still get a fair share.
        w = (w & 0x0FFFFFFF) | (14 << 28)
    instr = decoder.decode(w)
    assert not isinstance(instr, Undefined) and instr.op == spec.mnemonic, hex(w)
    return instr


def case_seed(base: int, opcode: int, i: int) -> int:
    """Deterministic per-case seed for case ``i`` of operation ``opcode``."""
    return (base << 40) | (opcode << 32) | i
