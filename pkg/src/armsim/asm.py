"""A small assembler for the catalog's instructions.

Enough to build test programs: data-processing ops with condition and S
suffixes, the shifter operand forms, B/BL to labels, ``.word``, and
``@``/``;`` comments.  Accepts what :func:`armsim.decoder.disassemble` prints.
"""
from __future__ import annotations

import re
import struct

from .bits import COND_NAMES, MASK32, to_signed
from .catalog import RRX, Immediate, Register, Shift, ShiftImm, ShiftReg
from .decoder import DecodedInstr, default_decoder

_COND = {c.lower(): i for i, c in enumerate(COND_NAMES) if c != "NV"}
_COND.update(hs=2, lo=3)
_REG_ALIAS = {"sp": 13, "lr": 14, "pc": 15}
_LABEL = re.compile(r"^([A-Za-z_.][\w.]*):")


class AsmError(ValueError):
    def __init__(self, line: int, msg: str):
        super().__init__(f"line {line}: {msg}")
        self.line = line


def _reg(tok: str, line: int) -> int:
    t = tok.strip().lower()
    if t in _REG_ALIAS:
        return _REG_ALIAS[t]
    if re.fullmatch(r"r(1[0-5]|[0-9])", t):
        return int(t[1:])
    raise AsmError(line, f"expected a register, got {tok!r}")


def _int(tok: str, line: int) -> int:
    try:
        return int(tok.strip().lstrip("#"), 0)
    except ValueError:
        raise AsmError(line, f"bad number {tok!r}") from None


def encode_immediate(value: int) -> Immediate | None:
    """The rotated 8-bit form of ``value``, smallest rotation first."""
    value &= MASK32
    for rot in range(16):
        v = ((value << (2 * rot)) | (value >> (32 - 2 * rot))) & MASK32 if rot else value
        if v < 256:
            return Immediate(rot, v)
    return None


def _shifter(ops: list[str], line: int):
    first = ops[0].strip()
    if first.startswith("#"):
        if len(ops) != 1:
            raise AsmError(line, "immediate operand takes no shift")
        imm = encode_immediate(_int(first, line))
        if imm is None:
            raise AsmError(line, f"{first} is not a rotated 8-bit immediate")
        return imm
    m = _reg(first, line)
    if len(ops) == 1:
        return Register(m)
    if len(ops) != 2:
        raise AsmError(line, "too many operands")
    parts = ops[1].split()
    kind = parts[0].lower()
    if kind == "rrx" and len(parts) == 1:
        return RRX(m)
    if len(parts) != 2 or kind.upper() not in Shift.__members__:
        raise AsmError(line, f"bad shift {ops[1]!r}")
    sh = Shift[kind.upper()]
    if parts[1].startswith("#"):
        amount = _int(parts[1], line)
        if amount == 0 and sh is Shift.LSL:
            return Register(m)
        if amount == 32 and sh in (Shift.LSR, Shift.ASR):
            return ShiftImm(m, sh, 0)
        if not 1 <= amount <= 31:
            raise AsmError(line, f"shift amount {amount} out of range")
        return ShiftImm(m, sh, amount)
    return ShiftReg(m, sh, _reg(parts[1], line))


def _split_mnemonic(word: str, specs, line: int) -> tuple[str, int, int]:
    """(operation, cond, S) for e.g. ``addeqs``; S suffixes only on ops with a shifter."""
    w = word.lower()
    for spec in sorted(specs, key=lambda s: len(s.mnemonic), reverse=True):
        n = spec.mnemonic.lower()
        if not w.startswith(n):
            continue
        rest = w[len(n):]
        tails = ("", "s") if spec.uses_shifter else ("",)
        for cond_txt, cond in [("", 14)] + list(_COND.items()):
            if rest.startswith(cond_txt) and rest[len(cond_txt):] in tails:
                return spec.mnemonic, cond, int(rest[len(cond_txt):] == "s")
    raise AsmError(line, f"unknown mnemonic {word!r}")


def _operands(text: str) -> list[str]:
    # Split on commas, but keep "rM, <shift>" as two entries.
    return [p.strip() for p in text.split(",")] if text.strip() else []


def assemble(source: str, base: int = 0) -> bytes:
    dec = default_decoder()
    items: list[tuple[int, str, str]] = []
    labels: dict[str, int] = {}
    addr = base
    for n, raw in enumerate(source.splitlines(), 1):
        text = re.split(r"[@;]", raw, maxsplit=1)[0].strip()
        while (m := _LABEL.match(text)):
            if m.group(1) in labels:
                raise AsmError(n, f"duplicate label {m.group(1)!r}")
            labels[m.group(1)] = addr
            text = text[m.end():].strip()
        if not text:
            continue
        op, _, rest = text.partition(" ")
        items.append((n, op, rest.strip()))
        addr += 4
    out = bytearray()
    for i, (n, op, rest) in enumerate(items):
        pc = base + 4 * i
        if op.lower() == ".word":
            out += struct.pack("<I", _int(rest, n) & MASK32)
            continue
        name, cond, s = _split_mnemonic(op, dec.specs, n)
        spec = dec.spec(name)
        fields = {"cond": cond}
        if "signed_immed_24" in spec.operand_fields:
            tgt = rest.strip()
            target = pc if tgt == "." else labels.get(tgt)
            if target is None:
                target = _int(tgt, n) if re.fullmatch(r"#?(0x[0-9a-fA-F]+|\d+)", tgt) else None
            if target is None:
                raise AsmError(n, f"unknown label {tgt!r}")
            off = to_signed((target - (pc + 8)) & MASK32)    # addresses wrap
            if off % 4 or not -(1 << 25) <= off < (1 << 25):
                raise AsmError(n, f"branch target {target:#x} out of range")
            fields["signed_immed_24"] = (off >> 2) & 0xFFFFFF
            out += struct.pack("<I", dec.encode(DecodedInstr.make(name, **fields)))
            continue
        ops = _operands(rest)
        regs = [f for f in ("d", "n") if f in spec.operand_fields]
        if len(ops) < len(regs) + 1:
            raise AsmError(n, f"{name} needs {len(regs) + 1} operands")
        for f, tok in zip(regs, ops):
            fields[f] = _reg(tok, n)
        if "S" in spec.operand_fields:
            fields["S"] = s
        shifter = _shifter(ops[len(regs):], n)
        out += struct.pack("<I", dec.encode(DecodedInstr.make(name, shifter, **fields)))
    return bytes(out)
