"""Instruction words to (operation, fields) and back."""
from __future__ import annotations

import functools
from dataclasses import dataclass

from .bits import COND_NAMES, MASK32, sign_extend, to_signed
from .catalog import (
    RRX, Immediate, OperationSpec, Register, Shift, ShifterDescriptor, ShiftImm, ShiftReg,
    catalog, format_shifter,
)

_FORM_OF = {Immediate: "immediate", Register: "shift_imm", ShiftImm: "shift_imm",
            RRX: "shift_imm", ShiftReg: "shift_reg"}


class EncodeError(ValueError):
    pass


@dataclass(frozen=True)
class DecodedInstr:
    """An operation name, its operand fields in catalog order, and the shifter."""
    op: str
    fields: tuple[tuple[str, int], ...]
    shifter: ShifterDescriptor | None = None

    @classmethod
    def make(cls, op: str, shifter: ShifterDescriptor | None = None, **fields: int) -> "DecodedInstr":
        spec = default_decoder().spec(op)
        order = {name: i for i, name in enumerate(spec.operand_fields)}
        unknown = set(fields) - set(order)
        if unknown:
            raise EncodeError(f"{op} has no field {sorted(unknown)[0]!r}")
        return cls(op, tuple(sorted(fields.items(), key=lambda kv: order[kv[0]])), shifter)

    def field(self, name: str, default: int | None = None) -> int | None:
        for k, v in self.fields:
            if k == name:
                return v
        return default

    def as_dict(self) -> dict[str, int]:
        return dict(self.fields)

    @property
    def cond(self) -> int:
        return self.field("cond", 14)

    def replace(self, shifter: ShifterDescriptor | None = None, **fields: int) -> "DecodedInstr":
        d = self.as_dict()
        d.update(fields)
        return DecodedInstr(self.op, tuple((k, d[k]) for k, _ in self.fields),
                            shifter if shifter is not None else self.shifter)


@dataclass(frozen=True)
class Undefined:
    word: int


# Bucket index over bits 27..20, 7 and 4, which separate every catalog form.
_KEY_BITS = (27, 26, 25, 24, 23, 22, 21, 20, 7, 4)


def _key(word: int) -> int:
    k = 0
    for b in _KEY_BITS:
        k = (k << 1) | ((word >> b) & 1)
    return k


def _key_word(k: int) -> int:
    w = 0
    for i, b in enumerate(reversed(_KEY_BITS)):
        w |= ((k >> i) & 1) << b
    return w


class Decoder:
    def __init__(self, specs: tuple[OperationSpec, ...]):
        self.specs = specs
        self._by_name = {s.mnemonic: s for s in specs}
        entries = [(s, p) for s in specs for p in s.patterns]
        # Most specific first, so a future overlapping addition cannot shadow a narrower one.
        entries.sort(key=lambda e: -bin(e[1].mask).count("1"))
        self.entries = tuple(entries)
        key_mask = _key_word((1 << len(_KEY_BITS)) - 1)
        self._buckets = []
        for k in range(1 << len(_KEY_BITS)):
            w = _key_word(k)
            self._buckets.append(tuple(
                (s, p) for s, p in entries
                if (w ^ p.value) & p.mask & key_mask == 0))

    def spec(self, op: str) -> OperationSpec:
        try:
            return self._by_name[op]
        except KeyError:
            raise EncodeError(f"unknown operation {op!r}") from None

    def matches(self, word: int) -> list[tuple[OperationSpec, object]]:
        """Every (spec, pattern) matching ``word``; more than one means overlap."""
        return [(s, p) for s, p in self.entries if p.matches(word)]

    def decode(self, word: int) -> DecodedInstr | Undefined:
        word &= MASK32
        for spec, pat in self._buckets[_key(word)]:
            if word & pat.mask == pat.value:
                raw = pat.extract(word)
                fields = tuple((n, raw[n]) for n in pat.operand_fields)
                return DecodedInstr(spec.mnemonic, fields, _shifter(pat.form, raw))
        return Undefined(word)

    def encode(self, instr: DecodedInstr) -> int:
        spec = self.spec(instr.op)
        if spec.uses_shifter:
            if instr.shifter is None:
                raise EncodeError(f"{instr.op} needs a shifter operand")
            form = _FORM_OF[type(instr.shifter)]
        else:
            if instr.shifter is not None:
                raise EncodeError(f"{instr.op} takes no shifter operand")
            form = None
        pat = next(p for p in spec.patterns if p.form == form)
        given = instr.as_dict()
        if set(given) != set(pat.operand_fields) or len(given) != len(instr.fields):
            missing = set(pat.operand_fields) - set(given)
            name = sorted(missing or set(given) - set(pat.operand_fields) or {"fields"})[0]
            raise EncodeError(f"{instr.op}: field {name!r} missing or not encodable")
        if form is not None:
            given.update(_shifter_fields(instr.shifter))
        word = pat.value
        for name, hi, lo in pat.fields:
            v = given[name]
            if not isinstance(v, int) or not 0 <= v < (1 << (hi - lo + 1)):
                raise EncodeError(f"{instr.op}: field {name!r}={v!r} out of range")
            word |= v << lo
        return word


def _shifter(form: str | None, raw: dict[str, int]) -> ShifterDescriptor | None:
    if form is None:
        return None
    if form == "immediate":
        return Immediate(raw["rotate_imm"], raw["immed_8"])
    shift = Shift(raw["shift"])
    if form == "shift_reg":
        return ShiftReg(raw["m"], shift, raw["s"])
    amount = raw["shift_imm"]
    if amount == 0 and shift is Shift.LSL:
        return Register(raw["m"])
    if amount == 0 and shift is Shift.ROR:
        return RRX(raw["m"])
    return ShiftImm(raw["m"], shift, amount)


def _check(name: str, v, limit: int) -> int:
    if not isinstance(v, int) or not 0 <= v < limit:
        raise EncodeError(f"shifter field {name!r}={v!r} out of range")
    return v


def _shifter_fields(sh: ShifterDescriptor) -> dict[str, int]:
    match sh:
        case Immediate(rotate_imm=r, immed_8=i):
            return {"rotate_imm": _check("rotate_imm", r, 16), "immed_8": _check("immed_8", i, 256)}
        case Register(m=m):
            return {"m": _check("m", m, 16), "shift": 0, "shift_imm": 0}
        case RRX(m=m):
            return {"m": _check("m", m, 16), "shift": int(Shift.ROR), "shift_imm": 0}
        case ShiftImm(m=m, shift=sh_, amount=a):
            low = 1 if Shift(sh_) in (Shift.LSL, Shift.ROR) else 0
            if not isinstance(a, int) or not low <= a <= 31:
                raise EncodeError(f"shifter field 'amount'={a!r} out of range for {Shift(sh_).name}")
            return {"m": _check("m", m, 16), "shift": int(sh_), "shift_imm": a}
        case ShiftReg(m=m, shift=sh_, s=s):
            return {"m": _check("m", m, 16), "shift": int(Shift(sh_)), "s": _check("s", s, 16)}
    raise EncodeError(f"not a shifter descriptor: {sh!r}")


@functools.lru_cache(maxsize=None)
def _decoder_for(specs: tuple[OperationSpec, ...]) -> Decoder:
    return Decoder(specs)


_DEFAULT: Decoder | None = None


def default_decoder() -> Decoder:
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = _decoder_for(catalog())
    return _DEFAULT


def decode(word: int) -> DecodedInstr | Undefined:
    return default_decoder().decode(word)


def encode(instr: DecodedInstr) -> int:
    return default_decoder().encode(instr)


def static_unpredictable(instr: DecodedInstr) -> str | None:
    """Encodings that are unpredictable whatever the state or condition.

    Register-shifted operands may not name r15 in any register field.
    """
    if isinstance(instr.shifter, ShiftReg):
        regs = {"m": instr.shifter.m, "s": instr.shifter.s}
        for name in ("d", "n"):
            v = instr.field(name)
            if v is not None:
                regs[name] = v
        bad = sorted(k for k, v in regs.items() if v == 15)
        if bad:
            return f"{instr.op}: register-shifted operand with R{bad[0]} = r15"
    return None


def disassemble(instr: DecodedInstr | Undefined, pc: int | None = None) -> str:
    if isinstance(instr, Undefined):
        return f".word {instr.word:#010x}"
    f = instr.as_dict()
    cond = COND_NAMES[f.get("cond", 14)].lower()
    cond = "" if cond == "al" else cond
    name = instr.op.lower()
    if "signed_immed_24" in f:
        off = to_signed(sign_extend(f["signed_immed_24"], 24)) << 2
        target = f"{(pc + 8 + off) & MASK32:#x}" if pc is not None else f"pc{off + 8:+#x}"
        return f"{name}{cond} {target}"
    s = "s" if f.get("S") == 1 else ""
    ops = [f"r{f[k]}" for k in ("d", "n") if k in f]
    if instr.shifter is not None:
        ops.append(format_shifter(instr.shifter))
    return f"{name}{cond}{s} {', '.join(ops)}"
