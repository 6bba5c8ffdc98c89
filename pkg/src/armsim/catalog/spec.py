"""Operation specs: encoding tables plus pseudocode, loaded from data files.

A catalog directory holds, per operation, ``<NAME>.pcode`` (pseudocode in
the frontend grammar) and ``<NAME>.json`` (opcode id and encoding
patterns).  Adding an operation means dropping in those two files.
"""
from __future__ import annotations

import functools
import json
from dataclasses import dataclass, field
from pathlib import Path

# Module import (not names): the parser itself imports this package.
from .. import pseudocode
from ..pseudocode.ast import Assign, BitRange, Flag, OperationAst, walk_stm

DATA_DIR = Path(__file__).parent / "data"

# Raw encoding fields consumed by addressing mode 1, per shifter form.
SHIFTER_FORMS = {
    "immediate": ("rotate_imm", "immed_8"),
    "shift_imm": ("shift_imm", "shift", "m"),
    "shift_reg": ("s", "shift", "m"),
}
SHIFTER_PARAMS = ("shifter_operand", "shifter_carry_out")


class CatalogError(ValueError):
    pass


@dataclass(frozen=True)
class EncodingPattern:
    mask: int
    value: int
    fields: tuple[tuple[str, int, int], ...]
    form: str | None = None

    def __post_init__(self):
        used = 0
        for name, hi, lo in self.fields:
            if not 0 <= lo <= hi <= 31:
                raise CatalogError(f"field {name} has bad range {hi}..{lo}")
            bits = ((1 << (hi - lo + 1)) - 1) << lo
            if bits & used:
                raise CatalogError(f"field {name} overlaps another field")
            if bits & self.mask:
                raise CatalogError(f"field {name} overlaps fixed bits")
            used |= bits
        if self.value & ~self.mask:
            raise CatalogError("pattern value has bits outside its mask")
        if self.form is not None and self.form not in SHIFTER_FORMS:
            raise CatalogError(f"unknown shifter form {self.form!r}")

    def matches(self, word: int) -> bool:
        return word & self.mask == self.value

    def extract(self, word: int) -> dict[str, int]:
        return {name: (word >> lo) & ((1 << (hi - lo + 1)) - 1) for name, hi, lo in self.fields}

    @property
    def operand_fields(self) -> tuple[str, ...]:
        """Field names that are bound directly as operation parameters."""
        skip = SHIFTER_FORMS.get(self.form, ())
        return tuple(name for name, _, _ in self.fields if name not in skip)


@dataclass(frozen=True)
class OperationSpec:
    opcode: int
    mnemonic: str
    patterns: tuple[EncodingPattern, ...]
    source: str
    ast: OperationAst = field(compare=False, repr=False)
    resolved: OperationAst = field(compare=False, repr=False)

    @property
    def pattern(self) -> EncodingPattern:
        return self.patterns[0]

    @property
    def uses_shifter(self) -> bool:
        return self.patterns[0].form is not None

    @property
    def operand_fields(self) -> tuple[str, ...]:
        return self.patterns[0].operand_fields

    @property
    def flags_affected(self) -> str:
        written = set()
        for s in walk_stm(self.ast.body):
            if isinstance(s, Assign):
                dst = s.dst.exp if isinstance(s.dst, BitRange) else s.dst
                if isinstance(dst, Flag):
                    written.add(dst.name)
        return "".join(f for f in "NZCV" if f in written)


def _load_one(pcode: Path, enc_path: Path) -> OperationSpec:
    source = pcode.read_text(encoding="utf-8")
    ast = pseudocode.parse_operation(source)
    enc = json.loads(enc_path.read_text(encoding="utf-8"))
    if enc["name"] != ast.name:
        raise CatalogError(f"{enc_path.name}: name {enc['name']!r} does not match {ast.name!r}")
    patterns = tuple(
        EncodingPattern(int(p["mask"], 16), int(p["value"], 16),
                        tuple((f[0], int(f[1]), int(f[2])) for f in p["fields"]), p.get("form"))
        for p in enc["patterns"])
    if not patterns:
        raise CatalogError(f"{ast.name}: no encoding patterns")
    operands = {p.operand_fields for p in patterns}
    shifted = {p.form is not None for p in patterns}
    if len(operands) != 1 or len(shifted) != 1:
        raise CatalogError(f"{ast.name}: patterns disagree on operand fields")
    expected = set(patterns[0].operand_fields)
    if patterns[0].form is not None:
        expected |= set(SHIFTER_PARAMS)
    declared = {p.name for p in ast.params}
    if declared != expected:
        raise CatalogError(f"{ast.name}: parameters {sorted(declared)} do not match "
                           f"encoding fields {sorted(expected)}")
    return OperationSpec(int(enc["opcode"]), ast.name, patterns, source, ast,
                         pseudocode.resolve_old_params(ast))


def load_catalog(directory: str | Path) -> tuple[OperationSpec, ...]:
    """Load every ``*.pcode``/``*.json`` pair in ``directory``, ordered by opcode."""
    directory = Path(directory)
    specs = []
    for pcode in sorted(directory.glob("*.pcode")):
        enc = pcode.with_suffix(".json")
        if not enc.exists():
            raise CatalogError(f"{pcode.name} has no encoding file")
        specs.append(_load_one(pcode, enc))
    if not specs:
        raise CatalogError(f"no operations found in {directory}")
    specs.sort(key=lambda s: s.opcode)
    seen: dict[int, str] = {}
    for s in specs:
        if s.opcode in seen:
            raise CatalogError(f"opcode {s.opcode} used by {seen[s.opcode]} and {s.mnemonic}")
        seen[s.opcode] = s.mnemonic
    return tuple(specs)


@functools.lru_cache(maxsize=None)
def _cached(directory: str) -> tuple[OperationSpec, ...]:
    return load_catalog(directory)


def catalog(directory: str | Path | None = None) -> tuple[OperationSpec, ...]:
    """The bundled operation catalog (or the one in ``directory``), cached."""
    return _cached(str(Path(directory or DATA_DIR).resolve()))


def by_name(specs=None) -> dict[str, OperationSpec]:
    return {s.mnemonic: s for s in (specs or catalog())}
