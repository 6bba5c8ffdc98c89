"""Primitive functions callable from pseudocode.

The reference engine calls ``Builtin.fn`` directly.  The fast engine has
its own compiled versions of the same names (see ``armsim.fast.runtime``);
the differential harness is what keeps the two in agreement.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .. import bits
from ..state import RefState, UnpredictableError, current_mode_has_spsr


@dataclass(frozen=True)
class Builtin:
    name: str
    arity: int
    width: int                 # 1 for bit-valued results, 32 for words
    uses_state: bool
    fn: Callable[..., int]     # fn(state, *args) if uses_state else fn(*args)


def _condition_passed(st: RefState, cond: int) -> int:
    if cond == bits.NV:
        raise UnpredictableError("ConditionPassed: condition field 0b1111")
    c = st.cpsr
    return int(bits.condition_passed(c.n, c.z, c.c, c.v, cond & 0xF))


def _get_bit(w: int, i: int) -> int:
    if not 0 <= i <= 31:
        raise UnpredictableError(f"get_bit: index {i} out of range")
    return bits.get_bit(w, i)


def _sign_extend(w: int, width: int) -> int:
    if not 1 <= width <= 32:
        raise UnpredictableError(f"SignExtend: width {width} out of range")
    return bits.sign_extend(w, width)


BUILTINS: dict[str, Builtin] = {b.name: b for b in (
    Builtin("ConditionPassed", 1, 1, True, _condition_passed),
    Builtin("CurrentModeHasSPSR", 0, 1, True, lambda st: int(current_mode_has_spsr(st))),
    Builtin("CarryFrom_add2", 2, 1, False, lambda a, b: bits.carry_from_add3(a, b, 0)),
    Builtin("CarryFrom_add3", 3, 1, False, bits.carry_from_add3),
    Builtin("OverflowFrom_add2", 2, 1, False, lambda a, b: bits.overflow_from_add3(a, b, 0)),
    Builtin("OverflowFrom_add3", 3, 1, False, bits.overflow_from_add3),
    Builtin("BorrowFrom_sub2", 2, 1, False, lambda a, b: bits.borrow_from_sub3(a, b, 0)),
    Builtin("BorrowFrom_sub3", 3, 1, False, bits.borrow_from_sub3),
    Builtin("OverflowFrom_sub2", 2, 1, False, lambda a, b: bits.overflow_from_sub3(a, b, 0)),
    Builtin("OverflowFrom_sub3", 3, 1, False, bits.overflow_from_sub3),
    Builtin("get_bit", 2, 1, False, _get_bit),
    Builtin("NOT", 1, 32, False, lambda w: ~w & bits.MASK32),
    Builtin("NOT_bit", 1, 1, False, lambda b: (b & 1) ^ 1),
    Builtin("SignExtend", 2, 32, False, _sign_extend),
)}

# Statement-level procedures.  ``Todo`` marks semantics the catalog does not
# provide yet and yields a not-implemented outcome.
PROCEDURES: dict[str, int] = {"Todo": 0}


def builtin(name: str, args, st: RefState | None = None) -> int:
    """Call primitive ``name`` on word arguments.

    >>> builtin("CarryFrom_add3", [0xFFFFFFFF, 1, 0])
    1
    """
    b = BUILTINS[name]
    if len(args) != b.arity:
        raise TypeError(f"{name} takes {b.arity} arguments, got {len(args)}")
    if b.uses_state:
        if st is None:
            raise TypeError(f"{name} needs a processor state")
        return b.fn(st, *args)
    return b.fn(*args)
