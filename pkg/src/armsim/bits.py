"""32-bit word primitives shared by both engines.

Words are plain Python ints kept in ``0 <= w < 2**32``; bits are ints in {0, 1}.
"""

MASK32 = 0xFFFFFFFF

# Condition field values, in encoding order.
COND_NAMES = ("EQ", "NE", "CS", "CC", "MI", "PL", "VS", "VC",
              "HI", "LS", "GE", "LT", "GT", "LE", "AL", "NV")
EQ, NE, CS, CC, MI, PL, VS, VC, HI, LS, GE, LT, GT, LE, AL, NV = range(16)


def get_bit(w: int, i: int) -> int:
    assert 0 <= i <= 31, f"bit index {i} out of range"
    return (w >> i) & 1


def get_bits(w: int, hi: int, lo: int) -> int:
    assert 0 <= lo <= hi <= 31, f"bad bit range [{hi}:{lo}]"
    return (w >> lo) & ((1 << (hi - lo + 1)) - 1)


def set_bit_range(w: int, hi: int, lo: int, v: int) -> int:
    """Return ``w`` with bits ``hi..lo`` replaced by the low bits of ``v``."""
    assert 0 <= lo <= hi <= 31, f"bad bit range [{hi}:{lo}]"
    field = ((1 << (hi - lo + 1)) - 1) << lo
    return ((w & ~field) | ((v << lo) & field)) & MASK32


def sign_extend(v: int, bits: int) -> int:
    """Sign-extend the low ``bits`` bits of ``v`` to a 32-bit word."""
    v &= (1 << bits) - 1
    if v >> (bits - 1):
        v |= MASK32 ^ ((1 << bits) - 1)
    return v


def to_signed(w: int) -> int:
    return w - (1 << 32) if w & 0x80000000 else w


def carry_from_add3(a: int, b: int, c: int) -> int:
    return (a + b + c) >> 32


def overflow_from_add3(a: int, b: int, c: int) -> int:
    # Same-sign operands whose sum changes sign.
    r = (a + b + c) & MASK32
    return ((a ^ r) & (b ^ r)) >> 31


def borrow_from_sub3(a: int, b: int, c: int) -> int:
    return 1 if a < b + c else 0


def overflow_from_sub3(a: int, b: int, c: int) -> int:
    r = (a - b - c) & MASK32
    return ((a ^ b) & (a ^ r)) >> 31


def condition_passed(n: int, z: int, c: int, v: int, cond: int) -> bool:
    """Evaluate a condition field against the four flags.

    ``cond == 0b1111`` has no meaning here; callers turn it into an
    UNPREDICTABLE outcome before calling, so it raises ``ValueError``.
    """
    if cond == AL:
        return True
    if cond == EQ:
        return z == 1
    if cond == NE:
        return z == 0
    if cond == CS:
        return c == 1
    if cond == CC:
        return c == 0
    if cond == MI:
        return n == 1
    if cond == PL:
        return n == 0
    if cond == VS:
        return v == 1
    if cond == VC:
        return v == 0
    if cond == HI:
        return c == 1 and z == 0
    if cond == LS:
        return c == 0 or z == 1
    if cond == GE:
        return n == v
    if cond == LT:
        return n != v
    if cond == GT:
        return z == 0 and n == v
    if cond == LE:
        return z == 1 or n != v
    raise ValueError(f"condition {cond:#x} has no truth value")
