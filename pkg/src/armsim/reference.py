"""Reference interpreter: operation ASTs evaluated over immutable states.

Errors raised while evaluating are turned into ``Unpredictable`` or
``Unimplemented`` results at the operation boundary, so a fault anywhere in
a body abandons the rest of it.
"""
from __future__ import annotations

from dataclasses import dataclass
from types import MappingProxyType

from .bits import MASK32, set_bit_range
from .catalog import OperationSpec, builtin, by_name, catalog, compute_shifter_operand
from .catalog.spec import SHIFTER_PARAMS
from .decoder import DecodedInstr, Decoder, Undefined, default_decoder, static_unpredictable
from .pseudocode.ast import (
    CPSR, SPSR, Assign, BinOp, BitRange, Block, Case, Const, Exp, Flag, For, Fun, If, IfExp,
    Memory, OldFlag, OldParam, OperationAst, Proc, Reg, Stm, UnpredictableStm, Var,
)
from .state import (
    Cpsr, MalformedState, NotImplementedInstr, Ok, ProcessorMode, RefState, SemResult,
    SemState, Unimplemented, Unpredictable, UnpredictableError, mem_read, mem_write,
    read_spsr, reg_content, set_reg, write_cpsr_word, write_spsr,
)


def _mode(name: str | None) -> ProcessorMode | None:
    return ProcessorMode[name] if name else None


def _reg_index(v: int) -> int:
    if not 0 <= v <= 15:
        raise UnpredictableError(f"register index {v} out of range")
    return v


def binop(op: str, a: int, b: int) -> int:
    """Word semantics of the strict binary operators."""
    if op == "+":
        return (a + b) & MASK32
    if op == "-":
        return (a - b) & MASK32
    if op == "==":
        return int(a == b)
    if op == "!=":
        return int(a != b)
    if op == "AND":
        return a & b
    if op == "OR":
        return a | b
    if op == "EOR":
        return a ^ b
    if op == "<<":
        return (a << b) & MASK32 if b < 32 else 0
    if op == ">>":
        return a >> b if b < 32 else 0
    raise ValueError(f"unknown operator {op!r}")


def _binop(e: BinOp, entry: RefState, cur: SemState) -> int:
    if e.op == "and":
        return int(bool(_eval(e.left, entry, cur)) and bool(_eval(e.right, entry, cur)))
    if e.op == "or":
        return int(bool(_eval(e.left, entry, cur)) or bool(_eval(e.right, entry, cur)))
    return binop(e.op, _eval(e.left, entry, cur), _eval(e.right, entry, cur))


def _bit_range(e: BitRange, entry: RefState, cur: SemState) -> int:
    return (_eval(e.exp, entry, cur) >> e.lo) & ((1 << (e.hi - e.lo + 1)) - 1)


# One evaluator per expression constructor, keyed by type for fast dispatch.
_EVAL = {
    Const: lambda e, entry, cur: e.value & MASK32,
    Var: lambda e, entry, cur: cur.loc[e.name],
    Flag: lambda e, entry, cur: cur.st.cpsr.flag(e.name),
    OldFlag: lambda e, entry, cur: entry.cpsr.flag(e.name),
    OldParam: lambda e, entry, cur: reg_content(entry, _reg_index(cur.loc[e.name])),
    Reg: lambda e, entry, cur: reg_content(cur.st, _reg_index(_eval(e.index, entry, cur)),
                                           _mode(e.mode)),
    CPSR: lambda e, entry, cur: cur.st.cpsr.pack(),
    SPSR: lambda e, entry, cur: read_spsr(cur.st, _mode(e.mode)).pack(),
    Memory: lambda e, entry, cur: mem_read(cur.st, _eval(e.addr, entry, cur), e.size),
    BinOp: _binop,
    IfExp: lambda e, entry, cur: _eval(e.then if _eval(e.cond, entry, cur) else e.orelse,
                                       entry, cur),
    Fun: lambda e, entry, cur: builtin(e.name, [_eval(a, entry, cur) for a in e.args],
                                       cur.st) & MASK32,
    BitRange: _bit_range,
}


def _eval(e: Exp, entry: RefState, cur: SemState) -> int:
    try:
        fn = _EVAL[type(e)]
    except KeyError:
        raise TypeError(f"cannot evaluate {e!r}") from None
    return fn(e, entry, cur)


def eval_exp(e: Exp, entry: RefState, cur: SemState) -> int | Unpredictable | Unimplemented:
    """Value of ``e``; ``OldParam``/``OldFlag`` read ``entry``, the rest read ``cur``."""
    try:
        return _eval(e, entry, cur)
    except UnpredictableError as err:
        return Unpredictable(str(err))
    except NotImplementedInstr as err:
        return Unimplemented(str(err))


def _assign(dst: Exp, v: int, entry: RefState, cur: SemState) -> SemState:
    st = cur.st
    match dst:
        case Var(name=n):
            return cur.with_local(n, v)
        case Flag(name=n):
            return SemState(st.with_cpsr(st.cpsr.with_flag(n, v)), cur.loc, cur.bo)
        case Reg(index=i, mode=m):
            r = _reg_index(_eval(i, entry, cur))
            return SemState(set_reg(st, r, v, _mode(m)), cur.loc, cur.bo and r != 15)
        case BitRange(exp=Reg(index=i, mode=m), hi=hi, lo=lo):
            r = _reg_index(_eval(i, entry, cur))
            old = reg_content(st, r, _mode(m))
            return SemState(set_reg(st, r, set_bit_range(old, hi, lo, v), _mode(m)),
                            cur.loc, cur.bo and r != 15)
        case CPSR():
            return SemState(write_cpsr_word(st, v), cur.loc, cur.bo)
        case SPSR(mode=m):
            try:
                value = Cpsr.unpack(v)
            except MalformedState as err:
                raise UnpredictableError(f"SPSR write: {err}") from None
            return SemState(write_spsr(st, value, _mode(m)), cur.loc, cur.bo)
        case Memory(addr=a, size=n):
            return SemState(mem_write(st, _eval(a, entry, cur), n, v), cur.loc, cur.bo)
    raise TypeError(f"not an assignable location: {dst!r}")


def _exec(s: Stm, entry: RefState, cur: SemState) -> SemState:
    match s:
        case Assign(dst=d, src=src):
            return _assign(d, _eval(src, entry, cur), entry, cur)
        case Block(body=body):
            for sub in body:
                cur = _exec(sub, entry, cur)
            return cur
        case If(cond=c, then=t, orelse=o):
            if _eval(c, entry, cur):
                return _exec(t, entry, cur)
            return _exec(o, entry, cur) if o is not None else cur
        case For(counter=k, start=a, stop=b, body=body):
            lo, hi = _eval(a, entry, cur), _eval(b, entry, cur)
            for i in range(lo, hi + 1):
                cur = _exec(body, entry, cur.with_local(k, i))
            return cur
        case Case(exp=x, arms=arms, default=d):
            v = _eval(x, entry, cur)
            for label, arm in arms:
                if v == label:
                    return _exec(arm, entry, cur)
            return _exec(d, entry, cur)
        case UnpredictableStm():
            raise UnpredictableError("UNPREDICTABLE")
        case Proc(name="Todo"):
            raise NotImplementedInstr("Todo")
    raise TypeError(f"cannot execute {s!r}")


def exec_stm(s: Stm, entry: RefState, cur: SemState) -> SemResult:
    try:
        return Ok(_exec(s, entry, cur))
    except UnpredictableError as err:
        return Unpredictable(str(err))
    except NotImplementedInstr as err:
        return Unimplemented(str(err))


def run_operation(op: OperationAst, args: dict[str, int], st: RefState) -> SemResult:
    """Bind ``args``, run the body on ``st``; the caller advances the PC when ``bo``."""
    missing = {p.name for p in op.params} - set(args)
    if missing:
        raise ValueError(f"{op.ident}: missing arguments {sorted(missing)}")
    loc = {}
    for p in op.params:
        v = args[p.name]
        if p.kind == "register-index" and not 0 <= v <= 15:
            raise ValueError(f"{op.ident}: register argument {p.name}={v}")
        loc[p.name] = v & MASK32
    res = exec_stm(op.body, st, SemState(st, MappingProxyType(loc), True))
    if isinstance(res, Unpredictable):
        return Unpredictable(f"{op.ident}: {res.message}")
    if isinstance(res, Unimplemented):
        return Unimplemented(f"{op.ident}: {res.message}")
    return res


# ---- instruction level --------------------------------------------------------


def operation_args(spec: OperationSpec, instr: DecodedInstr, st: RefState) -> dict[str, int]:
    """Parameter bindings for ``instr``: its fields plus the shifter outputs."""
    args = instr.as_dict()
    if spec.uses_shifter:
        value, carry = compute_shifter_operand(instr.shifter, st)
        args[SHIFTER_PARAMS[0]] = value
        args[SHIFTER_PARAMS[1]] = carry
    return args


@dataclass(frozen=True)
class StepResult:
    """Outcome of one fetch-decode-execute step.

    ``outcome`` is one of ok / unpredictable / undefined / not_implemented.
    On a fault ``state`` is the state before the step.
    """
    outcome: str
    state: RefState
    pc: int
    word: int | None = None
    instr: DecodedInstr | Undefined | None = None
    branched: bool = False
    message: str = ""


class ReferenceEngine:
    def __init__(self, specs: tuple[OperationSpec, ...] | None = None):
        self.specs = specs or catalog()
        self.decoder = default_decoder() if specs is None else Decoder(self.specs)
        self._ops = by_name(self.specs)

    def execute(self, instr: DecodedInstr, st: RefState) -> SemResult:
        """Run one decoded instruction on ``st`` without touching the PC."""
        why = static_unpredictable(instr)
        if why:
            return Unpredictable(why)
        spec = self._ops[instr.op]
        return run_operation(spec.resolved, operation_args(spec, instr, st), st)

    def step(self, st: RefState) -> StepResult:
        pc = st.pc
        try:
            word = mem_read(st, pc, 4)
        except UnpredictableError as err:
            return StepResult("unpredictable", st, pc, message=f"fetch: {err}")
        instr = self.decoder.decode(word)
        if isinstance(instr, Undefined):
            return StepResult("undefined", st, pc, word, instr, message=f"undefined {word:#010x}")
        res = self.execute(instr, st)
        if isinstance(res, Unpredictable):
            return StepResult("unpredictable", st, pc, word, instr, message=res.message)
        if isinstance(res, Unimplemented):
            return StepResult("not_implemented", st, pc, word, instr, message=res.message)
        new = res.st if not res.sem.bo else res.st.with_pc(pc + 4)
        return StepResult("ok", new, pc, word, instr, branched=not res.sem.bo)

    def run(self, st: RefState, max_steps: int):
        """Step until a fault, ``max_steps``, or a branch-to-self taken twice in a row.

        Returns ``(state, steps, outcome, last StepResult or None)``; outcome
        is ``"halt"`` for the branch-to-self convention and ``"ok"`` when
        the step budget ran out.
        """
        steps, last_self, last = 0, None, None
        while steps < max_steps:
            r = self.step(st)
            last = r
            if r.outcome != "ok":
                return st, steps, r.outcome, r
            steps += 1
            st = r.state
            if r.branched and st.pc == r.pc:
                if last_self == r.pc:
                    return st, steps, "halt", r
                last_self = r.pc
            else:
                last_self = None
        return st, steps, "ok", last
