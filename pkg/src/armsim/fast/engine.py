"""The compiled engine: generated op module, processor state, run loop."""
from __future__ import annotations

import hashlib
import importlib.util
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from types import MappingProxyType

import numpy as np

from ..catalog import RRX, Immediate, OperationSpec, Register, ShiftImm, ShiftReg, catalog
from ..catalog.spec import CatalogError
from ..decoder import DecodedInstr, Decoder, Undefined, default_decoder, static_unpredictable
from ..pseudocode import write_targets
from ..pseudocode.ast import BitRange, Const, Exp, Reg, Var, stm_exps, walk_exp, walk_stm
from ..state import (
    BANKING, NUM_PHYS_REGS, SPSR_MODES, Cpsr, MalformedState, ProcessorMode, RefState,
)
from . import lower, runtime as rt

ICACHE_BITS = 14
SHIFTER_COLS = 4          # columns 4..7 of an icache row hold the shifter encoding
ROW_WIDTH = 8
OP_STATIC_UNPREDICTABLE = -1

# Bump when the generated code's shape changes so stale caches are not reused.
_CODEGEN_VERSION = "1"


def cache_dir() -> Path:
    d = os.environ.get("ARMSIM_CACHE_DIR")
    return Path(d) if d else Path.home() / ".cache" / "armsim"


def encode_shifter(sh) -> tuple[int, int, int, int]:
    match sh:
        case Immediate(rotate_imm=r, immed_8=i):
            return rt.SH_IMMEDIATE, r, i, 0
        case Register(m=m):
            return rt.SH_REGISTER, m, 0, 0
        case ShiftImm(m=m, shift=s, amount=a):
            return rt.SH_SHIFT_IMM, m, int(s), a
        case ShiftReg(m=m, shift=s, s=r):
            return rt.SH_SHIFT_REG, m, int(s), r
        case RRX(m=m):
            return rt.SH_RRX, m, 0, 0
    raise TypeError(sh)


@dataclass(frozen=True)
class OpLayout:
    """How one operation's decoded fields sit in an icache row."""
    index: int
    spec: OperationSpec
    columns: tuple[tuple[str, int], ...]     # operand field -> column

    def call_args(self, fmt: str) -> list[str]:
        col = dict(self.columns)
        out = []
        for p in self.spec.resolved.params:
            if p.name == "shifter_operand":
                out.append("so")
            elif p.name == "shifter_carry_out":
                out.append("sco")
            else:
                out.append(fmt.format(col[p.name]))
        return out


def _layouts(specs) -> list[OpLayout]:
    out = []
    for i, spec in enumerate(specs):
        fields = spec.operand_fields
        limit = SHIFTER_COLS if spec.uses_shifter else ROW_WIDTH
        if len(fields) > limit:
            raise CatalogError(f"{spec.mnemonic}: too many operand fields for the fast engine")
        out.append(OpLayout(i, spec, tuple((f, k) for k, f in enumerate(fields))))
    return out


def _dispatch(layouts, pad: str, col: str) -> list[str]:
    """An if-chain on ``op`` calling the matching op function; ``col`` formats row reads."""
    state = ", ".join(lower.STATE_ARGS)
    out = []
    for lay in layouts:
        kw = "if" if lay.index == 0 else "elif"
        out.append(f"{pad}{kw} op == {lay.index}:")
        if lay.spec.uses_shifter:
            sh = ", ".join(col.format(k) for k in range(SHIFTER_COLS, ROW_WIDTH))
            out.append(f"{pad}    so, sco = rt.shifter(regs, flags, {sh})")
        call = ", ".join([state] + lay.call_args(col))
        out.append(f"{pad}    op_{lay.index}_{lay.spec.mnemonic}({call})")
    out.append(f"{pad}else:")
    out.append(f"{pad}    raise Fault({rt.K_UNPREDICTABLE}, {rt.E_STMT})")
    return out


def probe_expressions(spec: OperationSpec) -> list[Exp]:
    """Expressions of an operation body that only read parameters and state."""
    params = {p.name for p in spec.resolved.params}
    seen, out = set(), []
    for s in walk_stm(spec.resolved.body):
        for e in stm_exps(s):
            if isinstance(e, Const) or e in seen:
                continue
            if any(isinstance(x, Var) and x.name not in params for x in walk_exp(e)):
                continue
            seen.add(e)
            out.append(e)
    return out


def _probe_function(lay: "OpLayout") -> str:
    op = lay.spec.resolved
    name = f"exprs_{lay.index}_{lay.spec.mnemonic}"
    sig = ", ".join(lower.STATE_ARGS + tuple(f"v_{p.name}" for p in op.params) + ("k",))
    lines = [f"def {name}({sig}):"]
    for line in lower.entry_captures(op):
        lines.append(f"    {line}")
    lw = lower.Lowerer(op)
    for k, e in enumerate(probe_expressions(lay.spec)):
        lines.append(f"    {'if' if k == 0 else 'elif'} k == {k}:")
        lines.append(f"        return np.int64({lw.exp(e)}) & M")
    lines.append("    return np.int64(-1)")
    return "\n".join(lines) + "\n"


def generate_source(specs, invert: tuple[str, str] | None = None) -> str:
    """Python source of the op functions and the dispatch loop for ``specs``."""
    layouts = _layouts(specs)
    state = ", ".join(lower.STATE_ARGS)
    parts = [
        "# Generated by armsim.fast.engine; do not edit.",
        "import numpy as np",
        "from numba import njit",
        "from armsim.fast import runtime as rt",
        "from armsim.fast.runtime import Fault",
        f"M = {rt.M}",
        "",
    ]
    for lay in layouts:
        flag = invert[1] if invert and invert[0] == lay.spec.mnemonic else None
        lowered = lower.lower_operation(lay.spec.resolved, f"op_{lay.index}_{lay.spec.mnemonic}",
                                        invert_flag=flag)
        parts += ["", "@njit(cache=True)", lowered.source]
        parts += ["", "@njit(cache=True)", _probe_function(lay)]
    loop_dispatch = "\n".join(_dispatch(layouts, " " * 8, "args[idx, {}]"))
    one_dispatch = "\n".join(_dispatch(layouts, " " * 4, "row[{}]"))
    parts += ["", "@njit(cache=True)", f"""\
def run_loop({state}, ops, args, mb, max_steps, basic_blocks):
    mask = tags.shape[0] - 1
    last_self = ctrl[{rt.C_SELF}]
    while ctrl[{rt.C_STEPS}] < max_steps:
        pc = (regs[15] - 8) & M
        idx = (pc >> 2) & mask
        if tags[idx] != pc:
            ctrl[{rt.C_SELF}] = last_self
            return 1
        ctrl[{rt.C_PC}] = pc
        op = ops[idx]
{loop_dispatch}
        ctrl[{rt.C_STEPS}] += 1
        if mb[idx] != 0 or not basic_blocks:
            if ctrl[{rt.C_BRANCH}] != 0:
                ctrl[{rt.C_BRANCH}] = 0
                if ((regs[15] - 8) & M) == pc:
                    if last_self == pc:
                        ctrl[{rt.C_SELF}] = last_self
                        return 2
                    last_self = pc
                else:
                    last_self = -1
            else:
                regs[15] = (regs[15] + 4) & M
                last_self = -1
        else:
            regs[15] = (regs[15] + 4) & M
            last_self = -1
    ctrl[{rt.C_SELF}] = last_self
    return 0


@njit(cache=True)
def exec_one({state}, op, row):
    ctrl[{rt.C_BRANCH}] = 0
    ctrl[{rt.C_PC}] = (regs[15] - 8) & M
{one_dispatch}
    taken = ctrl[{rt.C_BRANCH}]
    ctrl[{rt.C_BRANCH}] = 0
    if taken == 0:
        regs[15] = (regs[15] + 4) & M
    return taken
"""]
    return "\n".join(parts)


def _branch_fields(spec: OperationSpec) -> tuple[str, ...] | None:
    """Fields whose value 15 makes ``spec`` write the PC; ``None`` if it always may."""
    fields = []
    for t in write_targets(spec.resolved):
        if isinstance(t, BitRange):
            t = t.exp
        if not isinstance(t, Reg):
            continue
        if isinstance(t.index, Var) and t.index.name in spec.operand_fields:
            fields.append(t.index.name)
        elif not (isinstance(t.index, Const) and t.index.value != 15):
            return None
    return tuple(dict.fromkeys(fields))


class FastEngine:
    """A catalog compiled to machine code.  Build once, share between processors."""

    _instances: dict = {}

    def __init__(self, specs=None, invert: tuple[str, str] | None = None):
        self.specs = tuple(specs or catalog())
        self.decoder = default_decoder() if specs is None else Decoder(self.specs)
        self.index = {s.mnemonic: i for i, s in enumerate(self.specs)}
        self.layouts = _layouts(self.specs)
        self.invert = invert
        self.source = generate_source(self.specs, invert)
        runtime_src = Path(rt.__file__).read_bytes()
        digest = hashlib.sha256(self.source.encode() + runtime_src
                                + _CODEGEN_VERSION.encode()).hexdigest()[:16]
        self.module_name = f"armsim_gen_{digest}"
        self.module = self._load(digest)
        self.run_loop = self.module.run_loop
        self.warm = False
        self._decoded: dict[int, tuple] = {}
        self._branch_fields = {s.mnemonic: _branch_fields(s) for s in self.specs}

    @classmethod
    def get(cls, specs=None, invert: tuple[str, str] | None = None) -> "FastEngine":
        key = (tuple(specs) if specs else None, invert)
        if key not in cls._instances:
            cls._instances[key] = cls(specs, invert)
        return cls._instances[key]

    def _load(self, digest: str):
        if self.module_name in sys.modules:
            return sys.modules[self.module_name]
        d = cache_dir()
        d.mkdir(parents=True, exist_ok=True)
        path = d / f"{self.module_name}.py"
        if not path.exists() or path.read_text() != self.source:
            tmp = path.with_suffix(f".{os.getpid()}.tmp")
            tmp.write_text(self.source)
            os.replace(tmp, path)
        spec = importlib.util.spec_from_file_location(self.module_name, path)
        mod = importlib.util.module_from_spec(spec)
        sys.modules[self.module_name] = mod
        spec.loader.exec_module(mod)
        return mod

    def op_function(self, mnemonic: str):
        i = self.index[mnemonic]
        return getattr(self.module, f"op_{i}_{mnemonic}")

    def decode_entry(self, word: int):
        """(op index, row, may_branch, instr) for a word, memoised; None if undefined."""
        hit = self._decoded.get(word)
        if hit is not None:
            return hit
        instr = self.decoder.decode(word)
        if isinstance(instr, Undefined):
            entry = (None, None, 0, instr)
        else:
            op, row, mb = self.lower_instr(instr)
            entry = (op, row, mb, instr)
        if len(self._decoded) < 1 << 16:
            self._decoded[word] = entry
        return entry

    def lower_instr(self, instr: DecodedInstr) -> tuple[int, np.ndarray, int]:
        """(op index, icache row, may_branch) for a decoded instruction."""
        row = np.zeros(ROW_WIDTH, dtype=np.int64)
        lay = self.layouts[self.index[instr.op]]
        for name, col in lay.columns:
            row[col] = instr.field(name)
        if instr.shifter is not None:
            row[SHIFTER_COLS:] = encode_shifter(instr.shifter)
        op = lay.index
        if static_unpredictable(instr):
            op = OP_STATIC_UNPREDICTABLE
        fields = self._branch_fields[instr.op]
        mb = fields is None or any(instr.field(f) == 15 for f in fields)
        return op, row, int(mb)

    def probes(self, mnemonic: str) -> list[Exp]:
        return probe_expressions(self.specs[self.index[mnemonic]])


@dataclass(frozen=True)
class RunReport:
    steps: int
    outcome: str            # ok | halt | unpredictable | undefined | not_implemented
    wall_time: float
    message: str = ""
    fault_pc: int | None = None

    @property
    def mips(self) -> float:
        return self.steps / self.wall_time / 1e6 if self.wall_time > 0 else float("inf")


_MODE_BY_BITS = {m.value: m for m in ProcessorMode}
_ROWS = {m.value: BANKING[m][:15] for m in ProcessorMode}


class FastProcessor:
    """Mutable processor state for the compiled engine.

    ``regs[15]`` is the PC as instructions read it (fetch address + 8).
    The :attr:`pc` accessor aliases it and is read-only; writes go
    through :meth:`set_reg_or_pc`.
    """

    def __init__(self, engine: FastEngine | None = None, icache_bits: int = ICACHE_BITS,
                 page_slots: int = 64):
        self.engine = engine or FastEngine.get()
        self.regs = np.zeros(16, dtype=np.int64)
        self.flags = np.zeros(4, dtype=np.uint8)
        self.ctrl = np.zeros(16, dtype=np.int64)
        self.phys = np.zeros(NUM_PHYS_REGS, dtype=np.int64)
        self.spsr = np.full(len(SPSR_MODES), ProcessorMode.usr.value, dtype=np.int64)
        self.pagetab = np.zeros(rt.NUM_PAGES, dtype=np.int32)
        self.pages = np.zeros((page_slots, rt.PAGE_SIZE), dtype=np.uint8)
        self.slot_page = np.zeros(page_slots, dtype=np.int64)
        n = 1 << icache_bits
        self.tags = np.full(n, -1, dtype=np.int64)
        self.ops = np.zeros(n, dtype=np.int64)
        self.args = np.zeros((n, ROW_WIDTH), dtype=np.int64)
        self.mb = np.zeros(n, dtype=np.uint8)
        self._filled: list[int] = []
        # Memory changes made from Python bump the epoch; compiled code bumps C_MEMGEN.
        self._epoch = 0
        self._mem_view = (None, MappingProxyType({}))
        self.ctrl[rt.C_MODE] = ProcessorMode.svc.value
        self.ctrl[rt.C_SELF] = -1
        self.regs[15] = 8

    # ---- state access ---------------------------------------------------------------

    @property
    def state_arrays(self):
        return (self.regs, self.flags, self.ctrl, self.phys, self.spsr, self.pagetab,
                self.pages, self.slot_page, self.tags)

    @property
    def pc(self) -> int:
        """Register 15 as instructions read it (the fetch address plus 8)."""
        return int(self.regs[15])

    @property
    def fetch_address(self) -> int:
        return (int(self.regs[15]) - 8) & rt.M

    @property
    def mode(self) -> ProcessorMode:
        return _MODE_BY_BITS[int(self.ctrl[rt.C_MODE])]

    def reg(self, n: int) -> int:
        return int(rt.get_reg(self.regs, n))

    def set_reg_or_pc(self, d: int, v: int) -> None:
        rt.set_reg_or_pc(self.regs, self.ctrl, d, v & rt.M)

    @property
    def branch_taken(self) -> bool:
        return bool(self.ctrl[rt.C_BRANCH])

    def set_fetch_address(self, addr: int) -> None:
        self.regs[15] = (addr + 8) & rt.M

    # ---- memory -----------------------------------------------------------------------

    def _grow(self, need: int) -> None:
        cap = self.pages.shape[0]
        new_cap = max(cap * 2, cap + need)
        pages = np.zeros((new_cap, rt.PAGE_SIZE), dtype=np.uint8)
        pages[:cap] = self.pages
        slot_page = np.zeros(new_cap, dtype=np.int64)
        slot_page[:cap] = self.slot_page
        self.pages, self.slot_page = pages, slot_page

    def _slot(self, page: int, create: bool) -> int:
        s = int(self.pagetab[page])
        if s or not create:
            return s - 1
        used = int(self.ctrl[rt.C_USED])
        if used >= self.pages.shape[0]:
            self._grow(1)
        self.pagetab[page] = used + 1
        self.slot_page[used] = page
        self.ctrl[rt.C_USED] = used + 1
        return used

    def write_bytes(self, addr: int, data: bytes) -> None:
        self._epoch += 1
        pos = 0
        while pos < len(data):
            a = (addr + pos) & rt.M
            page, off = a >> rt.PAGE_BITS, a & (rt.PAGE_SIZE - 1)
            n = min(len(data) - pos, rt.PAGE_SIZE - off)
            chunk = np.frombuffer(data[pos:pos + n], dtype=np.uint8)
            slot = self._slot(page, create=bool(chunk.any()))
            if slot >= 0:
                self.pages[slot, off:off + n] = chunk
            pos += n
        self._invalidate(addr, len(data))

    def read_bytes(self, addr: int, n: int) -> bytes:
        out = bytearray(n)
        for i in range(n):
            a = (addr + i) & rt.M
            slot = self._slot(a >> rt.PAGE_BITS, create=False)
            if slot >= 0:
                out[i] = self.pages[slot, a & (rt.PAGE_SIZE - 1)]
        return bytes(out)

    def read_word(self, addr: int) -> int:
        return int(rt.mem_read(self.pagetab, self.pages, addr & rt.M, 4))

    def _invalidate(self, addr: int, n: int) -> None:
        if n <= 0:
            return
        mask = self.tags.shape[0] - 1
        first, last = addr & ~3, (addr + n - 1) & ~3
        if (last - first) // 4 >= self.tags.shape[0]:
            self.tags[:] = -1
            return
        for w in range(first, last + 4, 4):
            w &= rt.M
            if self.tags[(w >> 2) & mask] == w:
                self.tags[(w >> 2) & mask] = -1

    # ---- conversion to and from the reference state ----------------------------------

    def project(self) -> RefState:
        """The architectural state this processor represents."""
        ctrl = self.ctrl.tolist()
        mode_bits = ctrl[rt.C_MODE]
        phys = self.phys.tolist()
        regs = self.regs.tolist()
        for i, k in enumerate(_ROWS[mode_bits]):
            phys[k] = regs[i]
        phys[15] = (regs[15] - 8) & rt.M
        n, z, c, v = self.flags.tolist()
        cpsr = Cpsr(n, z, c, v, _MODE_BY_BITS[mode_bits], ctrl[rt.C_OTHER])
        spsr = dict(zip(SPSR_MODES, map(Cpsr.unpack, self.spsr.tolist())))
        gen = (self._epoch, ctrl[rt.C_MEMGEN])
        if self._mem_view[0] != gen:
            mem = {}
            used = ctrl[rt.C_USED]
            if used:
                addrs, vals = rt.nonzero_bytes(self.pages, self.slot_page, used)
                mem = dict(zip(addrs.tolist(), vals.tolist()))
            self._mem_view = (gen, MappingProxyType(mem))
        return RefState(cpsr, MappingProxyType(spsr), tuple(phys), self._mem_view[1])

    def reset(self) -> None:
        """Back to the power-on state, keeping allocated buffers."""
        self._epoch += 1
        used = int(self.ctrl[rt.C_USED])
        if used:
            self.pagetab[self.slot_page[:used]] = 0
            self.pages[:used] = 0
        if self._filled:
            self.tags[self._filled] = -1
            self._filled.clear()
        self.regs[:] = 0
        self.regs[15] = 8
        self.flags[:] = 0
        self.phys[:] = 0
        self.spsr[:] = ProcessorMode.usr.value
        self.ctrl[:] = 0
        self.ctrl[rt.C_MODE] = ProcessorMode.svc.value
        self.ctrl[rt.C_SELF] = -1

    def load_ref(self, st: RefState) -> None:
        """Overwrite the whole processor with ``st`` (caches are reset)."""
        self.reset()
        mode = st.cpsr.mode
        self.ctrl[rt.C_MODE] = mode.value
        self.ctrl[rt.C_OTHER] = st.cpsr.other
        self.flags[:] = (st.cpsr.n, st.cpsr.z, st.cpsr.c, st.cpsr.v)
        self.phys[:] = st.regs
        self.regs[:] = self.phys[rt.ROW[rt.MODE_IDX[mode.value]]]
        self.regs[15] = (st.regs[15] + 8) & rt.M
        for i, m in enumerate(SPSR_MODES):
            self.spsr[i] = st.spsr[m].pack()
        by_page: dict[int, list[int]] = {}
        for a in st.mem:
            by_page.setdefault(a >> rt.PAGE_BITS, []).append(a)
        for page, addrs in by_page.items():
            slot = self._slot(page, create=True)
            offs = np.array(addrs, dtype=np.int64) & (rt.PAGE_SIZE - 1)
            self.pages[slot, offs] = [st.mem[a] for a in addrs]
        self._epoch += 1

    @classmethod
    def from_ref(cls, st: RefState, engine: FastEngine | None = None, **kw) -> "FastProcessor":
        p = cls(engine, **kw)
        p.load_ref(st)
        return p

    # ---- execution ---------------------------------------------------------------------

    def _fill(self, pc: int) -> tuple[str, str] | None:
        """Decode the word at ``pc`` into the icache; returns a fault if it cannot."""
        if pc & 3:
            return "unpredictable", f"fetch: misaligned instruction address {pc:#010x}"
        word = self.read_word(pc)
        op, row, mb, instr = self.engine.decode_entry(word)
        if op is None:
            return "undefined", f"undefined instruction {word:#010x} at {pc:#010x}"
        if op == OP_STATIC_UNPREDICTABLE:
            return "unpredictable", static_unpredictable(instr)
        idx = (pc >> 2) & (self.tags.shape[0] - 1)
        self.tags[idx] = pc
        self.ops[idx] = op
        self.args[idx] = row
        self.mb[idx] = mb
        self._filled.append(idx)
        return None

    def run(self, max_steps: int, basic_blocks: bool = True) -> RunReport:
        """Execute up to ``max_steps`` instructions.

        Stops early on a fault or when a branch-to-self is taken twice in a
        row (``halt``).  On a fault the state is left as the faulting
        instruction left it.
        """
        if max_steps < 0:
            raise ValueError("max_steps must be >= 0")
        ctrl = self.ctrl
        ctrl[rt.C_STEPS] = 0
        ctrl[rt.C_BRANCH] = 0
        if not self.engine.warm:
            # First call loads the compiled loop from the cache; keep that out of the timing.
            self.engine.run_loop(*self.state_arrays, self.ops, self.args, self.mb, 0, basic_blocks)
            self.engine.warm = True
        t0 = time.perf_counter()
        outcome, message, fault_pc = "ok", "", None
        while True:
            try:
                code = self.engine.run_loop(*self.state_arrays, self.ops, self.args, self.mb,
                                            max_steps, basic_blocks)
            except rt.Fault as f:
                kind, detail = int(f.args[0]), int(f.args[1])
                if kind == rt.K_NEED_PAGES:
                    self._grow(int(ctrl[rt.C_PAGEPEND]) + 16)
                    ctrl[rt.C_BRANCH] = 0
                    continue
                fault_pc = int(ctrl[rt.C_PC])
                instr = self.engine.decode_entry(self.read_word(fault_pc))[3]
                outcome = "unpredictable" if kind == rt.K_UNPREDICTABLE else "not_implemented"
                message = f"{getattr(instr, 'op', '?')}: {rt.FAULT_TEXT.get(detail, detail)}"
                break
            if code == 1:
                pc = self.fetch_address
                fault = self._fill(pc)
                if fault:
                    outcome, message = fault
                    fault_pc = pc
                    break
                continue
            outcome = "halt" if code == 2 else "ok"
            break
        ctrl[rt.C_BRANCH] = 0
        return RunReport(int(ctrl[rt.C_STEPS]), outcome, time.perf_counter() - t0, message,
                         fault_pc)

    def step(self) -> RunReport:
        return self.run(1)

    def execute(self, instr: DecodedInstr) -> tuple[str, str]:
        """Execute ``instr`` as if fetched at the current address, skipping the fetch.

        Returns ``(outcome, message)``; the PC advances unless the
        instruction wrote it.
        """
        op, row, _ = self.engine.lower_instr(instr)
        if op == OP_STATIC_UNPREDICTABLE:
            return "unpredictable", static_unpredictable(instr)
        while True:
            try:
                self.engine.module.exec_one(*self.state_arrays, op, row)
                return "ok", ""
            except rt.Fault as f:
                kind, detail = int(f.args[0]), int(f.args[1])
                if kind == rt.K_NEED_PAGES:
                    self._grow(int(self.ctrl[rt.C_PAGEPEND]) + 16)
                    continue
                self.ctrl[rt.C_BRANCH] = 0
                outcome = "unpredictable" if kind == rt.K_UNPREDICTABLE else "not_implemented"
                return outcome, f"{instr.op}: {rt.FAULT_TEXT.get(detail, detail)}"

    def probe(self, mnemonic: str, k: int, args: dict[str, int]) -> int | tuple[str, str]:
        """Evaluate expression ``k`` of ``mnemonic``'s body on the current state.

        Returns the value, or ``(outcome, message)`` if evaluation faults.
        """
        i = self.engine.index[mnemonic]
        fn = getattr(self.engine.module, f"exprs_{i}_{mnemonic}")
        params = [args[p.name] for p in self.engine.specs[i].resolved.params]
        try:
            return int(fn(*self.state_arrays, *params, k))
        except rt.Fault as f:
            kind, detail = int(f.args[0]), int(f.args[1])
            outcome = "unpredictable" if kind == rt.K_UNPREDICTABLE else "not_implemented"
            return outcome, rt.FAULT_TEXT.get(detail, str(detail))


def project(proc: FastProcessor) -> RefState:
    return proc.project()


def flags_valid(proc: FastProcessor) -> bool:
    return bool(np.all(proc.flags <= 1))


def check_state(proc: FastProcessor) -> None:
    """Raise ``MalformedState`` if the arrays violate the engine invariants."""
    if not flags_valid(proc):
        raise MalformedState("flag byte outside {0, 1}")
    if rt.MODE_IDX[int(proc.ctrl[rt.C_MODE]) & 31] < 0:
        raise MalformedState("invalid mode bits")
