"""Command-line front end.

    armsim [options] PROGRAM.bin        run a flat little-endian image
    armsim --replay CASE.repro          re-check a harness reproducer
    armsim diff [--seed N] [--cases N]  differential suite between the engines

A program halts cleanly when it executes a branch-to-self (``b .``) twice in
a row, or when the step budget runs out.

exit codes: 0 halt or step budget, 2 unpredictable, 3 undefined,
4 not implemented, 5 engine mismatch, 64 usage error
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from .bits import MASK32
from .catalog import load_catalog
from .decoder import disassemble
from .state import BANKING, RefState, load_bytes

EXIT_OK = 0
EXIT_UNPREDICTABLE = 2
EXIT_UNDEFINED = 3
EXIT_NOT_IMPLEMENTED = 4
EXIT_MISMATCH = 5
EXIT_USAGE = 64

OUTCOME_EXIT = {"ok": EXIT_OK, "halt": EXIT_OK, "unpredictable": EXIT_UNPREDICTABLE,
                "undefined": EXIT_UNDEFINED, "not_implemented": EXIT_NOT_IMPLEMENTED}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def _hex(text: str) -> int:
    try:
        return int(text, 16) & MASK32
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a hex number: {text!r}") from None


def load_image(path: str | Path, base: int = 0) -> bytes:
    """Raw bytes of ``path``; ``base`` must be word aligned."""
    if base % 4:
        raise UsageError(f"base address {base:#x} is not word aligned")
    try:
        return Path(path).read_bytes()
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror}") from None


def initial_state(image: bytes, base: int, entry: int) -> RefState:
    return load_bytes(RefState(), base, image).with_pc(entry)


# ---- output ---------------------------------------------------------------------------

_NAMES = [f"r{i}" for i in range(13)] + ["sp", "lr", "pc"]


def register_dump(st: RefState) -> str:
    """Stable text dump of the visible registers and the CPSR."""
    row = BANKING[st.mode]
    vals = [st.regs[row[i]] for i in range(15)] + [st.pc]
    lines = []
    for k in range(0, 16, 4):
        lines.append("  ".join(f"{_NAMES[i]:<3} {vals[i]:08x}" for i in range(k, k + 4)))
    c = st.cpsr
    lines.append(f"cpsr {c.pack():08x}  N={c.n} Z={c.z} C={c.c} V={c.v}  mode={c.mode.name}")
    return "\n".join(lines)


def _changes(before: RefState, after: RefState) -> dict[str, int | str]:
    from .harness.checks import state_diff
    return {c: b for c, _, b in state_diff(before, after)}


def _trace_line(pc: int, word: int | None, instr, changes: dict, as_json: bool, step: int) -> str:
    asm = disassemble(instr, pc) if instr is not None else "?"
    if as_json:
        return json.dumps({"step": step, "pc": pc, "word": word, "asm": asm, "changes": changes})
    ch = " ".join(f"{k}={v:#x}" if isinstance(v, int) else f"{k}={v}" for k, v in changes.items())
    w = f"{word:08x}" if word is not None else "--------"
    return f"{pc:08x}  {w}  {asm:<28} {ch}".rstrip()


# ---- engines -----------------------------------------------------------------------

class _Run:
    def __init__(self, outcome: str, st: RefState, steps: int, message: str = "",
                 wall: float = 0.0):
        self.outcome, self.state, self.steps, self.message, self.wall = (
            outcome, st, steps, message, wall)


def _run_ref(engine, st: RefState, max_steps: int, trace, as_json: bool) -> _Run:
    t0 = time.perf_counter()
    if trace is None:
        st, steps, outcome, last = engine.run(st, max_steps)
        msg = last.message if last is not None and outcome not in ("ok", "halt") else ""
        return _Run(outcome, st, steps, msg, time.perf_counter() - t0)
    steps, last_self = 0, None
    while steps < max_steps:
        r = engine.step(st)
        if r.outcome != "ok":
            return _Run(r.outcome, st, steps, r.message, time.perf_counter() - t0)
        steps += 1
        trace(_trace_line(r.pc, r.word, r.instr, _changes(st, r.state), as_json, steps))
        st = r.state
        if r.branched and st.pc == r.pc:
            if last_self == r.pc:
                return _Run("halt", st, steps, "", time.perf_counter() - t0)
            last_self = r.pc
        else:
            last_self = None
    return _Run("ok", st, steps, "", time.perf_counter() - t0)


def _run_fast(engine, st: RefState, max_steps: int, trace, as_json: bool,
              basic_blocks: bool = True) -> _Run:
    from .fast.engine import FastProcessor
    proc = FastProcessor.from_ref(st, engine)
    if trace is None:
        rep = proc.run(max_steps, basic_blocks=basic_blocks)
        return _Run(rep.outcome, proc.project(), rep.steps, rep.message, rep.wall_time)
    steps, t0 = 0, time.perf_counter()
    before = proc.project()
    while steps < max_steps:
        pc = proc.fetch_address
        rep = proc.run(1, basic_blocks=basic_blocks)
        if rep.outcome not in ("ok", "halt") or rep.steps == 0:
            return _Run(rep.outcome, proc.project(), steps, rep.message,
                        time.perf_counter() - t0)
        steps += 1
        after = proc.project()
        word = proc.read_word(pc)
        instr = engine.decoder.decode(word)
        trace(_trace_line(pc, word, instr, _changes(before, after), as_json, steps))
        before = after
        if rep.outcome == "halt":
            return _Run("halt", after, steps, "", time.perf_counter() - t0)
    return _Run("ok", proc.project(), steps, "", time.perf_counter() - t0)


def _run_both(ref, fast, st: RefState, max_steps: int, trace, as_json: bool) -> _Run:
    """Lockstep co-simulation; a divergence reports the differing components."""
    from .fast.engine import FastProcessor
    from .harness.checks import state_diff
    proc = FastProcessor.from_ref(st, fast)
    steps, last_self, t0 = 0, None, time.perf_counter()
    while steps < max_steps:
        r = ref.step(st)
        rep = proc.run(1)
        fast_out = rep.outcome if rep.steps == 0 else "ok"
        if r.outcome != fast_out:
            return _Run("mismatch", st, steps,
                        f"step {steps + 1} at {r.pc:#010x}: ref={r.outcome} fast={fast_out}",
                        time.perf_counter() - t0)
        if r.outcome != "ok":
            return _Run(r.outcome, st, steps, r.message, time.perf_counter() - t0)
        steps += 1
        diff = state_diff(r.state, proc.project())
        if diff:
            parts = ", ".join(f"{c}: ref={a} fast={b}" for c, a, b in diff)
            return _Run("mismatch", r.state, steps,
                        f"step {steps} at {r.pc:#010x} ({disassemble(r.instr, r.pc)}): {parts}",
                        time.perf_counter() - t0)
        if trace is not None:
            trace(_trace_line(r.pc, r.word, r.instr, _changes(st, r.state), as_json, steps))
        st = r.state
        if r.branched and st.pc == r.pc:
            if last_self == r.pc:
                return _Run("halt", st, steps, "", time.perf_counter() - t0)
            last_self = r.pc
        else:
            last_self = None
    return _Run("ok", st, steps, "", time.perf_counter() - t0)


# ---- commands ----------------------------------------------------------------------

def _engines(catalog_dir: str | None, want_ref: bool, want_fast: bool):
    from .reference import ReferenceEngine
    specs = None
    if catalog_dir is not None:
        try:
            specs = load_catalog(Path(catalog_dir))
        except Exception as e:
            raise UsageError(f"cannot load catalog {catalog_dir}: {e}") from None
    ref = ReferenceEngine(specs) if want_ref else None
    fast = None
    if want_fast:
        from .fast.engine import FastEngine
        fast = FastEngine.get(specs)
    return ref, fast


def _replay(path: str, out) -> int:
    from .harness import ReproducerError, describe, parse_reproducer, replay
    try:
        case = parse_reproducer(Path(path).read_text())
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror}") from None
    except ReproducerError as e:
        raise UsageError(f"{path}: {e}") from None
    v = replay(case)
    print(describe(v), file=out)
    return EXIT_OK if v.ok else EXIT_MISMATCH


def cmd_run(args, out) -> int:
    if args.replay:
        return _replay(args.replay, out)
    if args.program is None:
        raise UsageError("a program image (or --replay) is required")
    image = load_image(args.program, args.base)
    entry = args.base if args.entry is None else args.entry
    if entry % 4:
        raise UsageError(f"entry address {entry:#x} is not word aligned")
    if args.steps < 0:
        raise UsageError("--steps must be >= 0")
    st = initial_state(image, args.base, entry)
    trace = (lambda line: print(line, file=out)) if (args.trace or args.json) else None
    if not image:
        # Nothing was loaded, so there is no instruction at the entry point.
        run = _Run("undefined", st, 0, f"empty image: no instruction at {entry:#010x}")
    else:
        ref, fast = _engines(args.catalog, args.engine in ("ref", "both"),
                             args.engine in ("fast", "both"))
        if args.engine == "ref":
            run = _run_ref(ref, st, args.steps, trace, args.json)
        elif args.engine == "fast":
            run = _run_fast(fast, st, args.steps, trace, args.json,
                            basic_blocks=not args.no_basic_blocks)
        else:
            run = _run_both(ref, fast, st, args.steps, trace, args.json)
    code = EXIT_MISMATCH if run.outcome == "mismatch" else OUTCOME_EXIT[run.outcome]
    if args.json:
        summary = {"outcome": run.outcome, "steps": run.steps, "exit": code,
                   "message": run.message, "pc": run.state.pc,
                   "regs": [run.state.regs[BANKING[run.state.mode][i]] for i in range(15)],
                   "cpsr": run.state.cpsr.pack()}
        print(json.dumps(summary), file=out)
        return code
    print(f"outcome: {run.outcome}", file=out)
    print(f"steps: {run.steps}", file=out)
    if run.message:
        print(f"message: {run.message}", file=out)
    print(register_dump(run.state), file=out)
    if args.engine == "fast" and not args.trace and run.wall > 0:
        print(f"mips: {run.steps / run.wall / 1e6:.3f}", file=out)
    return code


def cmd_diff(args, out) -> int:
    from .harness import FailingCase, describe, dump_reproducer, random_state, run_suite, shrink
    from .harness.checks import Context
    invert = ("ADC", "C") if args.inject_carry_fault else None
    ops = [o.strip().upper() for o in args.ops.split(",")] if args.ops else None
    rep = run_suite(cases=args.cases, seed=args.seed, ops=ops, check=args.check,
                    workers=args.workers, invert=invert)
    print(f"cases: {rep.cases}  passed: {rep.passed}  failed: {rep.cases - rep.passed}  "
          f"time: {rep.elapsed:.1f}s", file=out)
    for op, n in sorted(rep.per_op.items()):
        print(f"  {op:<4} {n}", file=out)
    if rep.ok:
        return EXIT_OK
    for v in rep.failures[:5]:
        print(describe(v), file=out)
    first = rep.failures[0]
    if args.repro and first.instr is not None and first.seed is not None:
        ctx = Context(invert)
        st, _ = random_state(first.seed, ctx.proc)
        case = shrink(FailingCase(first.instr, st), ctx)
        Path(args.repro).write_text(dump_reproducer(case, first))
        print(f"reproducer written to {args.repro}", file=out)
    return EXIT_MISMATCH


def _run_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="armsim", description=__doc__,
                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("program", nargs="?", help="flat binary image")
    p.add_argument("--engine", choices=("ref", "fast", "both"), default="fast")
    p.add_argument("--steps", type=int, default=1_000_000, help="step budget (default 10^6)")
    p.add_argument("--base", type=_hex, default=0, help="load address, hex (default 0)")
    p.add_argument("--entry", type=_hex, default=None, help="first fetch address, hex")
    p.add_argument("--trace", action="store_true", help="one line per executed instruction")
    p.add_argument("--json", action="store_true", help="JSON object per step plus a summary")
    p.add_argument("--catalog", metavar="DIR", help="alternative operation catalog")
    p.add_argument("--replay", metavar="FILE", help="re-check a harness reproducer")
    p.add_argument("--no-basic-blocks", action="store_true",
                   help="check for branches after every instruction")
    return p


def _diff_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="armsim diff", description="differential suite between the two engines")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cases", type=int, default=10_000, help="cases per operation")
    p.add_argument("--ops", help="comma-separated operation names (default: all)")
    p.add_argument("--check", choices=("commutes", "frame"), default="commutes")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--repro", metavar="FILE", help="write a shrunk reproducer on failure")
    p.add_argument("--inject-carry-fault", action="store_true",
                   help="self-test: compile ADC with its carry result inverted")
    return p


def main(argv: list[str] | None = None, out=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    out = out or sys.stdout
    try:
        if argv and argv[0] == "diff":
            return cmd_diff(_diff_parser().parse_args(argv[1:]), out)
        return cmd_run(_run_parser().parse_args(argv), out)
    except UsageError as e:
        print(f"armsim: error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
