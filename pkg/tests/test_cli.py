from __future__ import annotations

import io
import json
import struct
import subprocess
import sys

import pytest

from armsim import programs
from armsim.asm import AsmError, assemble, encode_immediate
from armsim.cli import main
from armsim.decoder import decode, disassemble

FIB = str(programs.path("fib", "bin"))

GOLDEN_FIB = """\
outcome: halt
steps: 55
r0  00000037  r1  00000059  r2  00000000  r3  00000059
r4  00000000  r5  00000000  r6  00000000  r7  00000000
r8  00000000  r9  00000000  r10 00000000  r11 00000000
r12 00000000  sp  00000000  lr  00000000  pc  00000020
cpsr 60000013  N=0 Z=1 C=1 V=0  mode=svc
"""


def run(*args):
    out = io.StringIO()
    code = main(list(args), out=out)
    return code, out.getvalue()


def _bin(tmp_path, src: str):
    p = tmp_path / "prog.bin"
    p.write_bytes(assemble(src))
    return str(p)


# ---- assembler ------------------------------------------------------------------------

def test_assembler_basics():
    words = struct.unpack("<3I", assemble("mov r1, #10\nloop: subs r1, r1, #1\nbne loop"))
    assert words == (0xE3A0100A, 0xE2511001, 0x1AFFFFFD)


@pytest.mark.parametrize("text", [
    "bls 0x0", "ble 0x0", "bl 0x0", "blt 0x0", "blls 0x0", "cmp r1, #0x4",
    "cmp r1, r2, lsl r3", "movs r0, r1, rrx", "add r0, r1, r2, asr #32", "mov sp, lr",
])
def test_assembler_mnemonic_forms(text):
    w = struct.unpack("<I", assemble(text))[0]
    assert disassemble(decode(w), 0) == text.replace("sp", "r13").replace("lr", "r14")


@pytest.mark.parametrize("src,line", [
    ("mov r0, #0x101", 1),
    ("\nfoo r0, r1", 2),
    ("b nowhere", 1),
    ("add r0, r1", 1),
    ("mov r16, #1", 1),
    ("mov r0, r1, lsr #0", 1),
    ("x: mov r0, #1\nx: mov r0, #1", 2),
])
def test_assembler_errors(src, line):
    with pytest.raises(AsmError) as ei:
        assemble(src)
    assert ei.value.line == line


def test_encode_immediate():
    assert encode_immediate(0xFF000000) is not None
    assert encode_immediate(0x101) is None


# ---- run mode -------------------------------------------------------------------------

@pytest.mark.parametrize("engine", ["ref", "both"])
def test_golden_register_dump(engine):
    code, out = run("--engine", engine, FIB)
    assert code == 0
    assert out == GOLDEN_FIB


def test_fast_engine_reports_mips():
    code, out = run("--engine", "fast", FIB)
    assert code == 0
    assert out.startswith(GOLDEN_FIB)
    assert out.splitlines()[-1].startswith("mips: ")


@pytest.mark.parametrize("engine", ["ref", "fast", "both"])
def test_trace_lines(engine):
    code, out = run("--engine", engine, "--trace", "--steps", "3", FIB)
    lines = out.splitlines()
    assert code == 0
    assert lines[0].startswith("00000000  e3a00000  mov r0, #0x0")
    assert "r1=0x1" in lines[1] and "r2=0xa" in lines[2]


def test_json_stream(tmp_path):
    code, out = run("--engine", "both", "--json", FIB)
    objs = [json.loads(x) for x in out.splitlines()]
    assert [o["step"] for o in objs[:-1]] == list(range(1, 56))
    assert objs[-1]["outcome"] == "halt" and objs[-1]["regs"][:2] == [55, 89]


def test_step_budget_is_clean_exit():
    code, out = run("--steps", "4", FIB)
    assert code == 0 and "outcome: ok" in out and "steps: 4" in out


@pytest.mark.parametrize("engine", ["ref", "fast", "both"])
@pytest.mark.parametrize("src,code", [
    ("mov r0, r1, lsl r15", 2),
    (".word 0xe7f000f0", 3),
    ("mov pc, #2", 2),
])
def test_fault_exit_codes(tmp_path, engine, src, code):
    got, out = run("--engine", engine, _bin(tmp_path, src))
    assert got == code
    assert "message:" in out


def test_base_and_entry(tmp_path):
    p = _bin(tmp_path, "mov r0, #1\nmov r0, #2\nb .")
    code, out = run("--base", "1000", "--entry", "1004", p)
    assert code == 0 and "r0  00000002" in out


def test_empty_image_is_undefined(tmp_path):
    p = tmp_path / "empty.bin"
    p.write_bytes(b"")
    assert run(str(p))[0] == 3


@pytest.mark.parametrize("args", [
    ["--base", "2", FIB],
    ["--entry", "3", FIB],
    ["/nonexistent/x.bin"],
    ["--steps", "-1", FIB],
    [],
    ["--bogus"],
    ["--engine", "turbo", FIB],
    ["--base", "zz", FIB],
    ["--replay", "/nonexistent"],
])
def test_usage_errors(args):
    with pytest.raises(SystemExit) as ei:
        code = main(args, out=io.StringIO())
        raise SystemExit(code)
    assert ei.value.code == 64


# ---- diff and replay ------------------------------------------------------------------

def test_diff_clean():
    code, out = run("diff", "--cases", "20", "--seed", "3")
    assert code == 0 and "failed: 0" in out


def test_diff_with_injected_fault_writes_reproducer(tmp_path):
    repro = tmp_path / "case.repro"
    code, out = run("diff", "--cases", "300", "--ops", "adc", "--inject-carry-fault",
                    "--repro", str(repro))
    assert code == 5
    assert "C_flag" in out
    text = repro.read_text()
    assert text.startswith("armsim-repro 1")
    # The reproducer passes on the real engine.
    code, out = run("--replay", str(repro))
    assert code == 0 and out.strip() == "pass"


def test_console_script_entry():
    r = subprocess.run([sys.executable, "-m", "armsim.cli", "--engine", "ref", FIB],
                       capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout == GOLDEN_FIB
