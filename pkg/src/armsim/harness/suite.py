"""Running checks over many seeds, optionally across worker threads."""
from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from ..catalog import catalog
from .checks import Context, Verdict, check_commutes, check_frame
from .generators import SeedRng, case_seed, random_instr

CHECKS = {"commutes": check_commutes, "frame": check_frame}


@dataclass
class SuiteReport:
    cases: int = 0
    passed: int = 0
    per_op: dict[str, int] = field(default_factory=dict)
    failures: list[Verdict] = field(default_factory=list)
    elapsed: float = 0.0

    @property
    def ok(self) -> bool:
        return self.cases == self.passed

    def merge(self, other: "SuiteReport") -> None:
        self.cases += other.cases
        self.passed += other.passed
        for k, v in other.per_op.items():
            self.per_op[k] = self.per_op.get(k, 0) + v
        self.failures += other.failures


def _run_slice(jobs, check, invert, keep: int, stop_on_fail: bool) -> SuiteReport:
    ctx = Context(invert)
    rep = SuiteReport()
    for spec, i, seed in jobs:
        instr = random_instr(SeedRng(seed ^ 0xC0DE), spec, ctx.fast.decoder)
        v = check(instr, seed, ctx)
        rep.cases += 1
        rep.per_op[spec.mnemonic] = rep.per_op.get(spec.mnemonic, 0) + 1
        if v.ok:
            rep.passed += 1
        else:
            if len(rep.failures) < keep:
                rep.failures.append(v)
            if stop_on_fail:
                break
    return rep


def run_suite(cases: int = 10_000, seed: int = 0, ops: list[str] | None = None,
              check: str = "commutes", workers: int = 1, invert: tuple[str, str] | None = None,
              keep: int = 10, stop_on_fail: bool = False) -> SuiteReport:
    """``cases`` random cases per operation; seeds are split across ``workers`` threads."""
    specs = [s for s in catalog() if ops is None or s.mnemonic in ops]
    jobs = [(s, i, case_seed(seed, s.opcode, i)) for s in specs for i in range(cases)]
    fn = CHECKS[check]
    t0 = time.perf_counter()
    if workers <= 1:
        rep = _run_slice(jobs, fn, invert, keep, stop_on_fail)
    else:
        rep = SuiteReport()
        with ThreadPoolExecutor(workers) as pool:
            parts = [pool.submit(_run_slice, jobs[w::workers], fn, invert, keep, stop_on_fail)
                     for w in range(workers)]
            for p in parts:
                rep.merge(p.result())
    rep.elapsed = time.perf_counter() - t0
    return rep
