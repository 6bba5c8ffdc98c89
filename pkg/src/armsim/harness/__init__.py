"""Differential testing of the fast engine against the reference interpreter."""
from .checks import (
    PASS, Context, Mismatch, OutcomeDisagree, Pass, Verdict, check_commutes,
    check_condition_purity_and_agreement, check_expression_purity, check_frame, check_state,
    default_context, describe, footprint, state_diff,
)
from .generators import CORNERS, case_seed, random_instr, random_state
from .shrink import FailingCase, ReproducerError, dump_reproducer, parse_reproducer, replay, shrink
from .suite import SuiteReport, run_suite
