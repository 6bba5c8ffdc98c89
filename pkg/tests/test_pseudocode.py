from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from armsim.catalog import DATA_DIR, catalog
from armsim.pseudocode import (
    Assign, BinOp, BitRange, Block, Const, Flag, If, IfExp, OperationAst, ParseError, Reg, Var,
    format_exp, format_operation, format_stm, may_branch, parse_exp, parse_operation, parse_stm,
    resolve_old_params, write_targets,
)
from armsim.pseudocode.ast import OldFlag, OldParam, walk_exp, stm_exps, walk_stm

PARAMS = {"d": "register-index", "n": "register-index", "S": "bit", "x": "word", "y": "word"}

# ---- random expressions ---------------------------------------------------------------------

_leaf = st.one_of(
    st.sampled_from([Var("x"), Var("y"), Var("S")]),
    st.integers(0, 0xFFFFFFFF).map(Const),
    st.sampled_from([Flag(f) for f in "NZCV"]),
    st.sampled_from([Reg(Var("d")), Reg(Var("n")), Reg(Const(15))]),
)


def _extend(inner):
    return st.one_of(
        st.builds(BinOp, inner, st.sampled_from(["+", "-", "AND", "OR", "EOR", "<<", ">>"]), inner),
        st.builds(BinOp, inner, st.sampled_from(["==", "!="]), inner),
        st.builds(IfExp, st.builds(BinOp, inner, st.just("=="), inner), inner, inner),
        st.builds(lambda e, hi: BitRange(e, hi, hi), inner, st.integers(0, 31)),
    )


expressions = st.recursive(_leaf, _extend, max_leaves=12)


@settings(max_examples=1500, deadline=None)
@given(expressions)
def test_expression_print_parse_roundtrip(e):
    assert parse_exp(format_exp(e), PARAMS) == e


@settings(max_examples=500, deadline=None)
@given(st.lists(st.tuples(st.sampled_from([Reg(Var("d")), Flag("C"), Flag("Z")]), expressions),
                min_size=1, max_size=4),
       expressions)
def test_statement_print_parse_roundtrip(assigns, cond):
    body = Block(tuple(Assign(d, s) for d, s in assigns))
    s = If(BinOp(cond, "==", Const(1)), body, Assign(Reg(Var("n")), Const(0)))
    assert parse_stm(format_stm(s), PARAMS) == s


# ---- catalog ----------------------------------------------------------------------------

@pytest.mark.parametrize("spec", catalog(), ids=lambda s: s.mnemonic)
def test_catalog_operation_roundtrips(spec):
    op = parse_operation(spec.source)
    assert op.name == spec.mnemonic
    again = parse_operation(format_operation(op))
    assert again == op


def test_catalog_has_the_instruction_set():
    names = {s.mnemonic for s in catalog()}
    assert names == {"AND", "EOR", "SUB", "RSB", "ADD", "ADC", "SBC", "RSC", "TST", "TEQ",
                     "CMP", "CMN", "ORR", "MOV", "BIC", "MVN", "B", "BL"}
    assert sorted(s.opcode for s in catalog()) == list(range(18))
    assert len(list(DATA_DIR.glob("*.pcode"))) == 18


def test_flags_affected():
    by = {s.mnemonic: s for s in catalog()}
    assert by["ADC"].flags_affected == "NZCV"
    assert by["AND"].flags_affected == "NZC"
    assert by["B"].flags_affected == ""


# ---- diagnostics ------------------------------------------------------------------------

HEADER = "A0.0 T\nparam d : register-index\n"


@pytest.mark.parametrize("body,line,col", [
    ("Rd = 1 +;\n", 3, 9),
    ("if Rd == 1 then\n    Rd = ;\n", 4, 10),
    ("Rd = (1 + 2;\n", 3, 12),
])
def test_parse_error_positions(body, line, col):
    with pytest.raises(ParseError) as ei:
        parse_operation(HEADER + body)
    assert (ei.value.line, ei.value.col) == (line, col)
    assert ei.value.expected


def test_unbound_variable_rejected():
    with pytest.raises(ParseError, match="q"):
        parse_operation(HEADER + "Rd = q;\n")


def test_bad_header_and_param_kind():
    with pytest.raises(ParseError):
        parse_operation("ADC\nRd = 0;\n")
    with pytest.raises(ParseError, match="kind"):
        parse_operation("A0.0 T\nparam d : float\nRd = 0;\n")


def test_unknown_function_rejected():
    with pytest.raises(ParseError):
        parse_operation(HEADER + "Rd = Frobnicate(1);\n")


# ---- static passes ------------------------------------------------------------------------

def _old_reads(op: OperationAst):
    out = set()
    for s in walk_stm(op.body):
        for e in stm_exps(s):
            for x in walk_exp(e):
                if isinstance(x, (OldParam, OldFlag)):
                    out.add(x)
    return out


def test_adc_reads_entry_values_after_writes():
    adc = next(s for s in catalog() if s.mnemonic == "ADC")
    old = _old_reads(resolve_old_params(adc.ast))
    # Rd may alias Rn, and C is read after it has been rewritten.
    assert OldParam("n") in old
    assert OldFlag("C") in old


def test_write_targets_and_may_branch():
    add = next(s for s in catalog() if s.mnemonic == "ADD").resolved
    assert Reg(Var("d")) in write_targets(add)
    base = {"cond": 14, "S": 0, "n": 1, "shifter_operand": 0, "shifter_carry_out": 0}
    assert may_branch(add, {**base, "d": 15})
    assert not may_branch(add, {**base, "d": 3})
    cmp_ = next(s for s in catalog() if s.mnemonic == "CMP").resolved
    assert not may_branch(cmp_, {"cond": 14, "n": 15, "shifter_operand": 0,
                                 "shifter_carry_out": 0})
