"""Instruction pseudocode: AST, parser, printer and static passes."""
from .analysis import check_bindings, may_branch, resolve_old_params, write_targets
from .ast import *  # noqa: F403
from .lexer import ParseError
from .parser import parse_exp, parse_operation, parse_operations, parse_stm
from .printer import format_exp, format_operation, format_stm
