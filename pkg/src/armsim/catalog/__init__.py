"""The instruction database and the primitives its pseudocode calls."""
from .builtins import BUILTINS, PROCEDURES, builtin
from .shifter import (
    RRX, Immediate, Register, Shift, ShifterDescriptor, ShiftImm, ShiftReg,
    compute_shifter_operand, format_shifter,
)
from .spec import (
    DATA_DIR, CatalogError, EncodingPattern, OperationSpec, by_name, catalog, load_catalog,
)
