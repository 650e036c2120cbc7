"""Error types and execution outcomes for the Wasm subsystem."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field


class WasmError(Exception):
    """Base class for all errors raised by the Wasm subsystem."""


# ---------------------------------------------------------------- parse

class ParseError(WasmError):
    pass


class BadMagic(ParseError):
    pass


class BadVersion(ParseError):
    pass


class MalformedSection(ParseError):
    def __init__(self, section_id: int, offset: int, detail: str = ""):
        self.section_id = section_id
        self.offset = offset
        self.detail = detail
        super().__init__(f"malformed section {section_id} at offset {offset}: {detail}")


class UnsupportedFeature(ParseError):
    def __init__(self, feature: str, offset: int = -1):
        self.feature = feature
        self.offset = offset
        super().__init__(f"unsupported feature: {feature}")


# ------------------------------------------------------------- validate

class ValidationError(WasmError):
    pass


class TypeMismatch(ValidationError):
    def __init__(self, func_index: int, instr_offset: int, expected: str, found: str):
        self.func_index = func_index
        self.instr_offset = instr_offset
        self.expected = expected
        self.found = found
        super().__init__(
            f"type mismatch in func {func_index} at instruction {instr_offset}: "
            f"expected {expected}, found {found}"
        )


class UnknownLocal(ValidationError):
    pass


class UnknownGlobal(ValidationError):
    pass


class UnknownFunc(ValidationError):
    pass


class UnknownLabel(ValidationError):
    pass


class UnknownType(ValidationError):
    pass


class ConstExprRequired(ValidationError):
    pass


# ---------------------------------------------------------- instantiate

class InstantiationError(WasmError):
    pass


class UnresolvedImport(InstantiationError):
    def __init__(self, module: str, field_name: str):
        self.module = module
        self.field = field_name
        super().__init__(f"unresolved import {module}.{field_name}")


class SignatureMismatch(InstantiationError):
    def __init__(self, module: str, field_name: str, expected: str, found: str):
        self.module = module
        self.field = field_name
        super().__init__(
            f"import {module}.{field_name}: signature mismatch "
            f"(expected {expected}, found {found})"
        )


class DataSegmentOutOfBounds(InstantiationError):
    pass


class ElemSegmentOutOfBounds(InstantiationError):
    pass


class StartTrapped(InstantiationError):
    def __init__(self, outcome):
        self.outcome = outcome
        super().__init__(f"start function did not complete: {outcome}")


class LimitsError(InstantiationError):
    pass


# --------------------------------------------------------------- invoke

class InvokeError(WasmError):
    pass


class NoSuchExport(InvokeError):
    pass


class ArgTypeMismatch(InvokeError):
    pass


class HostMemOutOfBounds(WasmError):
    """Host-side memory access outside the instance's linear memory."""


class HostError(WasmError):
    """Host programming error, e.g. re-entrant invocation of one instance."""


# -------------------------------------------------------------- outcomes

class TrapKind(enum.Enum):
    Unreachable = "unreachable"
    MemOutOfBounds = "memory out of bounds"
    TableOutOfBounds = "table out of bounds"
    IndirectCallTypeMismatch = "indirect call type mismatch"
    IntegerDivByZero = "integer divide by zero"
    IntegerOverflow = "integer overflow"
    InvalidConversion = "invalid conversion to integer"
    StackExhausted = "call stack exhausted"


class Trap(Exception):
    """Internal control-flow signal; surfaces as ExecOutcome.trapped()."""

    def __init__(self, kind: TrapKind):
        self.kind = kind
        super().__init__(kind.value)


class OutOfFuel(Exception):
    """Internal control-flow signal; surfaces as ExecOutcome.out_of_fuel()."""


@dataclass(frozen=True)
class ExecOutcome:
    """Result of one invocation: values, a trap, or fuel exhaustion."""

    kind: str  # "values" | "trap" | "out_of_fuel"
    values: tuple = ()
    trap: TrapKind | None = None
    fuel_consumed: int = 0

    @staticmethod
    def ok(values, fuel_consumed: int) -> "ExecOutcome":
        return ExecOutcome("values", values=tuple(values), fuel_consumed=fuel_consumed)

    @staticmethod
    def trapped(kind: TrapKind, fuel_consumed: int) -> "ExecOutcome":
        return ExecOutcome("trap", trap=kind, fuel_consumed=fuel_consumed)

    @staticmethod
    def exhausted(fuel_consumed: int) -> "ExecOutcome":
        return ExecOutcome("out_of_fuel", fuel_consumed=fuel_consumed)

    @property
    def is_values(self) -> bool:
        return self.kind == "values"

    @property
    def is_trap(self) -> bool:
        return self.kind == "trap"

    @property
    def is_out_of_fuel(self) -> bool:
        return self.kind == "out_of_fuel"

    def __str__(self) -> str:
        if self.kind == "values":
            return f"values{tuple(v.value for v in self.values)}"
        if self.kind == "trap":
            return f"trap({self.trap.name})"
        return "out_of_fuel"
