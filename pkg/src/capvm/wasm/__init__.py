"""Parser, validator, and fuel-metered interpreter for a core-Wasm subset."""

from .errors import (
    ArgTypeMismatch,
    BadMagic,
    BadVersion,
    ConstExprRequired,
    DataSegmentOutOfBounds,
    ElemSegmentOutOfBounds,
    ExecOutcome,
    HostError,
    HostMemOutOfBounds,
    InstantiationError,
    InvokeError,
    LimitsError,
    MalformedSection,
    NoSuchExport,
    ParseError,
    SignatureMismatch,
    StartTrapped,
    Trap,
    TrapKind,
    TypeMismatch,
    UnknownFunc,
    UnknownGlobal,
    UnknownLabel,
    UnknownLocal,
    UnknownType,
    UnresolvedImport,
    UnsupportedFeature,
    ValidationError,
    WasmError,
)
from .parser import parse_module
from .runtime import (
    DEFAULT_CALL_DEPTH,
    DEFAULT_FUEL,
    HostFunc,
    HostImportTable,
    Instance,
    InstanceLimits,
    instantiate,
)
from .types import FuncType, Limits, Value, WasmModule
from .validator import ValidatedModule, validate


def load(data: bytes) -> ValidatedModule:
    """Parse and validate a binary in one step."""
    return validate(parse_module(data))


__all__ = [
    "ArgTypeMismatch", "BadMagic", "BadVersion", "ConstExprRequired",
    "DataSegmentOutOfBounds", "DEFAULT_CALL_DEPTH", "DEFAULT_FUEL",
    "ElemSegmentOutOfBounds", "ExecOutcome", "FuncType", "HostError",
    "HostFunc", "HostImportTable", "HostMemOutOfBounds", "Instance",
    "InstanceLimits", "InstantiationError", "InvokeError", "Limits",
    "LimitsError", "MalformedSection", "NoSuchExport", "ParseError",
    "SignatureMismatch", "StartTrapped", "Trap", "TrapKind", "TypeMismatch",
    "UnknownFunc", "UnknownGlobal", "UnknownLabel", "UnknownLocal",
    "UnknownType", "UnresolvedImport", "UnsupportedFeature", "ValidatedModule",
    "ValidationError", "Value", "WasmError", "WasmModule", "instantiate",
    "load", "parse_module", "validate",
]
