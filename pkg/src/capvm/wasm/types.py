"""Structured representation of a parsed module and runtime values."""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

from .errors import ArgTypeMismatch
from .numerics import I32_MAX, I32_MIN, I64_MAX, I64_MIN, canon, f32, s32, s64

VALTYPES = ("i32", "i64", "f32", "f64")


@dataclass(frozen=True)
class FuncType:
    params: tuple[str, ...]
    results: tuple[str, ...]  # at most one entry (no multi-value)

    def __str__(self) -> str:
        return f"({', '.join(self.params)}) -> ({', '.join(self.results)})"


@dataclass(frozen=True)
class Limits:
    min: int
    max: int | None = None


@dataclass(frozen=True)
class TableType:
    limits: Limits  # element type is always funcref


@dataclass(frozen=True)
class MemoryType:
    limits: Limits  # limits are in pages of the instantiation-time page size


@dataclass(frozen=True)
class GlobalType:
    valtype: str
    mutable: bool


@dataclass(frozen=True)
class Import:
    module: str
    name: str
    kind: str  # "func" | "table" | "memory" | "global"
    desc: object  # type index for funcs, *Type otherwise


@dataclass
class Func:
    type_idx: int
    locals: tuple[str, ...] = ()
    body: list = field(default_factory=list)  # decoded (op, imm) tuples


@dataclass(frozen=True)
class GlobalDef:
    type: GlobalType
    init: tuple  # const expr: ("i32.const", v) ... or ("global.get", idx)


@dataclass(frozen=True)
class ElemSegment:
    table_idx: int
    offset: tuple
    func_indices: tuple[int, ...]


@dataclass(frozen=True)
class DataSegment:
    mem_idx: int
    offset: tuple
    data: bytes


@dataclass
class WasmModule:
    types: list[FuncType] = field(default_factory=list)
    imports: list[Import] = field(default_factory=list)
    funcs: list[Func] = field(default_factory=list)
    tables: list[TableType] = field(default_factory=list)
    memories: list[MemoryType] = field(default_factory=list)
    globals: list[GlobalDef] = field(default_factory=list)
    exports: dict[str, tuple[str, int]] = field(default_factory=dict)
    start: int | None = None
    elements: list[ElemSegment] = field(default_factory=list)
    data: list[DataSegment] = field(default_factory=list)

    def import_funcs(self) -> list[Import]:
        return [i for i in self.imports if i.kind == "func"]

    def func_type(self, func_idx: int) -> FuncType:
        """Type of a function in the combined import+defined index space."""
        imported = self.import_funcs()
        if func_idx < len(imported):
            return self.types[imported[func_idx].desc]
        return self.types[self.funcs[func_idx - len(imported)].type_idx]

    def num_funcs(self) -> int:
        return len(self.import_funcs()) + len(self.funcs)


@dataclass(frozen=True)
class Value:
    """A typed Wasm scalar crossing the host boundary."""

    type: str
    value: int | float

    @staticmethod
    def i32(v: int) -> "Value":
        return Value("i32", s32(v))

    @staticmethod
    def i64(v: int) -> "Value":
        return Value("i64", s64(v))

    @staticmethod
    def f32(v: float) -> "Value":
        return Value("f32", canon(f32(float(v))))

    @staticmethod
    def f64(v: float) -> "Value":
        return Value("f64", canon(float(v)))

    def __repr__(self) -> str:
        return f"{self.type}:{self.value}"


def coerce_arg(raw, valtype: str, where: str = "argument") -> int | float:
    """Turn a host-supplied argument into a canonical internal value."""
    if isinstance(raw, Value):
        if raw.type != valtype:
            raise ArgTypeMismatch(f"{where}: expected {valtype}, got {raw.type}")
        return raw.value
    if valtype == "i32":
        if not isinstance(raw, int) or isinstance(raw, bool):
            raise ArgTypeMismatch(f"{where}: expected i32, got {type(raw).__name__}")
        if raw < I32_MIN or raw > 0xFFFFFFFF:
            raise ArgTypeMismatch(f"{where}: {raw} out of i32 range")
        return s32(raw)
    if valtype == "i64":
        if not isinstance(raw, int) or isinstance(raw, bool):
            raise ArgTypeMismatch(f"{where}: expected i64, got {type(raw).__name__}")
        if raw < I64_MIN or raw > 0xFFFFFFFFFFFFFFFF:
            raise ArgTypeMismatch(f"{where}: {raw} out of i64 range")
        return s64(raw)
    if valtype == "f32":
        if not isinstance(raw, (int, float)) or isinstance(raw, bool):
            raise ArgTypeMismatch(f"{where}: expected f32, got {type(raw).__name__}")
        return canon(f32(float(raw)))
    if valtype == "f64":
        if not isinstance(raw, (int, float)) or isinstance(raw, bool):
            raise ArgTypeMismatch(f"{where}: expected f64, got {type(raw).__name__}")
        return canon(float(raw))
    raise ArgTypeMismatch(f"{where}: unknown value type {valtype}")


def wrap_value(raw: int | float, valtype: str) -> Value:
    return Value(valtype, raw)
