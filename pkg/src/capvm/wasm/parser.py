"""Decoder for the core Wasm binary format (sections 1-11, custom skipped).

Excluded proposals (SIMD, reference types, bulk memory, multi-value, tail
calls, threads, exceptions, GC) are rejected here with UnsupportedFeature
so nothing downstream ever sees them.
"""

from __future__ import annotations

import struct

from . import opcodes as op
from .errors import BadMagic, BadVersion, MalformedSection, UnsupportedFeature
from .numerics import canon, f32
from .types import (
    DataSegment,
    ElemSegment,
    Func,
    FuncType,
    GlobalDef,
    GlobalType,
    Import,
    Limits,
    MemoryType,
    TableType,
    WasmModule,
)

MAGIC = b"\x00asm"
VERSION = b"\x01\x00\x00\x00"

_VALTYPE_BYTES = {0x7F: "i32", 0x7E: "i64", 0x7D: "f32", 0x7C: "f64"}

MAX_LOCALS = 100_000


class _Reader:
    __slots__ = ("data", "pos", "end", "section_id")

    def __init__(self, data: bytes, pos: int = 0, end: int | None = None, section_id: int = -1):
        self.data = data
        self.pos = pos
        self.end = len(data) if end is None else end
        self.section_id = section_id

    def fail(self, detail: str):
        raise MalformedSection(self.section_id, self.pos, detail)

    def done(self) -> bool:
        return self.pos >= self.end

    def u8(self) -> int:
        if self.pos >= self.end:
            self.fail("unexpected end of input")
        b = self.data[self.pos]
        self.pos += 1
        return b

    def take(self, n: int) -> bytes:
        if self.pos + n > self.end:
            self.fail("unexpected end of input")
        b = self.data[self.pos:self.pos + n]
        self.pos += n
        return b

    def leb_u(self, bits: int) -> int:
        result = shift = 0
        while True:
            b = self.u8()
            result |= (b & 0x7F) << shift
            shift += 7
            if not (b & 0x80):
                break
            if shift >= bits + 7:
                self.fail(f"u{bits} LEB too long")
        if result >> bits:
            self.fail(f"u{bits} LEB out of range")
        return result

    def u32(self) -> int:
        return self.leb_u(32)

    def leb_s(self, bits: int) -> int:
        result = shift = 0
        while True:
            b = self.u8()
            result |= (b & 0x7F) << shift
            shift += 7
            if not (b & 0x80):
                break
            if shift >= bits + 7:
                self.fail(f"s{bits} LEB too long")
        if b & 0x40:
            result |= -1 << shift
        if result < -(1 << (bits - 1)) or result >= (1 << (bits - 1)):
            self.fail(f"s{bits} LEB out of range")
        return result

    def s32(self) -> int:
        return self.leb_s(32)

    def s64(self) -> int:
        return self.leb_s(64)

    def f32(self) -> float:
        return canon(f32(struct.unpack("<f", self.take(4))[0]))

    def f64(self) -> float:
        return canon(struct.unpack("<d", self.take(8))[0])

    def name(self) -> str:
        raw = self.take(self.u32())
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError:
            self.fail("invalid UTF-8 name")

    def valtype(self) -> str:
        b = self.u8()
        t = _VALTYPE_BYTES.get(b)
        if t is None:
            if b in (0x70, 0x6F, 0x7B):
                raise UnsupportedFeature("reference-types" if b != 0x7B else "simd", self.pos)
            self.fail(f"invalid value type byte 0x{b:02x}")
        return t

    def limits(self) -> Limits:
        flag = self.u8()
        if flag in (2, 3):
            raise UnsupportedFeature("threads", self.pos)
        if flag not in (0, 1):
            self.fail(f"invalid limits flag 0x{flag:02x}")
        lo = self.u32()
        hi = self.u32() if flag == 1 else None
        return Limits(lo, hi)

    def blocktype(self) -> str | None:
        b = self.u8()
        if b == 0x40:
            return None
        t = _VALTYPE_BYTES.get(b)
        if t is not None:
            return t
        # remaining encodings are S33 type indices (block params/results)
        raise UnsupportedFeature("multi-value", self.pos)


def _decode_expr(r: _Reader) -> list:
    """Decode a flat instruction sequence up to and including its final end."""
    out = []
    depth = 0
    while True:
        o = r.u8()
        if o == op.END:
            out.append((op.END, None))
            if depth == 0:
                return out
            depth -= 1
        elif o in (op.BLOCK, op.LOOP, op.IF):
            out.append((o, r.blocktype()))
            depth += 1
        elif o == op.ELSE:
            out.append((op.ELSE, None))
        elif o in (op.BR, op.BR_IF, op.CALL, op.LOCAL_GET, op.LOCAL_SET,
                   op.LOCAL_TEE, op.GLOBAL_GET, op.GLOBAL_SET):
            out.append((o, r.u32()))
        elif o == op.BR_TABLE:
            targets = tuple(r.u32() for _ in range(r.u32()))
            out.append((op.BR_TABLE, (targets, r.u32())))
        elif o == op.CALL_INDIRECT:
            type_idx = r.u32()
            if r.u8() != 0x00:
                raise UnsupportedFeature("multi-table", r.pos)
            out.append((op.CALL_INDIRECT, type_idx))
        elif o in op.MEMOPS:
            align = r.u32()
            if align & 0x40:
                raise UnsupportedFeature("multi-memory", r.pos)
            out.append((o, (align, r.u32())))
        elif o in (op.MEMORY_SIZE, op.MEMORY_GROW):
            if r.u8() != 0x00:
                raise UnsupportedFeature("multi-memory", r.pos)
            out.append((o, None))
        elif o == op.I32_CONST:
            out.append((o, r.s32()))
        elif o == op.I64_CONST:
            out.append((o, r.s64()))
        elif o == op.F32_CONST:
            out.append((o, r.f32()))
        elif o == op.F64_CONST:
            out.append((o, r.f64()))
        elif o == op.FC_PREFIX:
            sub = r.u32()
            if sub in op.UNSUPPORTED_FC:
                raise UnsupportedFeature(op.UNSUPPORTED_FC[sub], r.pos)
            if sub > 7:
                r.fail(f"invalid 0xfc sub-opcode {sub}")
            out.append((op.fc_op(sub), None))
        elif o in op.UNSUPPORTED:
            raise UnsupportedFeature(op.UNSUPPORTED[o], r.pos)
        else:
            from .numerics import OPS
            if o in OPS or o in (op.UNREACHABLE, op.NOP, op.RETURN, op.DROP, op.SELECT):
                out.append((o, None))
            else:
                r.fail(f"invalid opcode 0x{o:02x}")


def _parse_functype(r: _Reader) -> FuncType:
    if r.u8() != 0x60:
        r.fail("function type must start with 0x60")
    params = tuple(r.valtype() for _ in range(r.u32()))
    results = tuple(r.valtype() for _ in range(r.u32()))
    if len(results) > 1:
        raise UnsupportedFeature("multi-value", r.pos)
    return FuncType(params, results)


def _parse_globaltype(r: _Reader) -> GlobalType:
    vt = r.valtype()
    mut = r.u8()
    if mut not in (0, 1):
        r.fail(f"invalid mutability byte 0x{mut:02x}")
    return GlobalType(vt, mut == 1)


def _parse_tabletype(r: _Reader) -> TableType:
    et = r.u8()
    if et == 0x6F:
        raise UnsupportedFeature("reference-types", r.pos)
    if et != 0x70:
        r.fail(f"invalid table element type 0x{et:02x}")
    return TableType(r.limits())


def _const_expr(r: _Reader) -> tuple:
    """Decode an initializer expression; shape is enforced by the validator."""
    instrs = _decode_expr(r)
    if len(instrs) != 2:
        return ("expr", tuple(instrs[:-1]))
    o, imm = instrs[0]
    names = {op.I32_CONST: "i32.const", op.I64_CONST: "i64.const",
             op.F32_CONST: "f32.const", op.F64_CONST: "f64.const",
             op.GLOBAL_GET: "global.get"}
    if o in names:
        return (names[o], imm)
    return ("expr", (instrs[0],))


def parse_module(data: bytes) -> WasmModule:
    """Parse a .wasm binary into a WasmModule (structure only, unvalidated)."""
    if not isinstance(data, (bytes, bytearray, memoryview)):
        raise TypeError("parse_module expects bytes")
    data = bytes(data)
    if len(data) < 4 or data[:4] != MAGIC:
        raise BadMagic(f"bad magic: {data[:4]!r}")
    if len(data) < 8 or data[4:8] != VERSION:
        raise BadVersion(f"bad version: {data[4:8]!r}")

    mod = WasmModule()
    top = _Reader(data, 8)
    last_section = 0
    func_type_indices: list[int] = []
    code_bodies: list[tuple[tuple[str, ...], list]] = []

    while not top.done():
        sect_id = top.u8()
        size = top.u32()
        if top.pos + size > top.end:
            raise MalformedSection(sect_id, top.pos, "section size exceeds input")
        r = _Reader(data, top.pos, top.pos + size, sect_id)
        top.pos += size

        if sect_id == 0:  # custom: skip
            r.name()
            continue
        if sect_id == 12:
            raise UnsupportedFeature("bulk-memory", r.pos)
        if sect_id > 12:
            raise MalformedSection(sect_id, r.pos, "unknown section id")
        if sect_id <= last_section:
            raise MalformedSection(sect_id, r.pos, "section out of order or duplicated")
        last_section = sect_id

        if sect_id == 1:
            mod.types = [_parse_functype(r) for _ in range(r.u32())]
        elif sect_id == 2:
            for _ in range(r.u32()):
                module, name = r.name(), r.name()
                kind = r.u8()
                if kind == 0:
                    mod.imports.append(Import(module, name, "func", r.u32()))
                elif kind == 1:
                    mod.imports.append(Import(module, name, "table", _parse_tabletype(r)))
                elif kind == 2:
                    mod.imports.append(Import(module, name, "memory", MemoryType(r.limits())))
                elif kind == 3:
                    mod.imports.append(Import(module, name, "global", _parse_globaltype(r)))
                else:
                    r.fail(f"invalid import kind 0x{kind:02x}")
        elif sect_id == 3:
            func_type_indices = [r.u32() for _ in range(r.u32())]
        elif sect_id == 4:
            mod.tables = [_parse_tabletype(r) for _ in range(r.u32())]
        elif sect_id == 5:
            mod.memories = [MemoryType(r.limits()) for _ in range(r.u32())]
        elif sect_id == 6:
            for _ in range(r.u32()):
                gt = _parse_globaltype(r)
                mod.globals.append(GlobalDef(gt, _const_expr(r)))
        elif sect_id == 7:
            for _ in range(r.u32()):
                name = r.name()
                kind = r.u8()
                if kind > 3:
                    r.fail(f"invalid export kind 0x{kind:02x}")
                if name in mod.exports:
                    r.fail(f"duplicate export name {name!r}")
                mod.exports[name] = (("func", "table", "memory", "global")[kind], r.u32())
        elif sect_id == 8:
            mod.start = r.u32()
        elif sect_id == 9:
            for _ in range(r.u32()):
                flag = r.u32()
                if flag != 0:
                    raise UnsupportedFeature("bulk-memory", r.pos)
                offset = _const_expr(r)
                funcs = tuple(r.u32() for _ in range(r.u32()))
                mod.elements.append(ElemSegment(0, offset, funcs))
        elif sect_id == 10:
            for _ in range(r.u32()):
                body_size = r.u32()
                body_end = r.pos + body_size
                if body_end > r.end:
                    r.fail("code body size exceeds section")
                locals_: list[str] = []
                for _ in range(r.u32()):
                    count = r.u32()
                    vt = r.valtype()
                    if count + len(locals_) > MAX_LOCALS:
                        r.fail("too many locals")
                    locals_.extend([vt] * count)
                body = _decode_expr(r)
                if r.pos != body_end:
                    r.fail("code body size mismatch")
                code_bodies.append((tuple(locals_), body))
        elif sect_id == 11:
            for _ in range(r.u32()):
                flag = r.u32()
                if flag == 1:
                    raise UnsupportedFeature("bulk-memory", r.pos)
                if flag == 2:
                    raise UnsupportedFeature("multi-memory", r.pos)
                if flag != 0:
                    r.fail(f"invalid data segment flag {flag}")
                offset = _const_expr(r)
                mod.data.append(DataSegment(0, offset, bytes(r.take(r.u32()))))

        if not r.done():
            raise MalformedSection(sect_id, r.pos, "trailing bytes in section")

    if len(func_type_indices) != len(code_bodies):
        raise MalformedSection(10, top.pos,
                               f"{len(func_type_indices)} function declarations but "
                               f"{len(code_bodies)} bodies")
    for type_idx, (locals_, body) in zip(func_type_indices, code_bodies):
        mod.funcs.append(Func(type_idx, locals_, body))
    return mod
