"""Full type-checking of function bodies plus compilation to a flat
micro-op stream with pre-resolved branch targets.

The checker is the standard operand-stack algorithm with unreachable
polymorphism. Because block parameters and multi-value are excluded,
every label carries zero or one result type, which keeps branch entries
to a (target, keep, height) triple: trim the operand stack to `height`,
carry the top `keep` values, jump to `target`.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import opcodes as op
from .errors import (
    ConstExprRequired,
    TypeMismatch,
    UnknownFunc,
    UnknownGlobal,
    UnknownLabel,
    UnknownLocal,
    UnknownType,
    ValidationError,
)
from .numerics import OPS
from .types import FuncType, WasmModule

# Compiled micro-op kinds.
K_NOP = 0
K_UNREACHABLE = 1
K_IF = 2          # a = jump target when condition is zero
K_GOTO = 3        # a = jump target
K_BR = 4          # a = (target, keep, height)
K_BR_IF = 5       # a = (target, keep, height)
K_BR_TABLE = 6    # a = tuple of arms, b = default arm
K_RETURN = 7      # a = result arity
K_END_FUNC = 8    # a = result arity
K_CALL = 9        # a = function index (imports + defined)
K_CALL_INDIRECT = 10  # a = expected FuncType
K_DROP = 11
K_SELECT = 12
K_LOCAL_GET = 13
K_LOCAL_SET = 14
K_LOCAL_TEE = 15
K_GLOBAL_GET = 16
K_GLOBAL_SET = 17
K_LOAD = 18       # a = (width, mode), b = static offset
K_STORE = 19      # a = (width, fkind), b = static offset
K_MEM_SIZE = 20
K_MEM_GROW = 21
K_CONST = 22      # a = value
K_BINOP = 23      # a = fn, b = (name, ins, outs)
K_UNOP = 24       # a = fn, b = (name, ins, outs)

# Load modes: how the raw bytes become a value.
LOAD_U, LOAD_S, LOAD_F32, LOAD_F64 = 0, 1, 2, 3
# Store kinds: integer mask vs float pack.
STORE_INT, STORE_F32, STORE_F64 = 0, 1, 2

MAX_MEMORY_PAGES = 65536


@dataclass
class CompiledFunc:
    functype: FuncType
    local_types: tuple[str, ...]  # params + declared locals
    code: list  # (kind, a, b) tuples


@dataclass
class ValidatedModule:
    module: WasmModule
    compiled: list[CompiledFunc]

    @property
    def exports(self):
        return self.module.exports


class _Ctrl:
    __slots__ = ("kind", "height", "result", "unreachable", "entry",
                 "patch", "if_entry", "else_goto", "else_seen")

    def __init__(self, kind: str, height: int, result: tuple):
        self.kind = kind
        self.height = height
        self.result = result
        self.unreachable = False
        self.entry = -1
        self.patch: list[list] = []
        self.if_entry = -1
        self.else_goto = -1
        self.else_seen = False


class _BodyChecker:
    def __init__(self, mod: WasmModule, func_index: int, functype: FuncType,
                 local_types: tuple[str, ...], global_types: list,
                 num_memories: int, num_tables: int):
        self.mod = mod
        self.fi = func_index
        self.functype = functype
        self.locals = local_types
        self.global_types = global_types  # list of GlobalType (imports first)
        self.num_memories = num_memories
        self.num_tables = num_tables
        self.vals: list[str] = []
        self.ctrls: list[_Ctrl] = [_Ctrl("func", 0, functype.results)]
        self.out: list[list] = []
        self.di = 0

    # -- type stack ------------------------------------------------------

    def mismatch(self, expected: str, found: str):
        raise TypeMismatch(self.fi, self.di, expected, found)

    def push(self, t: str):
        self.vals.append(t)

    def pop(self, expect: str | None = None) -> str:
        c = self.ctrls[-1]
        if len(self.vals) == c.height:
            if c.unreachable:
                return expect or "unknown"
            self.mismatch(expect or "a value", "empty stack")
        got = self.vals.pop()
        if expect is not None and got != "unknown" and got != expect:
            self.mismatch(expect, got)
        return got if got != "unknown" else (expect or "unknown")

    def pop_types(self, types: tuple):
        for t in reversed(types):
            self.pop(t)

    def set_unreachable(self):
        c = self.ctrls[-1]
        del self.vals[c.height:]
        c.unreachable = True

    def label(self, depth: int) -> _Ctrl:
        if depth >= len(self.ctrls):
            raise UnknownLabel(f"func {self.fi} instr {self.di}: label {depth} out of range")
        return self.ctrls[-1 - depth]

    def label_types(self, c: _Ctrl) -> tuple:
        return () if c.kind == "loop" else c.result

    def make_arm(self, c: _Ctrl) -> list:
        lt = self.label_types(c)
        arm = [c.entry + 1 if c.kind == "loop" else -1, len(lt), c.height]
        if c.kind != "loop":
            c.patch.append(arm)
        return arm

    # -- main pass -------------------------------------------------------

    def run(self, body: list) -> None:
        for self.di, (o, imm) in enumerate(body):
            self.step(o, imm)
        if self.ctrls:
            raise ValidationError(f"func {self.fi}: unterminated body")

    def emit(self, kind: int, a=None, b=None) -> list:
        e = [kind, a, b]
        self.out.append(e)
        return e

    def step(self, o: int, imm):
        mod = self.mod
        if o == op.END:
            c = self.ctrls[-1]
            self.pop_types(c.result)
            if len(self.vals) != c.height:
                self.mismatch("empty stack at end", f"{len(self.vals) - c.height} extra values")
            if c.kind == "if" and not c.else_seen and c.result != ():
                self.mismatch(f"else branch producing {c.result[0]}", "missing else")
            end_pos = len(self.out)
            for arm in c.patch:
                arm[0] = end_pos
            if c.kind == "if":
                if c.else_seen:
                    self.out[c.else_goto][1] = end_pos
                else:
                    self.out[c.if_entry][1] = end_pos
            if c.kind == "func":
                self.emit(K_END_FUNC, len(c.result))
            else:
                self.emit(K_NOP)
            self.ctrls.pop()
            for t in c.result:
                self.push(t)
            return
        if o == op.ELSE:
            c = self.ctrls[-1]
            if c.kind != "if" or c.else_seen:
                raise ValidationError(f"func {self.fi} instr {self.di}: else outside if")
            self.pop_types(c.result)
            if len(self.vals) != c.height:
                self.mismatch("empty stack at else", f"{len(self.vals) - c.height} extra values")
            c.else_goto = len(self.out)
            self.emit(K_GOTO, -1)
            self.out[c.if_entry][1] = len(self.out)
            c.else_seen = True
            c.unreachable = False
            return

        if o == op.UNREACHABLE:
            self.emit(K_UNREACHABLE)
            self.set_unreachable()
        elif o == op.NOP:
            self.emit(K_NOP)
        elif o in (op.BLOCK, op.LOOP):
            result = () if imm is None else (imm,)
            c = _Ctrl("block" if o == op.BLOCK else "loop", len(self.vals), result)
            c.entry = len(self.out)
            self.ctrls.append(c)
            self.emit(K_NOP)
        elif o == op.IF:
            self.pop("i32")
            result = () if imm is None else (imm,)
            c = _Ctrl("if", len(self.vals), result)
            c.entry = c.if_entry = len(self.out)
            self.ctrls.append(c)
            self.emit(K_IF, -1)
        elif o == op.BR:
            c = self.label(imm)
            self.pop_types(self.label_types(c))
            self.emit(K_BR, self.make_arm(c))
            self.set_unreachable()
        elif o == op.BR_IF:
            self.pop("i32")
            c = self.label(imm)
            lt = self.label_types(c)
            self.pop_types(lt)
            for t in lt:
                self.push(t)
            self.emit(K_BR_IF, self.make_arm(c))
        elif o == op.BR_TABLE:
            targets, default = imm
            self.pop("i32")
            dc = self.label(default)
            lt = self.label_types(dc)
            arms = []
            for t in targets:
                c = self.label(t)
                if self.label_types(c) != lt:
                    self.mismatch(f"label types {lt}", f"{self.label_types(c)}")
                arms.append(self.make_arm(c))
            self.pop_types(lt)
            self.emit(K_BR_TABLE, arms, self.make_arm(dc))
            self.set_unreachable()
        elif o == op.RETURN:
            self.pop_types(self.functype.results)
            self.emit(K_RETURN, len(self.functype.results))
            self.set_unreachable()
        elif o == op.CALL:
            if imm >= mod.num_funcs():
                raise UnknownFunc(f"func {self.fi} instr {self.di}: call to {imm}")
            ft = mod.func_type(imm)
            self.pop_types(ft.params)
            for t in ft.results:
                self.push(t)
            self.emit(K_CALL, imm)
        elif o == op.CALL_INDIRECT:
            if self.num_tables == 0:
                raise ValidationError(f"func {self.fi} instr {self.di}: no table")
            if imm >= len(mod.types):
                raise UnknownType(f"func {self.fi} instr {self.di}: type {imm}")
            ft = mod.types[imm]
            self.pop("i32")
            self.pop_types(ft.params)
            for t in ft.results:
                self.push(t)
            self.emit(K_CALL_INDIRECT, ft)
        elif o == op.DROP:
            self.pop()
            self.emit(K_DROP)
        elif o == op.SELECT:
            self.pop("i32")
            t2 = self.pop()
            t1 = self.pop()
            if t1 != "unknown" and t2 != "unknown" and t1 != t2:
                self.mismatch(t1, t2)
            self.push(t1 if t1 != "unknown" else t2)
            self.emit(K_SELECT)
        elif o in (op.LOCAL_GET, op.LOCAL_SET, op.LOCAL_TEE):
            if imm >= len(self.locals):
                raise UnknownLocal(f"func {self.fi} instr {self.di}: local {imm}")
            t = self.locals[imm]
            if o == op.LOCAL_GET:
                self.push(t)
                self.emit(K_LOCAL_GET, imm)
            elif o == op.LOCAL_SET:
                self.pop(t)
                self.emit(K_LOCAL_SET, imm)
            else:
                self.pop(t)
                self.push(t)
                self.emit(K_LOCAL_TEE, imm)
        elif o in (op.GLOBAL_GET, op.GLOBAL_SET):
            if imm >= len(self.global_types):
                raise UnknownGlobal(f"func {self.fi} instr {self.di}: global {imm}")
            gt = self.global_types[imm]
            if o == op.GLOBAL_GET:
                self.push(gt.valtype)
                self.emit(K_GLOBAL_GET, imm)
            else:
                if not gt.mutable:
                    raise ValidationError(
                        f"func {self.fi} instr {self.di}: global.set on immutable global {imm}")
                self.pop(gt.valtype)
                self.emit(K_GLOBAL_SET, imm)
        elif o in op.MEMOPS:
            if self.num_memories == 0:
                raise ValidationError(f"func {self.fi} instr {self.di}: no memory")
            name, kind, valtype, width = op.MEMOPS[o]
            align, offset = imm
            if (1 << align) > width:
                raise ValidationError(
                    f"func {self.fi} instr {self.di}: alignment 2^{align} exceeds width {width}")
            if kind == "load":
                self.pop("i32")
                self.push(valtype)
                if valtype == "f32":
                    mode = LOAD_F32
                elif valtype == "f64":
                    mode = LOAD_F64
                else:
                    mode = LOAD_U if name.endswith("_u") else LOAD_S
                self.emit(K_LOAD, (width, mode), offset)
            else:
                self.pop(valtype)
                self.pop("i32")
                fkind = STORE_F32 if valtype == "f32" else \
                    STORE_F64 if valtype == "f64" else STORE_INT
                self.emit(K_STORE, (width, fkind), offset)
        elif o in (op.MEMORY_SIZE, op.MEMORY_GROW):
            if self.num_memories == 0:
                raise ValidationError(f"func {self.fi} instr {self.di}: no memory")
            if o == op.MEMORY_GROW:
                self.pop("i32")
            self.push("i32")
            self.emit(K_MEM_SIZE if o == op.MEMORY_SIZE else K_MEM_GROW)
        elif o == op.I32_CONST:
            self.push("i32")
            self.emit(K_CONST, imm)
        elif o == op.I64_CONST:
            self.push("i64")
            self.emit(K_CONST, imm)
        elif o in (op.F32_CONST, op.F64_CONST):
            self.push("f32" if o == op.F32_CONST else "f64")
            self.emit(K_CONST, imm)
        elif o in OPS:
            name, ins, outs, fn = OPS[o]
            self.pop_types(ins)
            for t in outs:
                self.push(t)
            self.emit(K_BINOP if len(ins) == 2 else K_UNOP, fn, (name, ins, outs))
        else:  # pragma: no cover - parser rejects everything else
            raise ValidationError(f"func {self.fi} instr {self.di}: unhandled opcode {o:#x}")


def _freeze(out: list) -> list:
    frozen = []
    for kind, a, b in out:
        if kind in (K_BR, K_BR_IF):
            a = tuple(a)
        elif kind == K_BR_TABLE:
            a = tuple(tuple(arm) for arm in a)
            b = tuple(b)
        frozen.append((kind, a, b))
    return frozen


def _check_const_expr(expr: tuple, expected: str, global_types: list,
                      num_imported_globals: int, where: str):
    kind, val = expr
    if kind == "expr":
        raise ConstExprRequired(f"{where}: initializer is not a constant expression")
    if kind == "global.get":
        if val >= num_imported_globals:
            raise UnknownGlobal(f"{where}: initializer references non-imported global {val}")
        gt = global_types[val]
        if gt.mutable:
            raise ConstExprRequired(f"{where}: initializer references mutable global")
        if gt.valtype != expected:
            raise TypeMismatch(-1, -1, expected, gt.valtype)
        return
    const_type = kind.split(".")[0]
    if const_type != expected:
        raise TypeMismatch(-1, -1, expected, const_type)


def validate(mod: WasmModule) -> ValidatedModule:
    """Type-check a parsed module and compile its bodies for execution."""
    num_imported_funcs = 0
    num_memories = len(mod.memories)
    num_tables = len(mod.tables)
    global_types = []
    for imp in mod.imports:
        if imp.kind == "func":
            if imp.desc >= len(mod.types):
                raise UnknownType(f"import {imp.module}.{imp.name}: type {imp.desc}")
            num_imported_funcs += 1
        elif imp.kind == "memory":
            num_memories += 1
        elif imp.kind == "table":
            num_tables += 1
        elif imp.kind == "global":
            global_types.append(imp.desc)
    num_imported_globals = len(global_types)
    global_types.extend(g.type for g in mod.globals)

    if num_memories > 1:
        raise ValidationError("at most one memory is allowed")
    if num_tables > 1:
        raise ValidationError("at most one table is allowed")
    for mt in mod.memories:
        lim = mt.limits
        if lim.min > MAX_MEMORY_PAGES or (lim.max is not None and lim.max > MAX_MEMORY_PAGES):
            raise ValidationError(f"memory limits exceed {MAX_MEMORY_PAGES} pages")
        if lim.max is not None and lim.max < lim.min:
            raise ValidationError("memory max below min")
    for tt in mod.tables:
        lim = tt.limits
        if lim.max is not None and lim.max < lim.min:
            raise ValidationError("table max below min")

    for fn in mod.funcs:
        if fn.type_idx >= len(mod.types):
            raise UnknownType(f"function declares unknown type {fn.type_idx}")

    for gi, g in enumerate(mod.globals):
        _check_const_expr(g.init, g.type.valtype, global_types,
                          num_imported_globals, f"global {gi}")

    for name, (kind, idx) in mod.exports.items():
        if kind == "func" and idx >= mod.num_funcs():
            raise UnknownFunc(f"export {name!r}: func {idx}")
        if kind == "global" and idx >= len(global_types):
            raise UnknownGlobal(f"export {name!r}: global {idx}")
        if kind == "memory" and idx >= num_memories:
            raise ValidationError(f"export {name!r}: memory {idx}")
        if kind == "table" and idx >= num_tables:
            raise ValidationError(f"export {name!r}: table {idx}")

    if mod.start is not None:
        if mod.start >= mod.num_funcs():
            raise UnknownFunc(f"start func {mod.start}")
        ft = mod.func_type(mod.start)
        if ft.params or ft.results:
            raise ValidationError(f"start function must be () -> (), got {ft}")

    for ei, elem in enumerate(mod.elements):
        if num_tables == 0:
            raise ValidationError(f"element segment {ei}: no table")
        _check_const_expr(elem.offset, "i32", global_types,
                          num_imported_globals, f"element segment {ei}")
        for fidx in elem.func_indices:
            if fidx >= mod.num_funcs():
                raise UnknownFunc(f"element segment {ei}: func {fidx}")

    for di_, seg in enumerate(mod.data):
        if num_memories == 0:
            raise ValidationError(f"data segment {di_}: no memory")
        _check_const_expr(seg.offset, "i32", global_types,
                          num_imported_globals, f"data segment {di_}")

    compiled = []
    for i, fn in enumerate(mod.funcs):
        functype = mod.types[fn.type_idx]
        local_types = tuple(functype.params) + tuple(fn.locals)
        checker = _BodyChecker(mod, num_imported_funcs + i, functype, local_types,
                               global_types, num_memories, num_tables)
        checker.run(fn.body)
        compiled.append(CompiledFunc(functype, local_types, _freeze(checker.out)))
    return ValidatedModule(mod, compiled)
