"""Instantiation and execution of validated modules.

The interpreter walks the pre-compiled micro-op stream produced by the
validator. Every executed instruction costs exactly one unit of fuel, so
two invocations with identical inputs consume identical fuel and produce
identical outcomes.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

from .errors import (
    ArgTypeMismatch,
    DataSegmentOutOfBounds,
    ElemSegmentOutOfBounds,
    ExecOutcome,
    HostError,
    HostMemOutOfBounds,
    LimitsError,
    NoSuchExport,
    OutOfFuel,
    SignatureMismatch,
    StartTrapped,
    Trap,
    TrapKind,
    UnresolvedImport,
)
from .numerics import F64_NAN, canon, f32, f32_bits
from .types import FuncType, Value, coerce_arg
from .validator import (
    K_BINOP,
    K_BR,
    K_BR_IF,
    K_BR_TABLE,
    K_CALL,
    K_CALL_INDIRECT,
    K_CONST,
    K_DROP,
    K_END_FUNC,
    K_GLOBAL_GET,
    K_GLOBAL_SET,
    K_GOTO,
    K_IF,
    K_LOAD,
    K_LOCAL_GET,
    K_LOCAL_SET,
    K_LOCAL_TEE,
    K_MEM_GROW,
    K_MEM_SIZE,
    K_NOP,
    K_RETURN,
    K_SELECT,
    K_STORE,
    K_UNOP,
    K_UNREACHABLE,
    LOAD_F32,
    LOAD_F64,
    LOAD_S,
    MAX_MEMORY_PAGES,
    STORE_F32,
    STORE_INT,
    ValidatedModule,
)

DEFAULT_FUEL = 1_000_000
DEFAULT_CALL_DEPTH = 512

_F32_NAN_BYTES = b"\x00\x00\xc0\x7f"
_F64_NAN_BYTES = b"\x00\x00\x00\x00\x00\x00\xf8\x7f"
_ZERO = {"i32": 0, "i64": 0, "f32": 0.0, "f64": 0.0}
_MASK = {1: 0xFF, 2: 0xFFFF, 4: 0xFFFFFFFF, 8: 0xFFFFFFFFFFFFFFFF}


@dataclass(frozen=True)
class HostFunc:
    """A host function importable by capsules.

    fn receives the calling Instance followed by the canonical arguments
    and returns None, one value, or a tuple matching `results`.
    """

    params: tuple[str, ...]
    results: tuple[str, ...]
    fn: object

    @property
    def functype(self) -> FuncType:
        return FuncType(self.params, self.results)


class HostImportTable:
    """Resolves (module, name) import pairs to host functions."""

    def __init__(self, entries: dict | None = None):
        self._entries: dict[tuple[str, str], HostFunc] = dict(entries or {})

    def add(self, module: str, name: str, host_func: HostFunc) -> None:
        self._entries[(module, name)] = host_func

    def lookup(self, module: str, name: str) -> HostFunc | None:
        return self._entries.get((module, name))

    def names(self):
        return sorted(self._entries)


@dataclass(frozen=True)
class InstanceLimits:
    page_size_bytes: int = 65536
    max_memory_pages: int | None = None
    call_depth_limit: int = DEFAULT_CALL_DEPTH
    initial_fuel: int = DEFAULT_FUEL


class _HostEntry:
    __slots__ = ("functype", "host")
    is_host = True

    def __init__(self, host: HostFunc):
        self.functype = host.functype
        self.host = host


class _WasmEntry:
    __slots__ = ("functype", "code", "nparams", "local_defaults", "arity")
    is_host = False

    def __init__(self, compiled):
        self.functype = compiled.functype
        self.code = compiled.code
        self.nparams = len(compiled.functype.params)
        self.local_defaults = [_ZERO[t] for t in compiled.local_types[self.nparams:]]
        self.arity = len(compiled.functype.results)


class _Frame:
    __slots__ = ("code", "locals", "stack", "ip", "arity")

    def __init__(self, entry: _WasmEntry, args: list):
        self.code = entry.code
        self.locals = args + entry.local_defaults.copy()
        self.stack: list = []
        self.ip = 0
        self.arity = entry.arity


class Instance:
    """A live module: linear memory, globals, table, and fuel state."""

    def __init__(self, validated: ValidatedModule, imports: HostImportTable,
                 limits: InstanceLimits):
        ps = limits.page_size_bytes
        if ps < 256 or ps > 65536 or ps & (ps - 1):
            raise LimitsError(f"page size must be a power of two in [256, 65536], got {ps}")
        self.validated = validated
        self.module = validated.module
        self.limits = limits
        self.page_size = ps
        self.call_depth_limit = limits.call_depth_limit
        self.fuel_remaining = 0
        self.fuel_consumed = 0
        self.debug_checks = False
        self.grow_guard = None  # optional callable(delta_bytes) -> bool
        self._busy = False

        mod = validated.module
        self.functions: list = []
        for imp in mod.imports:
            if imp.kind != "func":
                raise UnresolvedImport(imp.module, imp.name)
            host = imports.lookup(imp.module, imp.name) if imports else None
            if host is None:
                raise UnresolvedImport(imp.module, imp.name)
            declared = mod.types[imp.desc]
            if host.functype != declared:
                raise SignatureMismatch(imp.module, imp.name,
                                        str(declared), str(host.functype))
            self.functions.append(_HostEntry(host))
        for compiled in validated.compiled:
            self.functions.append(_WasmEntry(compiled))

        if mod.memories:
            lim = mod.memories[0].limits
            hard_cap = min(MAX_MEMORY_PAGES, (1 << 32) // ps)
            self.max_pages = min(lim.max if lim.max is not None else hard_cap,
                                 limits.max_memory_pages if limits.max_memory_pages is not None
                                 else hard_cap)
            if lim.min > self.max_pages:
                raise LimitsError(f"initial {lim.min} pages exceed limit {self.max_pages}")
            self.memory = bytearray(lim.min * ps)
        else:
            self.memory = bytearray(0)
            self.max_pages = 0

        self.table: list | None = None
        if mod.tables:
            self.table = [None] * mod.tables[0].limits.min

        self.globals: list = []
        for g in mod.globals:
            self.globals.append(self._eval_const(g.init))

        for i, seg in enumerate(mod.data):
            off = self._eval_const(seg.offset) & 0xFFFFFFFF
            if off + len(seg.data) > len(self.memory):
                raise DataSegmentOutOfBounds(
                    f"data segment {i} at {off}+{len(seg.data)} exceeds memory "
                    f"{len(self.memory)}")
            self.memory[off:off + len(seg.data)] = seg.data

        for i, elem in enumerate(mod.elements):
            off = self._eval_const(elem.offset) & 0xFFFFFFFF
            if self.table is None or off + len(elem.func_indices) > len(self.table):
                raise ElemSegmentOutOfBounds(
                    f"element segment {i} at {off}+{len(elem.func_indices)} exceeds table")
            for j, fidx in enumerate(elem.func_indices):
                self.table[off + j] = fidx

        if mod.start is not None:
            outcome = self._invoke_index(mod.start, [], limits.initial_fuel)
            if not outcome.is_values:
                raise StartTrapped(outcome)

    # ------------------------------------------------------------- helpers

    def _eval_const(self, expr: tuple):
        kind, val = expr
        if kind == "global.get":  # pragma: no cover - imports of globals are rejected
            raise UnresolvedImport("<global>", str(val))
        return val

    @property
    def page_count(self) -> int:
        return len(self.memory) // self.page_size

    @property
    def memory_bytes(self) -> int:
        return len(self.memory)

    def exports(self) -> dict[str, tuple[str, int]]:
        return dict(self.module.exports)

    # ------------------------------------------------------- host memory io

    def mem_read(self, offset: int, length: int) -> bytes:
        if offset < 0 or length < 0 or offset + length > len(self.memory):
            raise HostMemOutOfBounds(
                f"read [{offset}, {offset}+{length}) outside memory of {len(self.memory)}")
        return bytes(self.memory[offset:offset + length])

    def mem_write(self, offset: int, data: bytes) -> None:
        if offset < 0 or offset + len(data) > len(self.memory):
            raise HostMemOutOfBounds(
                f"write [{offset}, {offset}+{len(data)}) outside memory of "
                f"{len(self.memory)}")
        self.memory[offset:offset + len(data)] = data

    def memory_grow(self, delta_pages: int) -> int:
        """Grow linear memory; returns previous page count or -1 (in-band)."""
        cur = len(self.memory) // self.page_size
        if delta_pages < 0:
            return -1
        if delta_pages == 0:
            return cur
        if cur + delta_pages > self.max_pages:
            return -1
        if self.grow_guard is not None and \
                not self.grow_guard(delta_pages * self.page_size):
            return -1
        self.memory.extend(bytes(delta_pages * self.page_size))
        return cur

    # --------------------------------------------------------------- invoke

    def invoke(self, export_name: str, args=(), fuel: int = DEFAULT_FUEL) -> ExecOutcome:
        """Call an exported function under a fuel budget.

        Traps and fuel exhaustion are outcomes, not exceptions; the
        instance stays usable afterwards.
        """
        exp = self.module.exports.get(export_name)
        if exp is None or exp[0] != "func":
            raise NoSuchExport(f"no exported function {export_name!r}")
        entry = self.functions[exp[1]]
        ft = entry.functype
        if len(args) != len(ft.params):
            raise ArgTypeMismatch(
                f"{export_name} expects {len(ft.params)} args, got {len(args)}")
        coerced = [coerce_arg(a, t, f"{export_name} arg {i}")
                   for i, (a, t) in enumerate(zip(args, ft.params))]
        return self._invoke_index(exp[1], coerced, fuel)

    def _invoke_index(self, func_idx: int, coerced_args: list, fuel: int) -> ExecOutcome:
        if self._busy:
            raise HostError("re-entrant invocation of one Instance")
        entry = self.functions[func_idx]
        self._busy = True
        self.fuel_remaining = fuel
        consumed_before = self.fuel_consumed
        try:
            if entry.is_host:
                raws = self._call_host(entry.host, coerced_args)
            else:
                raws = self._run(entry, coerced_args)
            values = tuple(Value(t, v) for t, v in zip(entry.functype.results, raws))
            return ExecOutcome.ok(values, self.fuel_consumed - consumed_before)
        except Trap as t:
            return ExecOutcome.trapped(t.kind, self.fuel_consumed - consumed_before)
        except OutOfFuel:
            return ExecOutcome.exhausted(self.fuel_consumed - consumed_before)
        finally:
            self._busy = False

    def _call_host(self, hf: HostFunc, args: list) -> list:
        try:
            ret = hf.fn(self, *args)
        except (Trap, OutOfFuel, HostError):
            raise
        except Exception as exc:
            raise HostError(f"host import raised {exc!r}") from exc
        if ret is None:
            raws = ()
        elif isinstance(ret, tuple):
            raws = ret
        else:
            raws = (ret,)
        if len(raws) != len(hf.results):
            raise HostError(
                f"host import returned {len(raws)} values, declared {len(hf.results)}")
        try:
            return [coerce_arg(v, t, "host result") for v, t in zip(raws, hf.results)]
        except ArgTypeMismatch as exc:
            raise HostError(str(exc)) from exc

    # ---------------------------------------------------------- interpreter

    def _run(self, entry: _WasmEntry, args: list) -> list:
        frames = [_Frame(entry, args)]
        functions = self.functions
        unpack_from = struct.unpack_from
        pack_into = struct.pack_into
        debug = self.debug_checks

        while True:
            fr = frames[-1]
            code = fr.code
            stack = fr.stack
            locals_ = fr.locals
            ip = fr.ip
            returning = None
            while True:
                if self.fuel_remaining <= 0:
                    raise OutOfFuel()
                self.fuel_remaining -= 1
                self.fuel_consumed += 1
                k, a, b = code[ip]
                ip += 1
                if k == K_CONST:
                    stack.append(a)
                elif k == K_LOCAL_GET:
                    stack.append(locals_[a])
                elif k == K_LOCAL_SET:
                    locals_[a] = stack.pop()
                elif k == K_LOCAL_TEE:
                    locals_[a] = stack[-1]
                elif k == K_BINOP:
                    rhs = stack.pop()
                    if debug:
                        self._debug_operands(b, (stack[-1], rhs))
                    stack[-1] = a(stack[-1], rhs)
                    if debug:
                        self._debug_result(b, stack[-1])
                elif k == K_UNOP:
                    if debug:
                        self._debug_operands(b, (stack[-1],))
                    stack[-1] = a(stack[-1])
                    if debug:
                        self._debug_result(b, stack[-1])
                elif k == K_LOAD:
                    width, mode = a
                    ea = (stack[-1] & 0xFFFFFFFF) + b
                    m = self.memory
                    if ea + width > len(m):
                        raise Trap(TrapKind.MemOutOfBounds)
                    if mode == LOAD_S:
                        v = int.from_bytes(m[ea:ea + width], "little", signed=True)
                    elif mode == LOAD_F64:
                        v = canon(unpack_from("<d", m, ea)[0])
                    elif mode == LOAD_F32:
                        v = canon(unpack_from("<f", m, ea)[0])
                    else:
                        v = int.from_bytes(m[ea:ea + width], "little")
                    stack[-1] = v
                elif k == K_STORE:
                    width, fk = a
                    v = stack.pop()
                    ea = (stack.pop() & 0xFFFFFFFF) + b
                    m = self.memory
                    if ea + width > len(m):
                        raise Trap(TrapKind.MemOutOfBounds)
                    if fk == STORE_INT:
                        m[ea:ea + width] = (v & _MASK[width]).to_bytes(width, "little")
                    elif fk == STORE_F32:
                        if v != v:
                            m[ea:ea + 4] = _F32_NAN_BYTES
                        else:
                            pack_into("<f", m, ea, v)
                    else:
                        if v != v:
                            m[ea:ea + 8] = _F64_NAN_BYTES
                        else:
                            pack_into("<d", m, ea, v)
                elif k == K_NOP:
                    pass
                elif k == K_UNREACHABLE:
                    raise Trap(TrapKind.Unreachable)
                elif k == K_IF:
                    if not stack.pop():
                        ip = a
                elif k == K_GOTO:
                    ip = a
                elif k == K_BR:
                    target, keep, height = a
                    if keep:
                        v = stack[-1]
                        del stack[height:]
                        stack.append(v)
                    else:
                        del stack[height:]
                    ip = target
                elif k == K_BR_IF:
                    if stack.pop():
                        target, keep, height = a
                        if keep:
                            v = stack[-1]
                            del stack[height:]
                            stack.append(v)
                        else:
                            del stack[height:]
                        ip = target
                elif k == K_BR_TABLE:
                    i = stack.pop() & 0xFFFFFFFF
                    target, keep, height = a[i] if i < len(a) else b
                    if keep:
                        v = stack[-1]
                        del stack[height:]
                        stack.append(v)
                    else:
                        del stack[height:]
                    ip = target
                elif k == K_DROP:
                    stack.pop()
                elif k == K_SELECT:
                    c = stack.pop()
                    v2 = stack.pop()
                    if not c:
                        stack[-1] = v2
                elif k == K_GLOBAL_GET:
                    stack.append(self.globals[a])
                elif k == K_GLOBAL_SET:
                    self.globals[a] = stack.pop()
                elif k == K_MEM_SIZE:
                    stack.append(len(self.memory) // self.page_size)
                elif k == K_MEM_GROW:
                    stack.append(self.memory_grow(stack.pop() & 0xFFFFFFFF))
                elif k == K_CALL or k == K_CALL_INDIRECT:
                    if k == K_CALL:
                        callee = functions[a]
                    else:
                        i = stack.pop() & 0xFFFFFFFF
                        table = self.table
                        if table is None or i >= len(table):
                            raise Trap(TrapKind.TableOutOfBounds)
                        fidx = table[i]
                        if fidx is None:
                            raise Trap(TrapKind.IndirectCallTypeMismatch)
                        callee = functions[fidx]
                        if callee.functype != a:
                            raise Trap(TrapKind.IndirectCallTypeMismatch)
                    n = callee.nparams if not callee.is_host else len(callee.functype.params)
                    if n:
                        call_args = stack[-n:]
                        del stack[-n:]
                    else:
                        call_args = []
                    if callee.is_host:
                        stack.extend(self._call_host(callee.host, call_args))
                    else:
                        if len(frames) >= self.call_depth_limit:
                            raise Trap(TrapKind.StackExhausted)
                        fr.ip = ip
                        frames.append(_Frame(callee, call_args))
                        break
                elif k == K_RETURN or k == K_END_FUNC:
                    returning = stack[-a:] if a else []
                    break
                else:  # pragma: no cover
                    raise HostError(f"corrupt compiled code: kind {k}")

            if returning is not None:
                frames.pop()
                if not frames:
                    return returning
                frames[-1].stack.extend(returning)

    # ------------------------------------------------------- debug checking

    def _debug_operands(self, meta, vals):
        name, ins, _outs = meta
        for t, v in zip(ins, vals):
            self._debug_value(name, t, v)

    def _debug_result(self, meta, v):
        name, _ins, outs = meta
        if outs:
            self._debug_value(name, outs[0], v)

    @staticmethod
    def _debug_value(name, t, v):
        if t in ("i32", "i64"):
            if type(v) is not int:
                raise RuntimeError(f"internal type confusion at {name}: {t} slot holds {v!r}")
            lim = 1 << (31 if t == "i32" else 63)
            if not (-lim <= v < lim):
                raise RuntimeError(f"internal range confusion at {name}: {t} = {v}")
        else:
            if type(v) is not float:
                raise RuntimeError(f"internal type confusion at {name}: {t} slot holds {v!r}")
            if t == "f32" and v == v and f32(v) != v:
                raise RuntimeError(f"internal precision confusion at {name}: f32 = {v!r}")
            if v != v and struct.pack("<d", v) != _F64_NAN_BYTES:
                raise RuntimeError(f"internal NaN confusion at {name}")


def instantiate(validated: ValidatedModule, imports: HostImportTable | None = None,
                limits: InstanceLimits | None = None) -> Instance:
    """Create a runnable Instance from a validated module."""
    return Instance(validated, imports or HostImportTable(),
                    limits or InstanceLimits())
