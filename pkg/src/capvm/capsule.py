"""Capsule lifecycle: deploy, route requests into, update, and terminate
ephemeral and persistent capsules under the device resource budgets.

Capsule ABI (all little-endian):
    exports (ephemeral):  alloc(i32 len) -> i32 ptr,  run(i32 ptr, i32 len) -> i64
    exports (persistent): alloc, init() -> i32, handle(i32 ptr, i32 len) -> i64
    i64 results pack (ptr << 32) | len of the response buffer.
    request buffer:  method u8 | path-len u16 | path bytes | payload
    response buffer: CoAP code u8 | payload

RAM estimate per capsule: linear memory + bytecode size + a fixed
per-instance overhead (bytecode counts against RAM because updates stage
the whole capsule in RAM).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from . import wasm
from .hostapi import HostEnv, build_import_table
from .wasm import InstanceLimits
from .wasm.errors import ExecOutcome, TrapKind

PREFIX_RE = re.compile(r"^[a-z0-9-]{1,32}$")
RESERVED_PREFIXES = frozenset({"vm-control", "well-known"})

DEFAULT_OVERHEAD = 4096
DEFAULT_EPHEMERAL_FUEL = 10_000_000
DEFAULT_REQUEST_FUEL = 1_000_000

METHOD_GET, METHOD_POST, METHOD_PUT, METHOD_DELETE = 1, 2, 3, 4


class CapsuleError(Exception):
    pass


class ValidationFailed(CapsuleError):
    def __init__(self, cause: Exception):
        self.cause = cause
        super().__init__(f"bytecode rejected: {cause}")


class MissingExport(CapsuleError):
    pass


class PrefixTaken(CapsuleError):
    pass


class PrefixInvalid(CapsuleError):
    pass


class CapsuleNotFound(CapsuleError):
    pass


class InitFailed(CapsuleError):
    pass


class BudgetExceeded(CapsuleError):
    def __init__(self, resource: str, needed: int, available: int):
        self.resource = resource
        self.needed = needed
        self.available = available
        super().__init__(f"{resource} budget exceeded: need {needed}, have {available}")


class Trapped(CapsuleError):
    def __init__(self, kind: TrapKind, fuel_consumed: int):
        self.kind = kind
        self.fuel_consumed = fuel_consumed
        super().__init__(f"capsule trapped: {kind.name}")


class OutOfFuel(CapsuleError):
    def __init__(self, fuel_consumed: int):
        self.fuel_consumed = fuel_consumed
        super().__init__(f"capsule exhausted its fuel budget of {fuel_consumed}")


class BadHandlerResult(CapsuleError):
    pass


def encode_request(method: int, path: str, payload: bytes) -> bytes:
    raw = path.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise ValueError("path too long")
    return bytes([method]) + len(raw).to_bytes(2, "little") + raw + payload


def decode_response(data: bytes) -> tuple[int, bytes]:
    if not data:
        raise BadHandlerResult("capsule returned an empty response buffer")
    return data[0], bytes(data[1:])


@dataclass
class ResourceBudget:
    flash_budget: int
    ram_budget: int
    flash_used: int = 0
    ram_used: int = 0


@dataclass
class Capsule:
    id: str
    kind: str  # "ephemeral" | "persistent"
    prefix: str | None
    bytecode_size: int
    version: int
    instance: wasm.Instance
    fuel_per_request: int
    state: str = "ready"  # "initializing" | "ready" | "terminated"
    charged_ram: int = 0  # bytes currently booked against the RAM budget


class CapsuleManager:
    """Owns every capsule on one device plus the accounting for them."""

    def __init__(self, env: HostEnv, ram_budget: int = 256 * 1024,
                 flash_budget: int = 1024 * 1024, page_size: int = 32768,
                 overhead: int = DEFAULT_OVERHEAD,
                 ephemeral_fuel: int = DEFAULT_EPHEMERAL_FUEL,
                 request_fuel: int = DEFAULT_REQUEST_FUEL,
                 call_depth_limit: int = wasm.DEFAULT_CALL_DEPTH):
        self.env = env
        self.imports = build_import_table(env)
        self.budget = ResourceBudget(flash_budget=flash_budget, ram_budget=ram_budget)
        self.page_size = page_size
        self.overhead = overhead
        self.ephemeral_fuel = ephemeral_fuel
        self.request_fuel = request_fuel
        self.call_depth_limit = call_depth_limit
        self.capsules: dict[str, Capsule] = {}  # prefix -> persistent capsule
        self._eph_counter = 0

    # ------------------------------------------------------------ accounting

    def estimate_ram(self, capsule: Capsule) -> int:
        return len(capsule.instance.memory) + capsule.bytecode_size + self.overhead

    def _predict_ram(self, bytecode: bytes, validated: wasm.ValidatedModule) -> int:
        pages = validated.module.memories[0].limits.min if validated.module.memories else 0
        return pages * self.page_size + len(bytecode) + self.overhead

    def recompute_ram_used(self) -> int:
        return sum(self.estimate_ram(c) for c in self.capsules.values()
                   if c.state == "ready")

    def _admit(self, ram_needed: int, flash_needed: int,
               releasing: Capsule | None = None) -> None:
        ram_used = self.budget.ram_used
        flash_used = self.budget.flash_used
        if releasing is not None:
            ram_used -= releasing.charged_ram
            flash_used -= releasing.bytecode_size
        if ram_used + ram_needed > self.budget.ram_budget:
            raise BudgetExceeded("ram", ram_needed, self.budget.ram_budget - ram_used)
        if flash_used + flash_needed > self.budget.flash_budget:
            raise BudgetExceeded("flash", flash_needed,
                                 self.budget.flash_budget - flash_used)

    def _charge(self, cap: Capsule) -> None:
        cap.charged_ram = self.estimate_ram(cap)
        self.budget.ram_used += cap.charged_ram
        cap.instance.grow_guard = self._make_grow_guard(cap)

    def _release(self, cap: Capsule) -> None:
        self.budget.ram_used -= cap.charged_ram
        cap.charged_ram = 0
        cap.instance.grow_guard = None
        cap.state = "terminated"

    def _make_grow_guard(self, cap: Capsule):
        def guard(delta_bytes: int) -> bool:
            if self.budget.ram_used + delta_bytes > self.budget.ram_budget:
                return False
            self.budget.ram_used += delta_bytes
            cap.charged_ram += delta_bytes
            return True
        return guard

    # -------------------------------------------------------------- loading

    def _load(self, bytecode: bytes) -> wasm.ValidatedModule:
        try:
            return wasm.load(bytecode)
        except wasm.WasmError as exc:
            raise ValidationFailed(exc) from exc

    def _require_exports(self, validated: wasm.ValidatedModule, names: list[str]):
        for name in names:
            exp = validated.module.exports.get(name)
            if exp is None or exp[0] != "func":
                raise MissingExport(f"capsule must export function {name!r}")

    def _instantiate(self, validated: wasm.ValidatedModule, init_fuel: int) -> wasm.Instance:
        limits = InstanceLimits(page_size_bytes=self.page_size,
                                call_depth_limit=self.call_depth_limit,
                                initial_fuel=init_fuel)
        try:
            return wasm.instantiate(validated, self.imports, limits)
        except wasm.InstantiationError as exc:
            raise ValidationFailed(exc) from exc

    def _feed_input(self, capsule: Capsule, data: bytes) -> tuple[int, int]:
        """alloc() a buffer in the capsule and copy data into it."""
        inst = capsule.instance
        outcome = self._invoke(capsule, "alloc", [len(data)])
        ptr = outcome.values[0].value & 0xFFFFFFFF
        if ptr + len(data) > len(inst.memory):
            raise Trapped(TrapKind.MemOutOfBounds, outcome.fuel_consumed)
        inst.mem_write(ptr, data)
        return ptr, len(data)

    def _invoke(self, capsule: Capsule, export: str, args,
                fuel: int | None = None) -> ExecOutcome:
        """Run a capsule export under a fresh per-call fuel budget; traps
        and fuel exhaustion become errors."""
        prev = self.env.current_capsule
        self.env.current_capsule = capsule.id
        try:
            outcome = capsule.instance.invoke(
                export, args, fuel=capsule.fuel_per_request if fuel is None else fuel)
        finally:
            self.env.current_capsule = prev
        if outcome.is_trap:
            raise Trapped(outcome.trap, outcome.fuel_consumed)
        if outcome.is_out_of_fuel:
            raise OutOfFuel(outcome.fuel_consumed)
        return outcome

    def _read_packed_result(self, capsule: Capsule, outcome: ExecOutcome) -> bytes:
        packed = outcome.values[0].value & 0xFFFFFFFFFFFFFFFF
        ptr = packed >> 32
        length = packed & 0xFFFFFFFF
        inst = capsule.instance
        if ptr + length > len(inst.memory):
            raise Trapped(TrapKind.MemOutOfBounds, outcome.fuel_consumed)
        return inst.mem_read(ptr, length)

    # ------------------------------------------------------------- ephemeral

    def run_ephemeral(self, bytecode: bytes, input_data: bytes,
                      fuel: int | None = None) -> bytes:
        """Instantiate, feed input, run to completion, release."""
        validated = self._load(bytecode)
        self._require_exports(validated, ["alloc", "run"])
        budget = fuel if fuel is not None else self.ephemeral_fuel
        self._admit(self._predict_ram(bytecode, validated), 0)
        self._eph_counter += 1
        cap = Capsule(id=f"eph-{self._eph_counter}", kind="ephemeral", prefix=None,
                      bytecode_size=len(bytecode), version=1,
                      instance=self._instantiate(validated, budget),
                      fuel_per_request=budget)
        self._charge(cap)
        try:
            ptr, length = self._feed_input(cap, input_data)
            outcome = self._invoke(cap, "run", [ptr, length], fuel=budget)
            return self._read_packed_result(cap, outcome)
        finally:
            self._release(cap)

    # ------------------------------------------------------------ persistent

    def deploy_persistent(self, bytecode: bytes, prefix: str) -> Capsule:
        if not PREFIX_RE.match(prefix or ""):
            raise PrefixInvalid(f"prefix {prefix!r} must match {PREFIX_RE.pattern}")
        if prefix in RESERVED_PREFIXES:
            raise PrefixInvalid(f"prefix {prefix!r} is reserved")
        if prefix in self.capsules:
            raise PrefixTaken(f"prefix {prefix!r} already serves capsule "
                              f"v{self.capsules[prefix].version}")
        cap = self._build_persistent(bytecode, prefix, version=1, releasing=None)
        self.capsules[prefix] = cap
        self.budget.flash_used += cap.bytecode_size
        return cap

    def _build_persistent(self, bytecode: bytes, prefix: str, version: int,
                          releasing: Capsule | None) -> Capsule:
        """Load, admit, instantiate, charge, and init one persistent capsule.

        On failure, everything this call charged is released again; the
        caller's previous capsule (if any) is untouched.
        """
        validated = self._load(bytecode)
        self._require_exports(validated, ["alloc", "init", "handle"])
        self._admit(self._predict_ram(bytecode, validated), len(bytecode), releasing)
        cap = Capsule(id=prefix, kind="persistent", prefix=prefix,
                      bytecode_size=len(bytecode), version=version,
                      instance=self._instantiate(validated, self.request_fuel),
                      fuel_per_request=self.request_fuel, state="initializing")
        self._charge(cap)
        try:
            outcome = self._invoke(cap, "init", [])
            if outcome.values[0].value != 0:
                raise InitFailed(f"init returned {outcome.values[0].value}")
        except (Trapped, OutOfFuel) as exc:
            self._release(cap)
            raise InitFailed(f"init failed: {exc}") from exc
        except Exception:
            self._release(cap)
            raise
        cap.state = "ready"
        return cap

    def update_capsule(self, prefix: str, new_bytecode: bytes) -> Capsule:
        """Atomic swap: on any failure the previous version keeps serving."""
        old = self.capsules.get(prefix)
        if old is None:
            raise CapsuleNotFound(f"no capsule at prefix {prefix!r}")
        cap = self._build_persistent(new_bytecode, prefix,
                                     version=old.version + 1, releasing=old)
        self._release(old)
        self.budget.flash_used += cap.bytecode_size - old.bytecode_size
        self.capsules[prefix] = cap
        return cap

    def terminate(self, prefix: str) -> None:
        cap = self.capsules.pop(prefix, None)
        if cap is None:
            raise CapsuleNotFound(f"no capsule at prefix {prefix!r}")
        self._release(cap)
        self.budget.flash_used -= cap.bytecode_size

    def handle_request(self, prefix: str, method: int, sub_path: str,
                       payload: bytes) -> tuple[int, bytes]:
        """Route one request into the capsule; returns (CoAP code, payload).

        A trap or fuel exhaustion raises but leaves the capsule ready for
        the next request.
        """
        cap = self.capsules.get(prefix)
        if cap is None or cap.state != "ready":
            raise CapsuleNotFound(f"no capsule at prefix {prefix!r}")
        req = encode_request(method, sub_path, payload)
        ptr, length = self._feed_input(cap, req)
        outcome = self._invoke(cap, "handle", [ptr, length],
                               fuel=cap.fuel_per_request)
        return decode_response(self._read_packed_result(cap, outcome))

    # ---------------------------------------------------------------- query

    def get(self, prefix: str) -> Capsule | None:
        return self.capsules.get(prefix)

    def list_capsules(self) -> list[dict]:
        return [{"id": c.id, "prefix": c.prefix, "version": c.version,
                 "kind": c.kind, "ram_estimate": self.estimate_ram(c)}
                for c in self.capsules.values()]
