"""Host-side import namespace exposed to capsules, backed by deterministic
simulations: a PCG32 random stream, an event-driven clock, a log ring
buffer, and waveform-scripted sensors.

All bindings live under import module "host". A capsule only gets the
bindings it declares; everything else fails at link time.

Sensor reading record written into capsule memory (16 bytes, little-endian):
    label u32 | value f64 | reserved u32 (zero)
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field

from .wasm import HostFunc, HostImportTable, HostMemOutOfBounds, Instance
from .wasm.errors import Trap, TrapKind

READING_RECORD_LEN = 16

# wait_for_reading result codes.
READ_OK = 0
READ_NO_MATCHING_SENSOR = 1
READ_NOTHING_PENDING = 2

TRIGGER_OK = 0
TRIGGER_NO_SENSORS = 1

NO_FILTER = -1


class SensorLabel(enum.IntEnum):
    """Stable numeric encoding; part of the capsule ABI."""

    Temperature = 0
    Humidity = 1
    Accel = 2
    Light = 3


@dataclass(frozen=True)
class SensorReading:
    label: SensorLabel
    value: float
    timestamp_ms: int


class Pcg32:
    """PCG-XSH-RR 32-bit generator (O'Neill's pcg32), 64-bit state."""

    MULT = 6364136223846793005
    MASK64 = (1 << 64) - 1

    def __init__(self, seed: int, seq: int = 54):
        self.state = 0
        self.inc = ((seq << 1) | 1) & self.MASK64
        self._step()
        self.state = (self.state + seed) & self.MASK64
        self._step()

    def _step(self) -> None:
        self.state = (self.state * self.MULT + self.inc) & self.MASK64

    def next_u32(self) -> int:
        old = self.state
        self._step()
        xorshifted = ((old >> 18) ^ old) >> 27 & 0xFFFFFFFF
        rot = old >> 59
        return ((xorshifted >> rot) | (xorshifted << (32 - rot & 31))) & 0xFFFFFFFF


class DeviceClock:
    """Simulated milliseconds since boot; advances only on explicit events."""

    def __init__(self):
        self.now_ms = 0

    def advance(self, ms: int) -> None:
        if ms < 0:
            raise ValueError("clock cannot go backwards")
        self.now_ms += ms

    sleep_ms = advance

    def advance_to(self, t_ms: int) -> None:
        if t_ms > self.now_ms:
            self.now_ms = t_ms


class LogBuffer:
    """Bounded ring of (capsule-id, text) entries."""

    def __init__(self, capacity: int = 64):
        self.entries: deque[tuple[str, str]] = deque(maxlen=capacity)

    def append(self, capsule_id: str, text: str) -> None:
        self.entries.append((capsule_id, text))

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)


@dataclass(frozen=True)
class Waveform:
    """Deterministic per-sensor value source.

    kind "constant": value; kind "ramp": start + step * index;
    kind "scripted": values[index], holding the last value.
    """

    kind: str
    value: float = 0.0
    start: float = 0.0
    step: float = 0.0
    values: tuple[float, ...] = ()

    def sample(self, index: int) -> float:
        if self.kind == "constant":
            return self.value
        if self.kind == "ramp":
            return self.start + self.step * index
        if self.kind == "scripted":
            if not self.values:
                return 0.0
            return self.values[min(index, len(self.values) - 1)]
        raise ValueError(f"unknown waveform kind {self.kind!r}")

    @staticmethod
    def from_config(cfg: dict) -> "Waveform":
        kind = cfg.get("kind", "constant")
        return Waveform(kind=kind, value=float(cfg.get("value", 0.0)),
                        start=float(cfg.get("start", 0.0)),
                        step=float(cfg.get("step", 0.0)),
                        values=tuple(float(v) for v in cfg.get("values", ())))


@dataclass
class SensorSim:
    label: SensorLabel
    waveform: Waveform
    index: int = 0  # completed measurement cycles

    def produce(self, timestamp_ms: int) -> SensorReading:
        reading = SensorReading(self.label, self.waveform.sample(self.index),
                                timestamp_ms)
        self.index += 1
        return reading


class HostEnv:
    """Per-device host state shared by every capsule on the device."""

    def __init__(self, rng_seed: int = 0, sensors: list[SensorSim] | None = None,
                 measurement_latency_ms: int = 5, log_capacity: int = 64):
        self.rng = Pcg32(rng_seed)
        self.clock = DeviceClock()
        self.sensors = list(sensors or [])
        self.latency_ms = measurement_latency_ms
        self.log = LogBuffer(log_capacity)
        self.current_capsule = "host"
        self._pending_since: int | None = None

    # -------------------------------------------------------- binding impls

    def rng_u32(self, inst: Instance) -> int:
        v = self.rng.next_u32()
        return v - (1 << 32) if v >= (1 << 31) else v

    def time_now_ms(self, inst: Instance) -> int:
        return self.clock.now_ms

    def log_text(self, inst: Instance, ptr: int, length: int) -> None:
        data = _read_mem(inst, ptr, length)
        self.log.append(self.current_capsule, data.decode("utf-8", errors="replace"))

    def trigger_measurements(self, inst: Instance) -> int:
        if not self.sensors:
            return TRIGGER_NO_SENSORS
        self._pending_since = self.clock.now_ms  # re-trigger restarts latency
        return TRIGGER_OK

    def wait_for_reading(self, inst: Instance, label_filter: int, out_ptr: int) -> int:
        if self._pending_since is None:
            return READ_NOTHING_PENDING
        ready_at = self._pending_since + self.latency_ms
        self._pending_since = None
        self.clock.advance_to(ready_at)
        readings = [s.produce(self.clock.now_ms) for s in self.sensors]
        if label_filter != NO_FILTER:
            readings = [r for r in readings if int(r.label) == label_filter]
        if not readings:
            return READ_NO_MATCHING_SENSOR
        first = readings[0]
        record = (int(first.label).to_bytes(4, "little")
                  + _pack_f64(first.value)
                  + b"\x00\x00\x00\x00")
        _write_mem(inst, out_ptr, record)
        return READ_OK


def _read_mem(inst: Instance, ptr: int, length: int) -> bytes:
    try:
        return inst.mem_read(ptr & 0xFFFFFFFF, length & 0xFFFFFFFF)
    except HostMemOutOfBounds:
        raise Trap(TrapKind.MemOutOfBounds) from None


def _write_mem(inst: Instance, ptr: int, data: bytes) -> None:
    try:
        inst.mem_write(ptr & 0xFFFFFFFF, data)
    except HostMemOutOfBounds:
        raise Trap(TrapKind.MemOutOfBounds) from None


def _pack_f64(x: float) -> bytes:
    import struct
    return struct.pack("<d", x)


def build_import_table(env: HostEnv) -> HostImportTable:
    """The full "host" namespace; capsules link only what they declare."""
    table = HostImportTable()
    table.add("host", "rng_u32", HostFunc((), ("i32",), env.rng_u32))
    table.add("host", "time_now_ms", HostFunc((), ("i64",), env.time_now_ms))
    table.add("host", "log", HostFunc(("i32", "i32"), (), env.log_text))
    table.add("host", "trigger_measurements",
              HostFunc((), ("i32",), env.trigger_measurements))
    table.add("host", "wait_for_reading",
              HostFunc(("i32", "i32"), ("i32",), env.wait_for_reading))
    return table


def sensors_from_config(cfg_list: list[dict]) -> list[SensorSim]:
    sensors = []
    for entry in cfg_list:
        label = entry["label"]
        if isinstance(label, str):
            label = SensorLabel[label.capitalize()]
        else:
            label = SensorLabel(label)
        sensors.append(SensorSim(label, Waveform.from_config(entry.get("waveform", {}))))
    return sensors
