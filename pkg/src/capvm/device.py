"""The virtual device: unwraps envelopes, decodes CoAP, routes control and
capsule paths, and produces exactly one response per request.

Transport-agnostic core (process_datagram) plus a UDP serve loop and a
multi-device fleet runner. Response code mapping:

    envelope BadTag/Replayed/короткое -> 4.01   CoAP decode error -> 4.00
    unknown path -> 4.04                        capsule trap/fuel  -> 5.00
    bad stamp -> 4.01                           budget exceeded    -> 4.13
"""

from __future__ import annotations

import json
import socket
import threading
from dataclasses import dataclass, field

from . import capsule as capsule_mod
from . import coap, secure
from .capsule import CapsuleManager
from .hostapi import HostEnv, sensors_from_config

RESERVED_PREFIXES = capsule_mod.RESERVED_PREFIXES
CONTROL_PREFIX = "vm-control"

_METHOD_BY_CODE = {coap.GET: capsule_mod.METHOD_GET, coap.POST: capsule_mod.METHOD_POST,
                   coap.PUT: capsule_mod.METHOD_PUT, coap.DELETE: capsule_mod.METHOD_DELETE}


class ConfigError(Exception):
    pass


@dataclass
class DeviceConfig:
    device_id: str = "dev"
    sender_id: int = 1
    listen: str = "127.0.0.1:5683"
    psk: bytes = b"\x00" * 16
    gatekeeper_key: bytes = b"\x01" * 16
    ram_budget: int = 256 * 1024
    flash_budget: int = 1024 * 1024
    rng_seed: int = 0
    page_size_bytes: int = 32768
    fuel_ephemeral: int = capsule_mod.DEFAULT_EPHEMERAL_FUEL
    fuel_request: int = capsule_mod.DEFAULT_REQUEST_FUEL
    instance_overhead: int = capsule_mod.DEFAULT_OVERHEAD
    log_capacity: int = 64
    measurement_latency_ms: int = 5
    sensors: list = field(default_factory=list)
    preload: list = field(default_factory=list)  # [{"prefix": ..., "package": path}]

    def validate(self) -> None:
        if self.ram_budget <= 0 or self.flash_budget <= 0:
            raise ConfigError("budgets must be positive")
        ps = self.page_size_bytes
        if ps < 256 or ps > 65536 or ps & (ps - 1):
            raise ConfigError(f"page_size_bytes {ps} must be a power of two in [256, 65536]")
        if len(self.psk) != 16 or len(self.gatekeeper_key) != 16:
            raise ConfigError("psk and gatekeeper_key must be 16 bytes")

    @staticmethod
    def from_dict(d: dict) -> "DeviceConfig":
        cfg = DeviceConfig()
        plain = {"device_id", "sender_id", "listen", "ram_budget", "flash_budget",
                 "rng_seed", "page_size_bytes", "fuel_ephemeral", "fuel_request",
                 "instance_overhead", "log_capacity", "measurement_latency_ms",
                 "sensors", "preload"}
        for key, value in d.items():
            if key in plain:
                setattr(cfg, key, value)
            elif key == "psk_hex":
                cfg.psk = bytes.fromhex(value)
            elif key == "gatekeeper_key_hex":
                cfg.gatekeeper_key = bytes.fromhex(value)
            else:
                raise ConfigError(f"unknown config key {key!r}")
        cfg.validate()
        return cfg

    @staticmethod
    def from_file(path: str) -> "DeviceConfig":
        try:
            with open(path) as fh:
                return DeviceConfig.from_dict(json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot load config {path}: {exc}") from exc


@dataclass(frozen=True)
class RouteTarget:
    kind: str  # "control" | "capsule" | "not_found"
    prefix: str = ""
    sub_path: str = ""


def route(segments: list[str], prefixes) -> RouteTarget:
    """First segment selects the target; the rest is the capsule sub-path."""
    if not segments:
        return RouteTarget("not_found")
    head = segments[0]
    if head == CONTROL_PREFIX:
        return RouteTarget("control", head, "/".join(segments[1:]))
    if head in prefixes:
        return RouteTarget("capsule", head, "/".join(segments[1:]))
    return RouteTarget("not_found")


class Device:
    """One virtual device; single logical request loop."""

    def __init__(self, config: DeviceConfig, preload_packages=()):
        config.validate()
        self.config = config
        self.env = HostEnv(rng_seed=config.rng_seed,
                           sensors=sensors_from_config(config.sensors),
                           measurement_latency_ms=config.measurement_latency_ms,
                           log_capacity=config.log_capacity)
        self.manager = CapsuleManager(
            self.env, ram_budget=config.ram_budget, flash_budget=config.flash_budget,
            page_size=config.page_size_bytes, overhead=config.instance_overhead,
            ephemeral_fuel=config.fuel_ephemeral, request_fuel=config.fuel_request)
        self.windows: dict[int, secure.ReplayWindow] = {}
        self._seq = 0
        self._mid = 0
        for prefix, package in preload_packages:
            bytecode = secure.verify_stamp(config.gatekeeper_key, package)
            self.manager.deploy_persistent(bytecode, prefix)

    # ------------------------------------------------------------ transport

    def _next_seq(self) -> int:
        self._seq += 1
        return self._seq

    def _next_mid(self) -> int:
        self._mid = (self._mid + 1) & 0xFFFF
        return self._mid

    def process_datagram(self, datagram: bytes) -> bytes | None:
        """Full pipeline for one datagram; always returns one sealed response
        (None only for datagrams too mangled to answer meaningfully)."""
        try:
            sender = secure.peek_sender(datagram)
            window = self.windows.setdefault(sender, secure.ReplayWindow())
            _, _, body = secure.open_envelope(self.config.psk, window, datagram)
        except secure.SecureError:
            reply = coap.CoapMessage(coap.NON, coap.UNAUTHORIZED, self._next_mid())
            return self._seal(coap.encode(reply))
        try:
            msg = coap.decode(body)
        except coap.CoapError:
            reply = coap.CoapMessage(coap.NON, coap.BAD_REQUEST, self._next_mid())
            return self._seal(coap.encode(reply))
        response = self.handle_coap(msg)
        return self._seal(coap.encode(response))

    def _seal(self, body: bytes) -> bytes:
        return secure.seal(self.config.psk, self.config.sender_id,
                           self._next_seq(), body)

    # -------------------------------------------------------------- requests

    def handle_coap(self, msg: coap.CoapMessage) -> coap.CoapMessage:
        try:
            segments = coap.uri_path(msg)
        except coap.CoapError:
            return coap.response_for(msg, coap.BAD_REQUEST, next_mid=self._next_mid)
        target = route(segments, self.manager.capsules)
        if target.kind == "control":
            rcode, payload = self.handle_vm_control(msg, target.sub_path)
        elif target.kind == "capsule":
            rcode, payload = self._handle_capsule(msg, target)
        else:
            rcode, payload = coap.NOT_FOUND, b""
        return coap.response_for(msg, rcode, payload, next_mid=self._next_mid)

    def _handle_capsule(self, msg: coap.CoapMessage,
                        target: RouteTarget) -> tuple[int, bytes]:
        method = _METHOD_BY_CODE.get(msg.code)
        if method is None:
            return coap.METHOD_NOT_ALLOWED, b""
        try:
            return self.manager.handle_request(target.prefix, method,
                                               target.sub_path, msg.payload)
        except capsule_mod.CapsuleNotFound:
            return coap.NOT_FOUND, b""
        except (capsule_mod.Trapped, capsule_mod.OutOfFuel,
                capsule_mod.BadHandlerResult) as exc:
            return coap.INTERNAL_ERROR, type(exc).__name__.encode()

    def handle_vm_control(self, msg: coap.CoapMessage,
                          sub_path: str) -> tuple[int, bytes]:
        """Control verbs:
            GET  /vm-control              list capsules (JSON)
            POST /vm-control/run          run ephemeral: stamped package || input
            PUT  /vm-control/<prefix>     deploy (2.01) or update (2.04)
            DELETE /vm-control/<prefix>   terminate (2.02)
        """
        if msg.code == coap.GET and not sub_path:
            listing = json.dumps(self.manager.list_capsules()).encode()
            return coap.CONTENT, listing

        if msg.code == coap.POST and sub_path == "run":
            try:
                package_len = secure.stamped_length(msg.payload)
                bytecode = secure.verify_stamp(self.config.gatekeeper_key,
                                               msg.payload[:package_len])
            except secure.BadStamp:
                return coap.UNAUTHORIZED, b"BadStamp"
            input_data = msg.payload[package_len:]
            try:
                output = self.manager.run_ephemeral(bytecode, input_data)
            except capsule_mod.BudgetExceeded:
                return coap.REQUEST_TOO_LARGE, b"BudgetExceeded"
            except capsule_mod.ValidationFailed:
                return coap.BAD_REQUEST, b"ValidationFailed"
            except capsule_mod.MissingExport as exc:
                return coap.BAD_REQUEST, str(exc).encode()
            except (capsule_mod.Trapped, capsule_mod.OutOfFuel) as exc:
                return coap.INTERNAL_ERROR, type(exc).__name__.encode()
            return coap.CONTENT, output

        if msg.code in (coap.PUT, coap.DELETE):
            prefix = sub_path
            if not prefix or "/" in prefix:
                return coap.BAD_REQUEST, b"missing or nested capsule prefix"
            if msg.code == coap.DELETE:
                try:
                    self.manager.terminate(prefix)
                except capsule_mod.CapsuleNotFound:
                    return coap.NOT_FOUND, b""
                return coap.DELETED, b""
            try:
                bytecode = secure.verify_stamp(self.config.gatekeeper_key, msg.payload)
            except secure.BadStamp:
                return coap.UNAUTHORIZED, b"BadStamp"
            fresh = prefix not in self.manager.capsules
            try:
                if fresh:
                    cap = self.manager.deploy_persistent(bytecode, prefix)
                else:
                    cap = self.manager.update_capsule(prefix, bytecode)
            except capsule_mod.BudgetExceeded:
                return coap.REQUEST_TOO_LARGE, b"BudgetExceeded"
            except (capsule_mod.ValidationFailed, capsule_mod.MissingExport,
                    capsule_mod.PrefixInvalid) as exc:
                return coap.BAD_REQUEST, type(exc).__name__.encode()
            except capsule_mod.InitFailed:
                return coap.INTERNAL_ERROR, b"InitFailed"
            code = coap.CREATED if fresh else coap.CHANGED
            return code, json.dumps({"prefix": prefix, "version": cap.version}).encode()

        return coap.METHOD_NOT_ALLOWED, b""

    # --------------------------------------------------------------- serving

    def serve_udp(self, stop_event: threading.Event | None = None) -> None:
        """Blocking datagram loop on the configured listen address."""
        host, port = self.config.listen.rsplit(":", 1)
        sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        try:
            sock.bind((host, int(port)))
        except OSError as exc:
            sock.close()
            raise BindError(f"cannot bind {self.config.listen}: {exc}") from exc
        sock.settimeout(0.25)
        try:
            while stop_event is None or not stop_event.is_set():
                try:
                    data, addr = sock.recvfrom(65536 * 2)
                except socket.timeout:
                    continue
                reply = self.process_datagram(data)
                if reply is not None:
                    sock.sendto(reply, addr)
        finally:
            sock.close()


class BindError(Exception):
    pass


class LoopbackTransport:
    """In-process transport: a client-side send() straight into one device."""

    def __init__(self, device: Device):
        self.device = device

    def send(self, datagram: bytes, timeout: float = 0.0) -> bytes | None:
        return self.device.process_datagram(datagram)


class UdpTransport:
    """Datagram client with receive timeout, used by the CLI."""

    def __init__(self, target: str):
        host, port = target.rsplit(":", 1)
        self.addr = (host, int(port))
        self.sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)

    def send(self, datagram: bytes, timeout: float = 2.0) -> bytes | None:
        self.sock.settimeout(timeout)
        self.sock.sendto(datagram, self.addr)
        try:
            data, _ = self.sock.recvfrom(65536 * 2)
            return data
        except socket.timeout:
            return None

    def close(self) -> None:
        self.sock.close()


class Fleet:
    """Host several devices concurrently; no state is shared between them."""

    def __init__(self, configs: list[DeviceConfig], preloads=None):
        preloads = preloads or {}
        self.devices = [Device(cfg, preloads.get(cfg.device_id, ()))
                        for cfg in configs]
        self._stop = threading.Event()
        self._threads: list[threading.Thread] = []

    def start(self) -> None:
        for dev in self.devices:
            t = threading.Thread(target=dev.serve_udp, args=(self._stop,),
                                 name=f"device-{dev.config.device_id}", daemon=True)
            t.start()
            self._threads.append(t)

    def stop(self) -> None:
        self._stop.set()
        for t in self._threads:
            t.join(timeout=2.0)
