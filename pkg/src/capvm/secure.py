"""Authenticated envelope, anti-replay window, and gatekeeper stamps.

MAC: HMAC-SHA256 truncated to 128 bits (16 bytes). Golden vectors live in
docs/wire-formats.md and tests/test_secure.py. Integrity and authenticity
only; payloads travel in the clear (encryption is a pluggable concern).

Envelope wire layout (little-endian):
    magic "TV" (2) | sender-id u32 | seq u64 | body | tag (16)
    tag = MAC(key, sender-id || seq || body)

Stamp package layout:
    len u32 | wasm bytes | tag (16),  tag = MAC(gatekeeper-key, wasm bytes)
"""

from __future__ import annotations

import hmac
import hashlib
import struct

from . import wasm as wasm_mod

MAGIC = b"TV"
TAG_LEN = 16
_HEADER_LEN = 2 + 4 + 8
WINDOW_SIZE = 64


class SecureError(Exception):
    pass


class BadMagic(SecureError):
    pass


class BadTag(SecureError):
    pass


class Replayed(SecureError):
    pass


class Truncated(SecureError):
    pass


class BadStamp(SecureError):
    pass


class GateRefused(SecureError):
    """The gatekeeper refused to stamp invalid bytecode."""

    def __init__(self, reason: Exception):
        self.reason = reason
        super().__init__(f"refusing to stamp: {reason}")


def mac(key: bytes, data: bytes) -> bytes:
    return hmac.new(key, data, hashlib.sha256).digest()[:TAG_LEN]


class ReplayWindow:
    """Sliding 64-entry acceptance window; each seq accepted at most once."""

    def __init__(self):
        self.highest = 0
        self.bitmap = 0  # bit i set => seq (highest - i) was accepted

    def seen(self, seq: int) -> bool:
        if seq > self.highest:
            return False
        offset = self.highest - seq
        if offset >= WINDOW_SIZE:
            return True  # too old to track: treat as replayed
        return bool(self.bitmap >> offset & 1)

    def mark(self, seq: int) -> None:
        if seq > self.highest:
            shift = seq - self.highest
            self.bitmap = ((self.bitmap << shift) | 1) & ((1 << WINDOW_SIZE) - 1)
            self.highest = seq
        else:
            self.bitmap |= 1 << (self.highest - seq)


def seal(key: bytes, sender_id: int, seq: int, body: bytes) -> bytes:
    """Wrap an encoded CoAP message in an authenticated envelope."""
    head = struct.pack("<IQ", sender_id & 0xFFFFFFFF, seq)
    return MAGIC + head + body + mac(key, head + body)


def peek_sender(envelope: bytes) -> int:
    """Sender id from the (unverified) header, for replay-window routing."""
    if len(envelope) < _HEADER_LEN:
        raise Truncated(f"envelope of {len(envelope)} bytes")
    if envelope[:2] != MAGIC:
        raise BadMagic(f"magic {envelope[:2]!r}")
    return struct.unpack_from("<I", envelope, 2)[0]


def open_envelope(key: bytes, window: ReplayWindow, envelope: bytes) -> tuple[int, int, bytes]:
    """Verify magic, tag, and freshness; returns (sender-id, seq, body).

    The window is only advanced after the tag verifies, so forgeries cannot
    consume sequence numbers.
    """
    if len(envelope) < _HEADER_LEN + TAG_LEN:
        raise Truncated(f"envelope of {len(envelope)} bytes")
    if envelope[:2] != MAGIC:
        raise BadMagic(f"magic {envelope[:2]!r}")
    sender_id, seq = struct.unpack_from("<IQ", envelope, 2)
    body = envelope[_HEADER_LEN:-TAG_LEN]
    tag = envelope[-TAG_LEN:]
    if not hmac.compare_digest(tag, mac(key, envelope[2:-TAG_LEN])):
        raise BadTag("envelope tag verification failed")
    if window.seen(seq):
        raise Replayed(f"sender {sender_id} seq {seq}")
    window.mark(seq)
    return sender_id, seq, bytes(body)


# ------------------------------------------------------------- gatekeeper

def gate_stamp(gatekeeper_key: bytes, wasm_bytes: bytes) -> bytes:
    """Validate bytecode, then stamp it for deployment.

    The gatekeeper is the only authority allowed to produce deployable
    packages; it refuses anything that does not parse and validate.
    """
    try:
        wasm_mod.load(wasm_bytes)
    except wasm_mod.WasmError as exc:
        raise GateRefused(exc) from exc
    return struct.pack("<I", len(wasm_bytes)) + wasm_bytes + \
        mac(gatekeeper_key, wasm_bytes)


def stamped_length(package: bytes) -> int:
    """Total byte length of the stamp package at the head of `package`."""
    if len(package) < 4:
        raise BadStamp("package shorter than its length field")
    (n,) = struct.unpack_from("<I", package, 0)
    total = 4 + n + TAG_LEN
    if len(package) < total:
        raise BadStamp(f"package of {len(package)} bytes, header claims {total}")
    return total


def verify_stamp(gatekeeper_key: bytes, package: bytes) -> bytes:
    """Return the wasm bytes iff the stamp tag verifies."""
    total = stamped_length(package)
    if len(package) != total:
        raise BadStamp(f"trailing {len(package) - total} bytes after stamp")
    body = package[4:total - TAG_LEN]
    tag = package[total - TAG_LEN:total]
    if not hmac.compare_digest(tag, mac(gatekeeper_key, body)):
        raise BadStamp("stamp tag verification failed")
    return bytes(body)
