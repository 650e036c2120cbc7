"""Bit-exact encoder/decoder for the CoAP subset used on the wire.

Supported: the 4-byte header, tokens up to 8 bytes, delta-encoded options
with extended nibbles 13/14, and the 0xFF payload marker. No observe and
no block-wise transfer: capsules must fit one datagram.
"""

from __future__ import annotations

from dataclasses import dataclass, field

# Message types.
CON, NON, ACK, RST = 0, 1, 2, 3

# Method codes (class 0).
EMPTY, GET, POST, PUT, DELETE = 0x00, 0x01, 0x02, 0x03, 0x04


def code(clazz: int, detail: int) -> int:
    return (clazz << 5) | detail


# Response codes used by the platform.
CREATED = code(2, 1)
DELETED = code(2, 2)
CHANGED = code(2, 4)
CONTENT = code(2, 5)
BAD_REQUEST = code(4, 0)
UNAUTHORIZED = code(4, 1)
NOT_FOUND = code(4, 4)
METHOD_NOT_ALLOWED = code(4, 5)
REQUEST_TOO_LARGE = code(4, 13)
INTERNAL_ERROR = code(5, 0)

OPT_URI_PATH = 11
OPT_CONTENT_FORMAT = 12


def code_str(c: int) -> str:
    return f"{c >> 5}.{c & 0x1F:02d}"


def is_success(c: int) -> bool:
    return (c >> 5) == 2


class CoapError(Exception):
    pass


class OptionOutOfOrder(CoapError):
    pass


class TokenTooLong(CoapError):
    pass


class Truncated(CoapError):
    pass


class BadVersion(CoapError):
    pass


class ReservedOptionNibble(CoapError):
    pass


class StrayPayloadMarker(CoapError):
    pass


class NonUtf8Segment(CoapError):
    pass


@dataclass
class CoapMessage:
    """One message; version is always 1, options sorted by number."""

    mtype: int = CON
    code: int = GET
    message_id: int = 0
    token: bytes = b""
    options: list[tuple[int, bytes]] = field(default_factory=list)
    payload: bytes = b""

    def add_option(self, number: int, value: bytes) -> None:
        """Insert keeping options sorted; equal numbers keep insertion order."""
        at = len(self.options)
        for i, (num, _) in enumerate(self.options):
            if num > number:
                at = i
                break
        self.options.insert(at, (number, bytes(value)))

    def option_values(self, number: int) -> list[bytes]:
        return [v for n, v in self.options if n == number]


def _ext_nibble(value: int) -> tuple[int, bytes]:
    if value < 0:
        raise CoapError(f"negative option field {value}")
    if value < 13:
        return value, b""
    if value < 269:
        return 13, bytes([value - 13])
    if value < 65805:
        return 14, (value - 269).to_bytes(2, "big")
    raise CoapError(f"option delta/length {value} too large")


def encode(msg: CoapMessage) -> bytes:
    """Serialize; options must already be sorted by number."""
    if not 0 <= msg.mtype <= 3:
        raise CoapError(f"bad message type {msg.mtype}")
    if not 0 <= msg.code <= 0xFF:
        raise CoapError(f"bad code {msg.code}")
    if not 0 <= msg.message_id <= 0xFFFF:
        raise CoapError(f"bad message id {msg.message_id}")
    if len(msg.token) > 8:
        raise TokenTooLong(f"token of {len(msg.token)} bytes")
    out = bytearray()
    out.append(0x40 | (msg.mtype << 4) | len(msg.token))
    out.append(msg.code)
    out += msg.message_id.to_bytes(2, "big")
    out += msg.token
    prev = 0
    for number, value in msg.options:
        if number < prev:
            raise OptionOutOfOrder(f"option {number} after {prev}")
        dn, dx = _ext_nibble(number - prev)
        ln, lx = _ext_nibble(len(value))
        out.append((dn << 4) | ln)
        out += dx
        out += lx
        out += value
        prev = number
    if msg.payload:
        out.append(0xFF)
        out += msg.payload
    return bytes(out)


class _Cursor:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise Truncated(f"need {n} bytes at offset {self.pos}")
        b = self.data[self.pos:self.pos + n]
        self.pos += n
        return b

    def u8(self) -> int:
        return self.take(1)[0]

    def done(self) -> bool:
        return self.pos >= len(self.data)


def _ext_value(nibble: int, cur: _Cursor, what: str) -> int:
    if nibble < 13:
        return nibble
    if nibble == 13:
        return 13 + cur.u8()
    if nibble == 14:
        return 269 + int.from_bytes(cur.take(2), "big")
    raise ReservedOptionNibble(f"{what} nibble 15")


def decode(data: bytes) -> CoapMessage:
    """Parse a datagram; exact inverse of encode on valid inputs."""
    if len(data) < 4:
        raise Truncated(f"message of {len(data)} bytes")
    cur = _Cursor(data)
    b0 = cur.u8()
    if (b0 >> 6) != 1:
        raise BadVersion(f"version {b0 >> 6}")
    mtype = (b0 >> 4) & 0x3
    tkl = b0 & 0x0F
    if tkl > 8:
        raise TokenTooLong(f"token length {tkl}")
    mcode = cur.u8()
    mid = int.from_bytes(cur.take(2), "big")
    token = cur.take(tkl)

    options: list[tuple[int, bytes]] = []
    payload = b""
    number = 0
    while not cur.done():
        b = cur.u8()
        if b == 0xFF:
            payload = bytes(cur.data[cur.pos:])
            cur.pos = len(cur.data)
            if not payload:
                raise StrayPayloadMarker("0xFF marker with empty payload")
            break
        delta = _ext_value(b >> 4, cur, "option delta")
        length = _ext_value(b & 0x0F, cur, "option length")
        number += delta
        options.append((number, bytes(cur.take(length))))
    return CoapMessage(mtype, mcode, mid, bytes(token), options, payload)


def uri_path(msg: CoapMessage) -> list[str]:
    """Uri-Path option values as text segments."""
    segments = []
    for raw in msg.option_values(OPT_URI_PATH):
        try:
            segments.append(raw.decode("utf-8"))
        except UnicodeDecodeError as exc:
            raise NonUtf8Segment(f"Uri-Path segment {raw!r}") from exc
    return segments


def set_uri_path(msg: CoapMessage, segments: list[str]) -> None:
    """Replace every Uri-Path option with the given segments."""
    for seg in segments:
        if "/" in seg:
            raise CoapError(f"segment {seg!r} contains '/'")
    msg.options = [(n, v) for n, v in msg.options if n != OPT_URI_PATH]
    for seg in segments:
        msg.add_option(OPT_URI_PATH, seg.encode("utf-8"))


def path_str(msg: CoapMessage) -> str:
    return "/" + "/".join(uri_path(msg))


def parse_path(path: str) -> list[str]:
    """Split a /a/b/c string into Uri-Path segments."""
    return [seg for seg in path.split("/") if seg]


def request(method: int, path: str, payload: bytes = b"", mtype: int = CON,
            message_id: int = 0, token: bytes = b"") -> CoapMessage:
    msg = CoapMessage(mtype, method, message_id, token, [], payload)
    set_uri_path(msg, parse_path(path))
    return msg


def response_for(req: CoapMessage, rcode: int, payload: bytes = b"",
                 next_mid=None) -> CoapMessage:
    """Piggy-backed ACK for CON requests, NON for everything else."""
    if req.mtype == CON:
        return CoapMessage(ACK, rcode, req.message_id, req.token, [], payload)
    mid = next_mid() if next_mid is not None else req.message_id
    return CoapMessage(NON, rcode, mid, req.token, [], payload)
