"""Operator-side request machinery: sealing, retransmission, and sequence
persistence so a client never replays itself across invocations."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

from . import coap, secure


class RequestTimeout(Exception):
    pass


class SeqStore:
    """Monotonic sequence counter persisted to a small JSON file."""

    def __init__(self, path: str | None):
        self.path = path
        self._next = 1
        if path and os.path.exists(path):
            with open(path) as fh:
                self._next = int(json.load(fh).get("next_seq", 1))

    def take(self) -> int:
        seq = self._next
        self._next += 1
        if self.path:
            tmp = self.path + ".tmp"
            with open(tmp, "w") as fh:
                json.dump({"next_seq": self._next}, fh)
            os.replace(tmp, self.path)
        return seq


@dataclass
class ClientConfig:
    target: str = "127.0.0.1:5683"
    sender_id: int = 100
    psk: bytes = b"\x00" * 16
    seq_path: str | None = None
    timeout: float = 1.0
    retries: int = 3

    @staticmethod
    def from_dict(d: dict) -> "ClientConfig":
        cfg = ClientConfig()
        for key, value in d.items():
            if key == "psk_hex":
                cfg.psk = bytes.fromhex(value)
            elif hasattr(cfg, key):
                setattr(cfg, key, value)
            else:
                raise ValueError(f"unknown client config key {key!r}")
        return cfg

    @staticmethod
    def from_file(path: str) -> "ClientConfig":
        with open(path) as fh:
            return ClientConfig.from_dict(json.load(fh))


class Client:
    """Blocking request/response client over any transport with send()."""

    def __init__(self, transport, config: ClientConfig):
        self.transport = transport
        self.config = config
        self.seq = SeqStore(config.seq_path)
        self.windows: dict[int, secure.ReplayWindow] = {}
        self._mid = 0
        self._token = 0

    def _next_mid(self) -> int:
        self._mid = (self._mid + 1) & 0xFFFF
        return self._mid

    def _next_token(self) -> bytes:
        self._token = (self._token + 1) & 0xFFFFFFFF
        return self._token.to_bytes(4, "big")

    def request(self, method: int, path: str, payload: bytes = b"",
                mtype: int = coap.CON) -> coap.CoapMessage:
        """Send one request; CON requests are retransmitted with backoff.

        Each attempt is sealed with a fresh sequence number (the envelope
        layer rejects replays, so a byte-identical resend would bounce).
        """
        msg = coap.request(method, path, payload, mtype=mtype,
                           message_id=self._next_mid(), token=self._next_token())
        body = coap.encode(msg)
        attempts = self.config.retries if mtype == coap.CON else 1
        timeout = self.config.timeout
        for attempt in range(attempts):
            sealed = secure.seal(self.config.psk, self.config.sender_id,
                                 self.seq.take(), body)
            raw = self.transport.send(sealed, timeout=timeout)
            if raw is not None:
                reply = self._open(raw)
                if reply.token == msg.token:
                    return reply
            timeout *= 2  # exponential backoff
        raise RequestTimeout(f"no response after {attempts} attempts to {path}")

    def _open(self, raw: bytes) -> coap.CoapMessage:
        sender = secure.peek_sender(raw)
        window = self.windows.setdefault(sender, secure.ReplayWindow())
        _, _, body = secure.open_envelope(self.config.psk, window, raw)
        return coap.decode(body)

    # ------------------------------------------------------------ operations

    def get(self, path: str) -> coap.CoapMessage:
        return self.request(coap.GET, path)

    def put(self, path: str, payload: bytes = b"") -> coap.CoapMessage:
        return self.request(coap.PUT, path, payload)

    def deploy(self, prefix: str, package: bytes) -> coap.CoapMessage:
        return self.request(coap.PUT, f"/vm-control/{prefix}", package)

    update = deploy

    def delete(self, prefix: str) -> coap.CoapMessage:
        return self.request(coap.DELETE, f"/vm-control/{prefix}")

    def list_capsules(self) -> list[dict]:
        reply = self.request(coap.GET, "/vm-control")
        if not coap.is_success(reply.code):
            raise RuntimeError(f"list failed: {coap.code_str(reply.code)}")
        return json.loads(reply.payload.decode())

    def run_ephemeral(self, package: bytes, input_data: bytes = b"") -> coap.CoapMessage:
        return self.request(coap.POST, "/vm-control/run", package + input_data)
