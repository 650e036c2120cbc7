"""Operator command line: gatekeeper stamping, capsule lifecycle over the
network, benchmarks, and the device runner.

Key material resolution order: explicit flag, then environment variable
(CAPVM_PSK_HEX / CAPVM_GATEKEEPER_KEY_HEX), then the config file. All
output is line-oriented; exit code 0 means a 2.xx response.

Exit codes for `device run`: 0 clean stop, 1 config error, 2 bind error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import bench as bench_mod
from . import coap, secure, wasm
from .client import Client, ClientConfig, RequestTimeout
from .device import BindError, ConfigError, Device, DeviceConfig, UdpTransport


def _key_from(args_value: str | None, env_name: str, cfg_value: bytes | None,
              what: str) -> bytes:
    hexstr = args_value or os.environ.get(env_name)
    if hexstr:
        key = bytes.fromhex(hexstr)
    elif cfg_value is not None:
        key = cfg_value
    else:
        raise SystemExit(f"error: no {what} given (flag, {env_name}, or config)")
    if len(key) != 16:
        raise SystemExit(f"error: {what} must be 16 bytes (32 hex chars)")
    return key


def _client(args) -> Client:
    cfg = ClientConfig.from_file(args.config) if args.config else ClientConfig()
    if args.target:
        cfg.target = args.target
    cfg.psk = _key_from(args.psk_hex, "CAPVM_PSK_HEX", cfg.psk, "pre-shared key")
    return Client(UdpTransport(cfg.target), cfg)


def _print_reply(reply: coap.CoapMessage) -> int:
    print(f"code {coap.code_str(reply.code)}")
    if reply.payload:
        print(f"payload-hex {reply.payload.hex()}")
        print(f"payload-text {reply.payload.decode('utf-8', errors='replace')}")
    return 0 if coap.is_success(reply.code) else 1


def cmd_gate(args) -> int:
    key = _key_from(args.key_hex, "CAPVM_GATEKEEPER_KEY_HEX", None, "gatekeeper key")
    data = open(args.wasm, "rb").read()
    try:
        package = secure.gate_stamp(key, data)
    except secure.GateRefused as exc:
        reason = exc.reason
        print(f"refused: {reason}", file=sys.stderr)
        if isinstance(reason, wasm.TypeMismatch):
            print(f"  func index {reason.func_index}, "
                  f"instruction {reason.instr_offset}", file=sys.stderr)
        return 1
    out = args.out or (args.wasm.rsplit(".", 1)[0] + ".cap")
    with open(out, "wb") as fh:
        fh.write(package)
    print(f"stamped {len(data)} bytes -> {out}")
    return 0


def _lifecycle(args, fn) -> int:
    client = _client(args)
    try:
        return _print_reply(fn(client))
    except RequestTimeout as exc:
        print(f"timeout: {exc}", file=sys.stderr)
        return 2


def cmd_deploy(args) -> int:
    package = open(args.package, "rb").read()
    return _lifecycle(args, lambda c: c.deploy(args.prefix, package))


def cmd_delete(args) -> int:
    return _lifecycle(args, lambda c: c.delete(args.prefix))


def cmd_list(args) -> int:
    client = _client(args)
    try:
        for entry in client.list_capsules():
            print(json.dumps(entry))
        return 0
    except RequestTimeout as exc:
        print(f"timeout: {exc}", file=sys.stderr)
        return 2


def cmd_run(args) -> int:
    package = open(args.package, "rb").read()
    input_data = bytes.fromhex(args.input_hex) if args.input_hex else \
        args.input.encode() if args.input else b""
    return _lifecycle(args, lambda c: c.run_ephemeral(package, input_data))


def cmd_get(args) -> int:
    return _lifecycle(args, lambda c: c.get(args.path))


def cmd_put(args) -> int:
    payload = bytes.fromhex(args.payload_hex) if args.payload_hex else \
        args.payload.encode() if args.payload else b""
    return _lifecycle(args, lambda c: c.put(args.path, payload))


def cmd_bench(args) -> int:
    data = open(args.capsule, "rb").read()
    spec = bench_mod.BenchSpec(
        name=args.name or os.path.basename(args.capsule),
        bytecode=data, export=args.export,
        args=tuple(int(a) for a in args.args), iterations=args.iters,
        warmup=args.warmup, fuel=args.fuel, page_size=args.page_size)
    report = bench_mod.run_bench(spec)
    if not report.valid:
        print(f"bench failed: {report.error}", file=sys.stderr)
    else:
        print(f"{report.name}: gmean {report.gmean_us:.1f} us, gstd {report.gstd:.4f}, "
              f"fuel {report.rows[-1].fuel}"
              f"{' (consistent)' if report.fuel_consistent else ' (VARIES)'}")
    if args.out:
        bench_mod.report_emit([report], args.format, args.out)
        print(f"wrote {args.out}")
    return 0 if report.valid else 1


def cmd_device_run(args) -> int:
    try:
        cfg = DeviceConfig.from_file(args.config) if args.config else DeviceConfig()
        if args.listen:
            cfg.listen = args.listen
        preloads = []
        for spec in args.preload or []:
            prefix, _, path = spec.partition("=")
            if not path:
                raise ConfigError(f"--preload wants prefix=package.cap, got {spec!r}")
            preloads.append((prefix, open(path, "rb").read()))
        for entry in cfg.preload:
            preloads.append((entry["prefix"], open(entry["package"], "rb").read()))
        dev = Device(cfg, preloads)
    except (ConfigError, OSError, secure.SecureError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    print(f"device {cfg.device_id} listening on {cfg.listen} "
          f"({len(dev.manager.capsules)} capsules preloaded)")
    try:
        dev.serve_udp()
    except BindError as exc:
        print(f"bind error: {exc}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        print("stopping")
    return 0


def _add_client_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="client config JSON")
    p.add_argument("--target", help="device address host:port")
    p.add_argument("--psk-hex", help="pre-shared key (32 hex chars)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="capvm",
                                     description="capsule platform operator tool")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gate", help="validate and stamp a capsule")
    p.add_argument("wasm", help="input .wasm file")
    p.add_argument("-o", "--out", help="output package path (default: .cap)")
    p.add_argument("--key-hex", help="gatekeeper key (32 hex chars)")
    p.set_defaults(fn=cmd_gate)

    p = sub.add_parser("deploy", help="deploy or update a persistent capsule")
    p.add_argument("prefix")
    p.add_argument("package", help="stamped .cap file")
    _add_client_flags(p)
    p.set_defaults(fn=cmd_deploy)

    p = sub.add_parser("update", help="alias of deploy (PUT /vm-control/<prefix>)")
    p.add_argument("prefix")
    p.add_argument("package")
    _add_client_flags(p)
    p.set_defaults(fn=cmd_deploy)

    p = sub.add_parser("delete", help="terminate a persistent capsule")
    p.add_argument("prefix")
    _add_client_flags(p)
    p.set_defaults(fn=cmd_delete)

    p = sub.add_parser("list", help="list capsules on the device")
    _add_client_flags(p)
    p.set_defaults(fn=cmd_list)

    p = sub.add_parser("run", help="run an ephemeral capsule remotely")
    p.add_argument("package", help="stamped .cap file")
    p.add_argument("--input", help="input as UTF-8 text")
    p.add_argument("--input-hex", help="input as hex bytes")
    _add_client_flags(p)
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("get", help="GET a path on the device")
    p.add_argument("path")
    _add_client_flags(p)
    p.set_defaults(fn=cmd_get)

    p = sub.add_parser("put", help="PUT a path on the device")
    p.add_argument("path")
    p.add_argument("--payload", help="payload as UTF-8 text")
    p.add_argument("--payload-hex", help="payload as hex bytes")
    _add_client_flags(p)
    p.set_defaults(fn=cmd_put)

    p = sub.add_parser("bench", help="benchmark a capsule export locally")
    p.add_argument("--capsule", required=True, help=".wasm or .cap file")
    p.add_argument("--export", required=True)
    p.add_argument("--args", nargs="*", default=[], help="integer arguments")
    p.add_argument("--iters", type=int, default=10)
    p.add_argument("--warmup", type=int, default=2)
    p.add_argument("--fuel", type=int, default=100_000_000)
    p.add_argument("--page-size", type=int, default=65536)
    p.add_argument("--name")
    p.add_argument("--out", help="report file")
    p.add_argument("--format", choices=["csv", "jsonl"], default="csv")
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("device", help="device subcommands")
    dsub = p.add_subparsers(dest="device_command", required=True)
    d = dsub.add_parser("run", help="run a virtual device")
    d.add_argument("--config", help="device config JSON")
    d.add_argument("--listen", help="override listen address host:port")
    d.add_argument("--preload", nargs="*", help="prefix=package.cap to deploy at boot")
    d.set_defaults(fn=cmd_device_run)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
