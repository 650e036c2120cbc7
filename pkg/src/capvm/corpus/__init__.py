"""Example capsules used by tests, demos, and benches.

Sources are WAT files shipped with the package; prebuilt binaries plus a
manifest (name, kind, sha-256, oracle notes) live in prebuilt/ so nothing
at test time needs the assembler toolchain. build_corpus() reassembles
everything from source (requires node + the repo's tools/) and verifies
reproducibility against the committed manifest.
"""

from __future__ import annotations

import hashlib
import json
import subprocess
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .. import secure

# Key the repo's demo packages are stamped with (matches the DeviceConfig
# default); real deployments configure their own.
DEV_GATEKEEPER_KEY = b"\x01" * 16


@dataclass(frozen=True)
class CorpusEntry:
    name: str
    kind: str  # "ephemeral" | "persistent" | "bench" | "adversarial"
    required_imports: tuple[str, ...]
    oracle: str  # how tests know the expected output


ENTRIES: dict[str, CorpusEntry] = {e.name: e for e in [
    CorpusEntry("fib_eph", "ephemeral", (),
                "ASCII n -> ASCII fib(n); reference: iterative Python fib"),
    CorpusEntry("sensor_eph", "ephemeral",
                ("trigger_measurements", "wait_for_reading", "rng_u32", "log"),
                "ASCII centi-units of waveform value + (rng mod 10)"),
    CorpusEntry("kv", "persistent", (),
                "counter increments per GET count; note round-trips via PUT/GET"),
    CorpusEntry("sensor_v1", "persistent",
                ("trigger_measurements", "wait_for_reading", "rng_u32", "log"),
                'GET sensor1/temp -> "II.FF" from waveform + rng noise'),
    CorpusEntry("sensor_v2", "persistent",
                ("trigger_measurements", "wait_for_reading", "rng_u32", "log"),
                'same as sensor_v1 but answers are prefixed "T="'),
    CorpusEntry("bench_fib", "bench", (),
                "fib(n) as i64; reference: Python fib"),
    CorpusEntry("fletcher32", "bench", (),
                "Fletcher-32 mod 65535 over LE 16-bit words; Python reference"),
    CorpusEntry("crc32", "bench", (),
                "CRC-32 (IEEE reflected); reference: zlib.crc32"),
    CorpusEntry("matmul", "bench", (),
                "round(100*sum(AxB)) with patterned A,B; Python reference"),
    CorpusEntry("states", "bench", (),
                "8-state LCG-driven automaton; Python mirror of the table"),
    CorpusEntry("memgrow", "bench", (),
                "grows n pages, touches each; returns final page count"),
    CorpusEntry("adv_infinite", "adversarial", (),
                "run() must end in fuel exhaustion"),
    CorpusEntry("adv_oob", "adversarial", (),
                "run() must trap MemOutOfBounds"),
    CorpusEntry("adv_badalloc", "adversarial", (),
                "host copy through alloc()'s bogus pointer must trap"),
    CorpusEntry("adv_stackbomb", "adversarial", (),
                "run() must trap StackExhausted"),
    CorpusEntry("adv_badinit", "adversarial", (),
                "init() returns 1; deployment must fail"),
    CorpusEntry("adv_spin_handler", "adversarial", (),
                "spin/oob/empty sub-paths fail; ok keeps answering"),
]}


def _pkg_dir() -> Path:
    return Path(__file__).parent


def wat_source(name: str) -> str:
    return (_pkg_dir() / "wat" / f"{name}.wat").read_text()


def load(name: str) -> bytes:
    """Prebuilt wasm bytes for a corpus entry."""
    if name not in ENTRIES:
        raise KeyError(f"unknown corpus entry {name!r}")
    return (_pkg_dir() / "prebuilt" / f"{name}.wasm").read_bytes()


def load_stamped(name: str, key: bytes = DEV_GATEKEEPER_KEY) -> bytes:
    """Gatekeeper-stamped package for a corpus entry."""
    return secure.gate_stamp(key, load(name))


def manifest() -> dict:
    return json.loads((_pkg_dir() / "prebuilt" / "manifest.json").read_text())


def _find_assembler() -> Path:
    for parent in Path(__file__).resolve().parents:
        candidate = parent / "tools" / "wat2wasm.js"
        if candidate.exists():
            return candidate
    raise FileNotFoundError("tools/wat2wasm.js not found; build from a repo checkout")


def build_corpus(out_dir: str | Path | None = None, check: bool = False) -> dict:
    """Assemble every WAT source, stamp it, and write the manifest.

    With check=True, compares the fresh hashes to the committed manifest
    and raises on drift (reproducibility gate).
    """
    out = Path(out_dir) if out_dir else _pkg_dir() / "prebuilt"
    out.mkdir(parents=True, exist_ok=True)
    assembler = _find_assembler()
    entries = {}
    for name, entry in sorted(ENTRIES.items()):
        src = _pkg_dir() / "wat" / f"{name}.wat"
        dst = out / f"{name}.wasm"
        proc = subprocess.run(["node", str(assembler), str(src), str(dst)],
                              capture_output=True, text=True)
        if proc.returncode != 0:
            raise RuntimeError(f"assembling {name} failed:\n{proc.stderr}")
        wasm_bytes = dst.read_bytes()
        package = secure.gate_stamp(DEV_GATEKEEPER_KEY, wasm_bytes)
        (out / f"{name}.cap").write_bytes(package)
        entries[name] = {
            "kind": entry.kind,
            "sha256": hashlib.sha256(wasm_bytes).hexdigest(),
            "size": len(wasm_bytes),
            "required_imports": list(entry.required_imports),
            "oracle": entry.oracle,
        }
    fresh = {"entries": entries}
    if check:
        committed = manifest()["entries"]
        drifted = [n for n in entries
                   if entries[n]["sha256"] != committed.get(n, {}).get("sha256")]
        if drifted:
            raise RuntimeError(f"corpus not reproducible, drifted: {drifted}")
    (out / "manifest.json").write_text(json.dumps(fresh, indent=1, sort_keys=True))
    return fresh
