"""Measurement harness: wall time, fuel, and peak memory per iteration,
with geometric aggregates over the post-warmup iterations.

Fuel is the hardware-independent metric: for a deterministic workload it
is identical in every iteration, so it ranks workloads the same way on
any machine. Wall time is reported per iteration together with the
geometric mean and the geometric standard deviation (a factor >= 1;
"within 1%" means gstd <= 1.01).

Each iteration runs on a fresh instance so state resets are part of the
protocol, not a per-workload concern. Peak host allocation is measured
with tracemalloc and is best-effort (the tracer itself costs time, which
is why it never overlaps the timed region).
"""

from __future__ import annotations

import csv
import json
import math
import statistics
import time
import tracemalloc
from dataclasses import dataclass, field

from . import wasm
from .secure import BadStamp, stamped_length


@dataclass(frozen=True)
class BenchSpec:
    name: str
    bytecode: bytes
    export: str
    args: tuple = ()
    iterations: int = 10
    warmup: int = 2
    fuel: int = 100_000_000
    page_size: int = 65536
    imports: wasm.HostImportTable | None = None

    def __post_init__(self):
        if self.iterations < 3:
            raise ValueError("iterations must be >= 3 for geometric statistics")


@dataclass(frozen=True)
class IterationRow:
    index: int  # negative for warmup iterations
    time_us: float
    fuel: int
    peak_linmem: int
    peak_hostmem: int

    @property
    def warmup(self) -> bool:
        return self.index < 0


@dataclass
class BenchReport:
    name: str
    rows: list[IterationRow] = field(default_factory=list)
    gmean_us: float = math.nan
    gstd: float = math.nan
    fuel_consistent: bool = True
    valid: bool = True
    error: str | None = None

    def measured_rows(self) -> list[IterationRow]:
        return [r for r in self.rows if not r.warmup]


def unwrap_capsule(data: bytes) -> bytes:
    """Accept either raw wasm or a stamped package (stamp not verified:
    the bench harness measures execution, it is not a deployment path)."""
    if data[:4] == b"\x00asm":
        return data
    try:
        total = stamped_length(data)
    except BadStamp as exc:
        raise ValueError(f"neither wasm nor a stamped package: {exc}") from exc
    return data[4:total - 16]


def run_bench(spec: BenchSpec) -> BenchReport:
    """Execute one workload; aborts with a partial, invalid report if any
    iteration fails to produce values."""
    report = BenchReport(spec.name)
    try:
        validated = wasm.load(unwrap_capsule(spec.bytecode))
    except (wasm.WasmError, ValueError) as exc:
        report.valid = False
        report.error = f"load failed: {exc}"
        return report

    limits = wasm.InstanceLimits(page_size_bytes=spec.page_size,
                                 initial_fuel=spec.fuel)

    # Host-allocation probe, once per workload: execution is deterministic,
    # so every iteration allocates identically. Kept outside the timed runs
    # because the tracer itself costs time.
    tracemalloc.start()
    try:
        probe = wasm.instantiate(validated, spec.imports, limits)
        probe.invoke(spec.export, list(spec.args), fuel=spec.fuel)
        _, peak_host = tracemalloc.get_traced_memory()
    except wasm.InstantiationError as exc:
        report.valid = False
        report.error = f"instantiate failed: {exc}"
        return report
    finally:
        tracemalloc.stop()

    total = spec.warmup + spec.iterations
    for i in range(total):
        index = i - spec.warmup
        inst = wasm.instantiate(validated, spec.imports, limits)

        t0 = time.perf_counter_ns()
        outcome = inst.invoke(spec.export, list(spec.args), fuel=spec.fuel)
        elapsed_us = (time.perf_counter_ns() - t0) / 1000.0

        if not outcome.is_values:
            report.valid = False
            report.error = f"iteration {index}: {outcome}"
            return report

        report.rows.append(IterationRow(index, elapsed_us, outcome.fuel_consumed,
                                        len(inst.memory), peak_host))

    measured = report.measured_rows()
    fuels = {r.fuel for r in measured}
    report.fuel_consistent = len(fuels) == 1
    logs = [math.log(max(r.time_us, 1e-3)) for r in measured]
    report.gmean_us = math.exp(statistics.fmean(logs))
    report.gstd = math.exp(statistics.stdev(logs)) if len(logs) > 1 else 1.0
    return report


CSV_COLUMNS = ["name", "iter", "time_us", "fuel", "peak_linmem", "peak_hostmem",
               "gmean_us", "gstd"]


def report_emit(reports: list[BenchReport], fmt: str, path: str) -> None:
    """Write reports as one CSV table or as JSONL (one record/iteration)."""
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_COLUMNS)
            for rep in reports:
                for row in rep.rows:
                    writer.writerow([rep.name, row.index, f"{row.time_us:.3f}",
                                     row.fuel, row.peak_linmem, row.peak_hostmem,
                                     f"{rep.gmean_us:.3f}", f"{rep.gstd:.6f}"])
    elif fmt == "jsonl":
        with open(path, "w") as fh:
            for rep in reports:
                for row in rep.rows:
                    fh.write(json.dumps({
                        "name": rep.name, "iter": row.index, "warmup": row.warmup,
                        "time_us": row.time_us, "fuel": row.fuel,
                        "peak_linmem": row.peak_linmem,
                        "peak_hostmem": row.peak_hostmem,
                        "gmean_us": rep.gmean_us, "gstd": rep.gstd,
                        "valid": rep.valid,
                    }) + "\n")
    else:
        raise ValueError(f"unknown format {fmt!r} (use csv or jsonl)")
