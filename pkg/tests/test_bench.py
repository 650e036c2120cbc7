"""Bench harness: determinism, statistics, and report emission."""

import csv
import json
import math
import zlib

import pytest

from capvm import corpus, secure
from capvm.bench import CSV_COLUMNS, BenchReport, BenchSpec, report_emit, run_bench, \
    unwrap_capsule


def spec(**kw) -> BenchSpec:
    defaults = dict(name="fib", bytecode=corpus.load("bench_fib"), export="fib",
                    args=(25,), iterations=5, warmup=1)
    defaults.update(kw)
    return BenchSpec(**defaults)


def test_fuel_identical_across_iterations():
    report = run_bench(spec(iterations=10))
    assert report.valid and report.fuel_consistent
    fuels = {r.fuel for r in report.rows}
    assert len(fuels) == 1


def test_row_shape_and_warmup_split():
    report = run_bench(spec(iterations=4, warmup=2))
    assert len(report.rows) == 6
    assert [r.index for r in report.rows] == [-2, -1, 0, 1, 2, 3]
    assert len(report.measured_rows()) == 4
    assert all(r.time_us > 0 for r in report.rows)


def test_geometric_stats_present_and_finite():
    report = run_bench(spec())
    assert math.isfinite(report.gmean_us) and report.gmean_us > 0
    assert math.isfinite(report.gstd) and report.gstd >= 1.0


def test_iterations_floor():
    with pytest.raises(ValueError):
        spec(iterations=2)


def test_memory_growing_workload_peak():
    report = run_bench(spec(name="grow", bytecode=corpus.load("memgrow"),
                            export="touch", args=(3, 65536)))
    assert report.valid
    assert all(r.peak_linmem == 4 * 65536 for r in report.rows)


def test_fletcher_workload_output_checked_against_reference():
    # the workload handles real data: cross-check one run before timing it
    from capvm import wasm
    inst = wasm.instantiate(wasm.load(corpus.load("fletcher32")))
    out = inst.invoke("fletcher32", [1024], fuel=10**7)
    pattern = bytes((i * 31 + 7) & 0xFF for i in range(1024))
    assert (out.values[0].value & 0xFFFFFFFF) == _fletcher32_ref(pattern)
    report = run_bench(spec(name="fletcher", bytecode=corpus.load("fletcher32"),
                            export="fletcher32", args=(1024,)))
    assert report.valid and report.fuel_consistent


def _fletcher32_ref(data: bytes) -> int:
    s1 = s2 = 0
    for i in range(0, len(data), 2):
        word = data[i] | ((data[i + 1] << 8) if i + 1 < len(data) else 0)
        s1 = (s1 + word) % 65535
        s2 = (s2 + s1) % 65535
    return (s2 << 16) | s1


def test_crc_workload_matches_zlib():
    from capvm import wasm
    inst = wasm.instantiate(wasm.load(corpus.load("crc32")))
    pattern = bytes((i * 31 + 7) & 0xFF for i in range(512))
    out = inst.invoke("crc32", [512], fuel=10**7)
    assert (out.values[0].value & 0xFFFFFFFF) == zlib.crc32(pattern)


def test_failing_workload_flagged_invalid():
    report = run_bench(spec(name="boom", bytecode=corpus.load("adv_stackbomb"),
                            export="run", args=(0, 0)))
    assert not report.valid
    assert "trap" in (report.error or "")


def test_out_of_fuel_workload_flagged():
    report = run_bench(spec(name="spin", bytecode=corpus.load("adv_infinite"),
                            export="run", args=(0, 0), fuel=10_000))
    assert not report.valid


def test_unwrap_accepts_wasm_and_stamped():
    raw = corpus.load("bench_fib")
    assert unwrap_capsule(raw) == raw
    pkg = secure.gate_stamp(b"\x05" * 16, raw)
    assert unwrap_capsule(pkg) == raw
    with pytest.raises(ValueError):
        unwrap_capsule(b"nonsense")


def test_csv_emission_column_order(tmp_path):
    report = run_bench(spec(iterations=3, warmup=0))
    path = tmp_path / "out.csv"
    report_emit([report], "csv", str(path))
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == CSV_COLUMNS
    assert len(rows) == 1 + 3
    assert rows[1][0] == "fib"


def test_csv_empty_report_list(tmp_path):
    path = tmp_path / "empty.csv"
    report_emit([], "csv", str(path))
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows == [CSV_COLUMNS]


def test_jsonl_emission(tmp_path):
    report = run_bench(spec(iterations=3, warmup=1))
    path = tmp_path / "out.jsonl"
    report_emit([report], "jsonl", str(path))
    records = [json.loads(line) for line in open(path)]
    assert len(records) == 4
    assert records[0]["warmup"] is True
    assert all(r["fuel"] == records[0]["fuel"] for r in records)
    with pytest.raises(ValueError):
        report_emit([report], "xml", str(path))
