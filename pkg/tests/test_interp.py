"""Execution semantics owned by this runtime: fuel, page size, sandbox
boundaries, call depth, and host-side memory access."""

import pytest

from capvm import wasm
from capvm.wasm.errors import TrapKind
from oracle_harness import oracle_wasm

FIB = oracle_wasm("fib_iter")
PAGE_PROBE = oracle_wasm("local_page_probe")  # (memory 1 4), size/grow/loads/stores
MIN2 = oracle_wasm("local_mem_min2")          # (memory 2)


def fresh(data: bytes, **limits) -> wasm.Instance:
    return wasm.instantiate(wasm.load(data), limits=wasm.InstanceLimits(**limits))


# ----------------------------------------------------------------- fuel

def test_fuel_determinism_and_monotonicity():
    inst = fresh(FIB)
    first = inst.invoke("run", [20], fuel=10_000)
    assert first.is_values and first.values[0].value == 6765
    consumed = first.fuel_consumed

    again = inst.invoke("run", [20], fuel=10_000)
    assert again.values == first.values
    assert again.fuel_consumed == consumed

    exact = inst.invoke("run", [20], fuel=consumed)
    assert exact.is_values and exact.fuel_consumed == consumed

    starved = inst.invoke("run", [20], fuel=consumed - 1)
    assert starved.is_out_of_fuel
    assert starved.fuel_consumed == consumed - 1


def test_zero_fuel_runs_nothing():
    inst = fresh(FIB)
    out = inst.invoke("run", [1], fuel=0)
    assert out.is_out_of_fuel and out.fuel_consumed == 0


def test_fuel_consumed_accumulates_on_instance():
    inst = fresh(FIB)
    a = inst.invoke("run", [5], fuel=1_000).fuel_consumed
    b = inst.invoke("run", [7], fuel=1_000).fuel_consumed
    assert inst.fuel_consumed == a + b


def test_trap_reports_fuel_consumed_so_far():
    inst = fresh(oracle_wasm("div_traps"))
    out = inst.invoke("d32", [7, 0], fuel=1_000)
    assert out.is_trap and out.trap is TrapKind.IntegerDivByZero
    assert 0 < out.fuel_consumed < 10


# ------------------------------------------------------------ page size

@pytest.mark.parametrize("page_size", [32768, 65536])
def test_page_arithmetic_and_boundary_traps(page_size):
    inst = fresh(PAGE_PROBE, page_size_bytes=page_size)
    assert len(inst.memory) == page_size
    fuel = 1_000

    assert inst.invoke("size", [], fuel=fuel).values[0].value == 1
    # last byte is writable, one past traps: boundary at exactly the length
    assert inst.invoke("store8", [page_size - 1], fuel=fuel).is_values
    assert inst.invoke("load8", [page_size - 1], fuel=fuel).values[0].value == 170
    assert inst.invoke("load8", [page_size], fuel=fuel).trap is TrapKind.MemOutOfBounds
    # 4-byte access: fits at len-4, traps at len-3
    assert inst.invoke("store32", [page_size - 4], fuel=fuel).is_values
    assert inst.invoke("load32", [page_size - 4], fuel=fuel).is_values
    out = inst.invoke("load32", [page_size - 3], fuel=fuel)
    assert out.trap is TrapKind.MemOutOfBounds

    # grow by one page: old count returned, length and size move together
    assert inst.invoke("grow", [1], fuel=fuel).values[0].value == 1
    assert len(inst.memory) == 2 * page_size
    assert inst.invoke("size", [], fuel=fuel).values[0].value == 2
    assert inst.invoke("load8", [2 * page_size - 1], fuel=fuel).is_values
    assert inst.invoke("load8", [2 * page_size], fuel=fuel).trap is TrapKind.MemOutOfBounds

    # declared max is 4 pages: growing past it fails in-band with -1
    assert inst.invoke("grow", [3], fuel=fuel).values[0].value == -1
    assert inst.invoke("grow", [2], fuel=fuel).values[0].value == 2
    assert inst.invoke("grow", [1], fuel=fuel).values[0].value == -1


def test_paper_memory_configuration():
    # one page at the lowered 32768-byte page size -> 32768-byte memory
    inst = fresh(PAGE_PROBE, page_size_bytes=32768)
    assert len(inst.memory) == 32768
    # growing one more page doubles it to the standard minimum
    assert inst.invoke("grow", [1], fuel=100).values[0].value == 1
    assert len(inst.memory) == 65536


def test_instance_limit_caps_growth_below_declared_max():
    inst = fresh(PAGE_PROBE, max_memory_pages=2)
    assert inst.invoke("grow", [1], fuel=100).values[0].value == 1
    assert inst.invoke("grow", [1], fuel=100).values[0].value == -1


def test_grow_guard_denial_is_in_band():
    inst = fresh(PAGE_PROBE)
    inst.grow_guard = lambda nbytes: False
    assert inst.invoke("grow", [1], fuel=100).values[0].value == -1
    assert inst.invoke("size", [], fuel=100).values[0].value == 1


def test_min_pages_exceeding_limit_fails_instantiation():
    with pytest.raises(wasm.LimitsError):
        fresh(MIN2, max_memory_pages=1)


def test_page_size_must_be_power_of_two_in_range():
    for bad in (0, 100, 255, 65537, 48000):
        with pytest.raises(wasm.LimitsError):
            fresh(PAGE_PROBE, page_size_bytes=bad)


# -------------------------------------------------------------- sandbox

def test_oob_store_never_reaches_other_instances():
    victim = fresh(PAGE_PROBE)
    canary = bytes([0xA5] * 64)
    victim.mem_write(100, canary)

    attacker = fresh(oracle_wasm("mem_i64_rw"))
    for addr in (65536, 65529, 2**31 - 1, -1, -8):
        out = attacker.invoke("run", [addr, 0x4141414141414141], fuel=1_000)
        assert out.trap is TrapKind.MemOutOfBounds
    assert victim.mem_read(100, 64) == canary


def test_host_mem_read_write_bounds():
    inst = fresh(PAGE_PROBE)
    assert inst.mem_read(0, 0) == b""
    inst.mem_write(10, b"xyz")
    assert inst.mem_read(10, 3) == b"xyz"
    with pytest.raises(wasm.HostMemOutOfBounds):
        inst.mem_read(len(inst.memory) - 1, 2)
    with pytest.raises(wasm.HostMemOutOfBounds):
        inst.mem_write(len(inst.memory), b"!")
    with pytest.raises(wasm.HostMemOutOfBounds):
        inst.mem_read(-1, 1)


# ---------------------------------------------------------- call depth

def test_call_depth_limit_traps_stack_exhausted():
    inst = fresh(oracle_wasm("stack_exhaust"), call_depth_limit=64)
    out = inst.invoke("run", [], fuel=10_000)
    assert out.trap is TrapKind.StackExhausted
    # two instructions per frame (call + fuel for entry) keeps this small
    assert out.fuel_consumed < 64 * 4


def test_deep_but_legal_recursion_ok():
    inst = fresh(oracle_wasm("fac_rec"), call_depth_limit=64)
    out = inst.invoke("run", [20], fuel=10_000)
    assert out.values[0].value == 2432902008176640000


# ------------------------------------------------------------ instance

def test_reentrant_invoke_rejected():
    inst = fresh(FIB)
    calls = []

    def evil(_inst):
        calls.append(1)
        inst.invoke("run", [1], fuel=10)

    inst._busy = True
    with pytest.raises(wasm.HostError):
        inst.invoke("run", [1], fuel=10)
    inst._busy = False


def test_no_such_export_and_arg_mismatch():
    inst = fresh(FIB)
    with pytest.raises(wasm.NoSuchExport):
        inst.invoke("nope", [], fuel=10)
    with pytest.raises(wasm.ArgTypeMismatch):
        inst.invoke("run", [], fuel=10)
    with pytest.raises(wasm.ArgTypeMismatch):
        inst.invoke("run", [1.5], fuel=10)
    with pytest.raises(wasm.ArgTypeMismatch):
        inst.invoke("run", [2**40], fuel=10)


def test_unresolved_and_mismatched_imports():
    # module importing host.rng_u32 () -> i32
    from capvm import corpus
    vm = wasm.load(corpus.load("sensor_eph"))
    with pytest.raises(wasm.UnresolvedImport):
        wasm.instantiate(vm)
    bad = wasm.HostImportTable()
    bad.add("host", "trigger_measurements", wasm.HostFunc(("i32",), ("i32",), lambda i, x: 0))
    with pytest.raises((wasm.UnresolvedImport, wasm.SignatureMismatch)):
        wasm.instantiate(vm, bad)


def test_start_function_runs_under_initial_fuel():
    data = oracle_wasm("start_init")
    inst = wasm.instantiate(wasm.load(data),
                            limits=wasm.InstanceLimits(initial_fuel=100))
    assert inst.invoke("get", [], fuel=10).values[0].value == 77
    with pytest.raises(wasm.StartTrapped):
        wasm.instantiate(wasm.load(data), limits=wasm.InstanceLimits(initial_fuel=1))


def test_instantiate_error_examples():
    with pytest.raises(wasm.DataSegmentOutOfBounds):
        wasm.instantiate(wasm.load(oracle_wasm("ie_data_way_oob")))
    with pytest.raises(wasm.ElemSegmentOutOfBounds):
        wasm.instantiate(wasm.load(oracle_wasm("ie_elem_oob")))
    with pytest.raises(wasm.StartTrapped):
        wasm.instantiate(wasm.load(oracle_wasm("ie_start_trap")))


def test_determinism_across_fresh_instances():
    results = []
    for _ in range(3):
        inst = fresh(oracle_wasm("int_mix"))
        out = inst.invoke("run", [0x00F0F0F0], fuel=1_000)
        results.append((out.values, out.fuel_consumed))
    assert results[0] == results[1] == results[2]


# -------------------------------------------------- trunc kind distinction

def test_trunc_nan_vs_overflow_kinds():
    # the reference engine reports one message for both; our kinds differ
    inst = fresh(oracle_wasm("op_i32_trunc_f64_s"))
    nan = wasm.Value("f64", float("nan"))
    assert inst.invoke("run", [nan], fuel=10).trap is TrapKind.InvalidConversion
    big = wasm.Value.f64(1e300)
    assert inst.invoke("run", [big], fuel=10).trap is TrapKind.IntegerOverflow
    inf = wasm.Value.f64(float("inf"))
    assert inst.invoke("run", [inf], fuel=10).trap is TrapKind.IntegerOverflow
