#!/usr/bin/env python3
"""Generate the frozen interpreter oracle data.

Builds a corpus of small Wasm modules (WAT), assembles them with wabt, runs
them on Node's V8 WebAssembly engine via ref_runner.js, and freezes the
binaries plus V8's observed outputs into tests/data/interp_oracle.json.

The generated file is committed; the test suite replays the binaries on the
package interpreter and demands 100% agreement. Regenerate with:

    python3 tools/gen_interp_oracle.py
"""

from __future__ import annotations

import json
import math
import struct
import subprocess
import sys
from pathlib import Path

TOOLS = Path(__file__).resolve().parent
OUT_PATH = TOOLS.parent / "tests" / "data" / "interp_oracle.json"


def f32_bits(x: float) -> str:
    return struct.unpack("<I", struct.pack("<f", x))[0].to_bytes(4, "big").hex()


def f64_bits(x: float) -> str:
    return struct.unpack("<Q", struct.pack("<d", x))[0].to_bytes(8, "big").hex()


def ti32(v: int) -> dict:
    return {"t": "i32", "v": v}


def ti64(v: int) -> dict:
    return {"t": "i64", "v": str(v)}


def tf32(x: float | str) -> dict:
    return {"t": "f32", "bits": x if isinstance(x, str) else f32_bits(x)}


def tf64(x: float | str) -> dict:
    return {"t": "f64", "bits": x if isinstance(x, str) else f64_bits(x)}


F32_NAN = "7fc00000"
F32_INF = "7f800000"
F32_NINF = "ff800000"
F64_NAN = "7ff8000000000000"
F64_INF = "7ff0000000000000"
F64_NINF = "fff0000000000000"

I32V = [0, 1, -1, 7, -13, 0x7FFFFFFF, -0x80000000]
I64V = [0, 1, -1, 9, -21, 0x7FFFFFFFFFFFFFFF, -0x8000000000000000]
SHIFTS32 = [0, 1, 5, 31, 32, 33, -1]
SHIFTS64 = [0, 1, 5, 63, 64, 65, -1]

F32V = [tf32(0.0), tf32("80000000"), tf32(1.0), tf32(-1.5), tf32(0.5),
        tf32(F32_INF), tf32(F32_NINF), tf32(F32_NAN),
        tf32("7f7fffff"), tf32("00800000"), tf32("00000001"), tf32(3.0)]
F64V = [tf64(0.0), tf64("8000000000000000"), tf64(1.0), tf64(-1.5), tf64(0.5),
        tf64(F64_INF), tf64(F64_NINF), tf64(F64_NAN),
        tf64("7fefffffffffffff"), tf64("0010000000000000"),
        tf64("0000000000000001"), tf64(3.0)]

# Every numeric instruction in the supported subset, grouped by signature.
I32_BIN = ["i32.add", "i32.sub", "i32.mul", "i32.div_s", "i32.div_u", "i32.rem_s",
           "i32.rem_u", "i32.and", "i32.or", "i32.xor",
           "i32.eq", "i32.ne", "i32.lt_s", "i32.lt_u", "i32.gt_s", "i32.gt_u",
           "i32.le_s", "i32.le_u", "i32.ge_s", "i32.ge_u"]
I32_SHIFT = ["i32.shl", "i32.shr_s", "i32.shr_u", "i32.rotl", "i32.rotr"]
I64_BIN = [n.replace("i32", "i64") for n in I32_BIN]
I64_SHIFT = [n.replace("i32", "i64") for n in I32_SHIFT]
I32_UN = ["i32.eqz", "i32.clz", "i32.ctz", "i32.popcnt", "i32.extend8_s", "i32.extend16_s"]
I64_UN = ["i64.eqz", "i64.clz", "i64.ctz", "i64.popcnt",
          "i64.extend8_s", "i64.extend16_s", "i64.extend32_s"]
F_BIN = ["add", "sub", "mul", "div", "min", "max", "copysign",
         "eq", "ne", "lt", "gt", "le", "ge"]
F_UN = ["abs", "neg", "ceil", "floor", "trunc", "nearest", "sqrt"]

RESULT_OF = {}  # instruction -> result type, filled as modules are built


def sig_of(name: str) -> tuple[list[str], str]:
    """Operand and result types of a numeric instruction, by mnemonic."""
    t = name.split(".")[0]
    opn = name.split(".")[1]
    if opn in ("eq", "ne", "eqz") or opn.startswith(("lt", "gt", "le", "ge")):
        res = "i32"
    elif opn.startswith("trunc_sat") or opn.startswith("trunc_f"):
        res = t
    elif opn.startswith(("convert", "demote", "promote", "reinterpret", "extend",
                         "wrap")):
        res = t
    else:
        res = t
    if opn == "eqz" or opn.startswith(("clz", "ctz", "popcnt", "extend")):
        ins = [t if not opn.startswith("extend") else
               ("i32" if name.startswith("i64.extend_i32") else t)]
        if name.startswith("i64.extend_i32"):
            ins = ["i32"]
        elif name.startswith(("i32.extend", "i64.extend")):
            ins = [t]
    elif opn.startswith("trunc_sat_f") or opn.startswith("trunc_f"):
        ins = ["f32" if "f32" in opn else "f64"]
    elif opn.startswith("convert_i"):
        ins = ["i32" if "i32" in opn else "i64"]
    elif opn == "demote_f64":
        ins = ["f64"]
    elif opn == "promote_f32":
        ins = ["f32"]
    elif opn.startswith("reinterpret"):
        ins = [opn.split("_")[1]]
    elif opn == "wrap_i64":
        ins = ["i64"]
    elif opn in F_UN or opn in ("abs", "neg", "sqrt"):
        ins = [t]
    elif name in I32_UN or name in I64_UN:
        ins = [t]
    else:
        ins = [t, t]
    return ins, res


def typed(v, t):
    if t == "i32":
        return ti32(v)
    if t == "i64":
        return ti64(v)
    raise AssertionError(t)


def numeric_module(name: str, instr: str, arg_lists: list[list[dict]]) -> dict:
    ins, res = sig_of(instr)
    params = " ".join(ins)
    gets = " ".join(f"local.get {i}" for i in range(len(ins)))
    wat = (f'(module (func (export "run") (param {params}) (result {res}) '
           f"{gets} {instr}))")
    return {
        "name": name,
        "wat": wat,
        "invocations": [{"export": "run", "args": args, "result_type": res}
                        for args in arg_lists],
    }


def build_numeric_modules() -> list[dict]:
    mods = []

    def intv(vals, t):
        return [typed(v, t) for v in vals]

    for instr in I32_BIN:
        pairs = [[a, b] for a in intv(I32V, "i32") for b in intv(I32V, "i32")]
        mods.append(numeric_module(f"op_{instr.replace('.', '_')}", instr, pairs))
    for instr in I32_SHIFT:
        pairs = [[typed(v, "i32"), typed(s, "i32")] for v in I32V for s in SHIFTS32]
        mods.append(numeric_module(f"op_{instr.replace('.', '_')}", instr, pairs))
    for instr in I64_BIN:
        pairs = [[a, b] for a in intv(I64V, "i64") for b in intv(I64V, "i64")]
        mods.append(numeric_module(f"op_{instr.replace('.', '_')}", instr, pairs))
    for instr in I64_SHIFT:
        pairs = [[typed(v, "i64"), typed(s, "i64")] for v in I64V for s in SHIFTS64]
        mods.append(numeric_module(f"op_{instr.replace('.', '_')}", instr, pairs))
    for instr in I32_UN:
        mods.append(numeric_module(f"op_{instr.replace('.', '_')}", instr,
                                   [[typed(v, "i32")] for v in I32V + [255, -256, 0x8000]]))
    for instr in I64_UN:
        mods.append(numeric_module(f"op_{instr.replace('.', '_')}", instr,
                                   [[typed(v, "i64")] for v in I64V + [255, -256, 1 << 40]]))

    for t, vals in (("f32", F32V), ("f64", F64V)):
        for opn in F_BIN:
            instr = f"{t}.{opn}"
            pairs = [[a, b] for a in vals for b in vals]
            mods.append(numeric_module(f"op_{instr.replace('.', '_')}", instr, pairs))
        for opn in F_UN:
            instr = f"{t}.{opn}"
            extra = ([tf32(2.25), tf32(2.75), tf32(-2.5), tf32(7.5)] if t == "f32"
                     else [tf64(2.25), tf64(2.75), tf64(-2.5), tf64(7.5)])
            mods.append(numeric_module(f"op_{instr.replace('.', '_')}", instr,
                                       [[v] for v in vals + extra]))

    # conversions with boundary-heavy argument sets
    f32max_i32 = tf32(2147483520.0)     # largest f32 below 2^31
    conv_args = {
        "i32.wrap_i64": [[typed(v, "i64")] for v in
                         I64V + [0x123456789, -0x123456789, 0xFFFFFFFF, 0x80000000]],
        "i64.extend_i32_s": [[typed(v, "i32")] for v in I32V],
        "i64.extend_i32_u": [[typed(v, "i32")] for v in I32V],
        "i32.trunc_f32_s": [[v] for v in [tf32(0.0), tf32(-0.9), tf32(1.5), tf32(-1.5),
                                          f32max_i32, tf32(2147483648.0),
                                          tf32(-2147483648.0), tf32("cf000001"),
                                          tf32(F32_NAN), tf32(F32_INF), tf32(F32_NINF)]],
        "i32.trunc_f32_u": [[v] for v in [tf32(0.0), tf32(-0.9), tf32(1.5), tf32(-1.0),
                                          tf32(4294967040.0), tf32(4294967296.0),
                                          tf32(F32_NAN), tf32(F32_INF), tf32(F32_NINF)]],
        "i32.trunc_f64_s": [[v] for v in [tf64(0.0), tf64(-0.99), tf64(1.5),
                                          tf64(2147483647.0), tf64(2147483647.999),
                                          tf64(2147483648.0), tf64(-2147483648.999),
                                          tf64(-2147483649.0), tf64(1e300),
                                          tf64(F64_NAN), tf64(F64_INF), tf64(F64_NINF)]],
        "i32.trunc_f64_u": [[v] for v in [tf64(0.0), tf64(-0.99), tf64(1.5),
                                          tf64(4294967295.999), tf64(4294967296.0),
                                          tf64(-1.0), tf64(F64_NAN), tf64(F64_INF)]],
        "i64.trunc_f32_s": [[v] for v in [tf32(0.0), tf32(-1.5), tf32("5effffff"),
                                          tf32(9223372036854775808.0),
                                          tf32(-9223372036854775808.0), tf32("df000001"),
                                          tf32(F32_NAN), tf32(F32_INF)]],
        "i64.trunc_f32_u": [[v] for v in [tf32(0.0), tf32(-0.5), tf32("5f7fffff"),
                                          tf32(18446744073709551616.0), tf32(-1.0),
                                          tf32(F32_NAN), tf32(F32_INF)]],
        "i64.trunc_f64_s": [[v] for v in [tf64(0.0), tf64(-1.5),
                                          tf64(9223372036854774784.0),
                                          tf64(9223372036854775808.0),
                                          tf64(-9223372036854775808.0),
                                          tf64(-9223372036854777856.0),
                                          tf64(F64_NAN), tf64(F64_INF)]],
        "i64.trunc_f64_u": [[v] for v in [tf64(0.0), tf64(-0.3),
                                          tf64(18446744073709549568.0),
                                          tf64(18446744073709551616.0), tf64(-1.0),
                                          tf64(F64_NAN), tf64(F64_NINF)]],
        "f32.convert_i32_s": [[typed(v, "i32")] for v in I32V + [16777217, -16777217]],
        "f32.convert_i32_u": [[typed(v, "i32")] for v in I32V + [16777217]],
        "f32.convert_i64_s": [[typed(v, "i64")] for v in
                              I64V + [(1 << 53) + 1, (1 << 56) + (1 << 32) + 1,
                                      0x0020000020000001, -((1 << 53) + 1)]],
        "f32.convert_i64_u": [[typed(v, "i64")] for v in
                              [0, 1, 9, (1 << 53) + 1, -1, -0x8000000000000000,
                               0x0020000020000001]],
        "f64.convert_i32_s": [[typed(v, "i32")] for v in I32V],
        "f64.convert_i32_u": [[typed(v, "i32")] for v in I32V],
        "f64.convert_i64_s": [[typed(v, "i64")] for v in I64V + [(1 << 53) + 1]],
        "f64.convert_i64_u": [[typed(v, "i64")] for v in I64V + [(1 << 53) + 1]],
        "f32.demote_f64": [[v] for v in F64V + [tf64(1e300), tf64(1.0000000001),
                                                tf64(3.5e-39)]],
        "f64.promote_f32": [[v] for v in F32V],
        "i32.reinterpret_f32": [[v] for v in F32V],
        "i64.reinterpret_f64": [[v] for v in F64V],
        "f32.reinterpret_i32": [[typed(v, "i32")] for v in
                                [0, 1, -1, 0x3F800000, -0x80000000, 0x7F800000,
                                 0x7FC00000 - (1 << 32) + (1 << 32), 0x00000001]],
        "f64.reinterpret_i64": [[typed(v, "i64")] for v in
                                [0, 1, -1, 0x3FF0000000000000, -0x8000000000000000,
                                 0x7FF0000000000000, 1]],
    }
    for instr, arg_lists in conv_args.items():
        mods.append(numeric_module(f"op_{instr.replace('.', '_')}", instr, arg_lists))

    for instr in ["i32.trunc_sat_f32_s", "i32.trunc_sat_f32_u", "i32.trunc_sat_f64_s",
                  "i32.trunc_sat_f64_u", "i64.trunc_sat_f32_s", "i64.trunc_sat_f32_u",
                  "i64.trunc_sat_f64_s", "i64.trunc_sat_f64_u"]:
        src = "f32" if "f32" in instr else "f64"
        vals = F32V if src == "f32" else F64V
        big = [tf32(3e9), tf32(-3e9), tf32(2e19), tf32(-2e19)] if src == "f32" else \
              [tf64(3e9), tf64(-3e9), tf64(2e19), tf64(-2e19)]
        mods.append(numeric_module(f"op_{instr.replace('.', '_')}", instr,
                                   [[v] for v in vals + big]))
    return mods


def run(export: str, args: list, result_type: str) -> dict:
    return {"export": export, "args": args, "result_type": result_type}


def build_exec_modules() -> list[dict]:
    """Hand-written modules covering control flow, calls, memory, globals."""
    mods = []

    def add(name, wat, invocations):
        mods.append({"name": name, "wat": wat, "invocations": invocations})

    add("block_br", """
(module (func (export "run") (param i32) (result i32)
  block (result i32)
    local.get 0 i32.const 1 i32.add
    br 0
  end))
""", [run("run", [ti32(v)], "i32") for v in (0, 41, -1)])

    add("loop_sum", """
(module (func (export "run") (param $n i32) (result i32)
  (local $acc i32) (local $i i32)
  block $exit
    loop $top
      local.get $i local.get $n i32.ge_s br_if $exit
      local.get $i i32.const 1 i32.add local.tee $i
      local.get $acc i32.add local.set $acc
      br $top
    end
  end
  local.get $acc))
""", [run("run", [ti32(v)], "i32") for v in (0, 1, 10, 100)])

    add("nested_br", """
(module (func (export "run") (param i32) (result i32)
  block $outer (result i32)
    block $inner
      local.get 0 br_if $inner
      i32.const 100 br $outer
    end
    i32.const 11
  end
  i32.const 1 i32.add))
""", [run("run", [ti32(v)], "i32") for v in (0, 1, 2)])

    add("if_else_val", """
(module (func (export "run") (param i32) (result i32)
  local.get 0 if (result i32) i32.const 7 else i32.const 9 end))
""", [run("run", [ti32(v)], "i32") for v in (0, 1, -5)])

    add("if_no_else", """
(module (func (export "run") (param i32) (result i32)
  (local $r i32)
  i32.const 42 local.set $r
  local.get 0 if local.get $r i32.const 100 i32.add local.set $r end
  local.get $r))
""", [run("run", [ti32(v)], "i32") for v in (0, 1)])

    add("br_table_plain", """
(module (func (export "run") (param i32) (result i32)
  block $d block $c block $b block $a
    local.get 0 br_table $a $b $c $d
  end i32.const 10 return
  end i32.const 20 return
  end i32.const 30 return
  end i32.const 99))
""", [run("run", [ti32(v)], "i32") for v in (0, 1, 2, 3, 1000, -1)])

    add("br_table_value", """
(module (func (export "run") (param i32) (result i32)
  block $x (result i32)
    block $y (result i32)
      i32.const 111
      local.get 0 br_table $y $x
    end
    i32.const 5 i32.add
  end))
""", [run("run", [ti32(v)], "i32") for v in (0, 1, 7)])

    add("early_return", """
(module (func (export "run") (param $n i32) (result i32)
  (local $i i32)
  loop $top
    local.get $i local.get $n i32.ge_s
    if local.get $i return end
    local.get $i i32.const 7 i32.add local.set $i
    br $top
  end
  unreachable))
""", [run("run", [ti32(v)], "i32") for v in (0, 1, 13, 14, 50)])

    add("call_chain", """
(module
  (func $h (param i32) (result i32) local.get 0 i32.const 3 i32.mul)
  (func $g (param i32) (result i32) local.get 0 call $h i32.const 1 i32.add)
  (func (export "run") (param i32) (result i32) local.get 0 call $g call $h))
""", [run("run", [ti32(v)], "i32") for v in (0, 2, -4)])

    add("fac_rec", """
(module (func $f (export "run") (param $n i64) (result i64)
  local.get $n i64.const 2 i64.lt_s
  if (result i64)
    i64.const 1
  else
    local.get $n
    local.get $n i64.const 1 i64.sub call $f
    i64.mul
  end))
""", [run("run", [ti64(v)], "i64") for v in (0, 1, 5, 20)])

    add("fib_iter", """
(module (func (export "run") (param $n i32) (result i32)
  (local $a i32) (local $b i32) (local $t i32)
  i32.const 0 local.set $a
  i32.const 1 local.set $b
  block $exit
    loop $top
      local.get $n i32.eqz br_if $exit
      local.get $b local.tee $t
      local.get $a i32.add local.set $b
      local.get $t local.set $a
      local.get $n i32.const 1 i32.sub local.set $n
      br $top
    end
  end
  local.get $a))
""", [run("run", [ti32(v)], "i32") for v in (0, 1, 2, 10, 25, 40)])

    add("mutual_rec", """
(module
  (func $even (param i32) (result i32)
    local.get 0 i32.eqz if (result i32) i32.const 1
    else local.get 0 i32.const 1 i32.sub call $odd end)
  (func $odd (param i32) (result i32)
    local.get 0 i32.eqz if (result i32) i32.const 0
    else local.get 0 i32.const 1 i32.sub call $even end)
  (func (export "run") (param i32) (result i32) local.get 0 call $even))
""", [run("run", [ti32(v)], "i32") for v in (0, 1, 11, 24)])

    add("call_indirect_dispatch", """
(module
  (type $bin (func (param i32 i32) (result i32)))
  (type $un (func (param i32) (result i32)))
  (table 6 funcref)
  (elem (i32.const 0) $add $sub $mul)
  (elem (i32.const 4) $neg)
  (func $add (type $bin) local.get 0 local.get 1 i32.add)
  (func $sub (type $bin) local.get 0 local.get 1 i32.sub)
  (func $mul (type $bin) local.get 0 local.get 1 i32.mul)
  (func $neg (type $un) i32.const 0 local.get 0 i32.sub)
  (func (export "run") (param $i i32) (param $a i32) (param $b i32) (result i32)
    local.get $a local.get $b local.get $i call_indirect (type $bin)))
""", [run("run", [ti32(0), ti32(5), ti32(3)], "i32"),
      run("run", [ti32(1), ti32(5), ti32(3)], "i32"),
      run("run", [ti32(2), ti32(5), ti32(3)], "i32"),
      run("run", [ti32(3), ti32(5), ti32(3)], "i32"),
      run("run", [ti32(4), ti32(5), ti32(3)], "i32"),
      run("run", [ti32(6), ti32(5), ti32(3)], "i32"),
      run("run", [ti32(-1), ti32(5), ti32(3)], "i32")])

    add("select_vals", """
(module
  (func (export "run") (param i32) (result i64)
    i64.const 1111 i64.const 2222 local.get 0 select)
  (func (export "runf") (param i32) (result f64)
    f64.const 1.5 f64.const -2.5 local.get 0 select))
""", [run("run", [ti32(0)], "i64"), run("run", [ti32(1)], "i64"),
      run("run", [ti32(-7)], "i64"),
      run("runf", [ti32(0)], "f64"), run("runf", [ti32(9)], "f64")])

    add("globals_state", """
(module
  (global $g (mut i32) (i32.const 10))
  (global $c i32 (i32.const 5))
  (func (export "bump") (param i32) (result i32)
    global.get $g local.get 0 i32.add global.set $g global.get $g)
  (func (export "mixed") (result i32) global.get $g global.get $c i32.add))
""", [run("bump", [ti32(1)], "i32"), run("bump", [ti32(2)], "i32"),
      run("mixed", [], "i32")])

    add("global_i64_f64", """
(module
  (global $a (mut i64) (i64.const -7))
  (global $b (mut f64) (f64.const 0.25))
  (func (export "run") (result f64)
    global.get $a i64.const 3 i64.mul global.set $a
    global.get $b f64.const 2 f64.mul global.set $b
    global.get $a f64.convert_i64_s global.get $b f64.add))
""", [run("run", [], "f64"), run("run", [], "f64")])

    add("start_init", """
(module
  (global $g (mut i32) (i32.const 0))
  (func $init i32.const 77 global.set $g)
  (start $init)
  (func (export "get") (result i32) global.get $g))
""", [run("get", [], "i32")])

    add("stack_exhaust", """
(module (func $r (export "run") (result i32) call $r))
""", [run("run", [], "i32")])

    add("unreachable_hit", """
(module (func (export "run") (param i32) (result i32)
  local.get 0 if i32.const 1 return end
  unreachable))
""", [run("run", [ti32(1)], "i32"), run("run", [ti32(0)], "i32")])

    add("mem_i64_rw", """
(module (memory 1)
  (func (export "run") (param $a i32) (param $v i64) (result i64)
    local.get $a local.get $v i64.store
    local.get $a i64.load))
""", [run("run", [ti32(0), ti64(0x0123456789ABCDEF - (1 << 64))], "i64"),
      run("run", [ti32(100), ti64(-1)], "i64"),
      run("run", [ti32(65528), ti64(42)], "i64"),
      run("run", [ti32(65529), ti64(42)], "i64"),
      run("run", [ti32(-8), ti64(1)], "i64")])

    add("mem_loads", """
(module (memory 1)
  (data (i32.const 0) "\\80\\81\\82\\83\\84\\85\\86\\87\\88\\01\\02")
  (func (export "l8s") (param i32) (result i32) local.get 0 i32.load8_s)
  (func (export "l8u") (param i32) (result i32) local.get 0 i32.load8_u)
  (func (export "l16s") (param i32) (result i32) local.get 0 i32.load16_s)
  (func (export "l16u") (param i32) (result i32) local.get 0 i32.load16_u)
  (func (export "l32") (param i32) (result i32) local.get 0 i32.load)
  (func (export "l32o") (param i32) (result i32) local.get 0 i32.load offset=4)
  (func (export "l64") (param i32) (result i64) local.get 0 i64.load)
  (func (export "l64_8s") (param i32) (result i64) local.get 0 i64.load8_s)
  (func (export "l64_8u") (param i32) (result i64) local.get 0 i64.load8_u)
  (func (export "l64_16s") (param i32) (result i64) local.get 0 i64.load16_s)
  (func (export "l64_16u") (param i32) (result i64) local.get 0 i64.load16_u)
  (func (export "l64_32s") (param i32) (result i64) local.get 0 i64.load32_s)
  (func (export "l64_32u") (param i32) (result i64) local.get 0 i64.load32_u)
  (func (export "lbig") (param i32) (result i32) local.get 0 i32.load offset=65532))
""", [run("l8s", [ti32(0)], "i32"), run("l8s", [ti32(9)], "i32"),
      run("l8u", [ti32(0)], "i32"), run("l8u", [ti32(65535)], "i32"),
      run("l8u", [ti32(65536)], "i32"),
      run("l16s", [ti32(0)], "i32"), run("l16s", [ti32(1)], "i32"),
      run("l16u", [ti32(3)], "i32"), run("l16u", [ti32(65534)], "i32"),
      run("l16u", [ti32(65535)], "i32"),
      run("l32", [ti32(0)], "i32"), run("l32", [ti32(1)], "i32"),
      run("l32", [ti32(65532)], "i32"), run("l32", [ti32(65533)], "i32"),
      run("l32o", [ti32(0)], "i32"), run("l32o", [ti32(65528)], "i32"),
      run("l32o", [ti32(65529)], "i32"),
      run("l64", [ti32(0)], "i64"), run("l64", [ti32(3)], "i64"),
      run("l64", [ti32(65528)], "i64"), run("l64", [ti32(65529)], "i64"),
      run("l64_8s", [ti32(0)], "i64"), run("l64_8u", [ti32(0)], "i64"),
      run("l64_16s", [ti32(1)], "i64"), run("l64_16u", [ti32(1)], "i64"),
      run("l64_32s", [ti32(2)], "i64"), run("l64_32u", [ti32(2)], "i64"),
      run("lbig", [ti32(0)], "i32"), run("lbig", [ti32(1)], "i32"),
      run("lbig", [ti32(-1)], "i32")])

    add("mem_stores", """
(module (memory 1)
  (func (export "st8") (param $a i32) (param $v i32) (result i32)
    local.get $a local.get $v i32.store8
    local.get $a i32.load8_u)
  (func (export "st16") (param $a i32) (param $v i32) (result i32)
    local.get $a local.get $v i32.store16
    local.get $a i32.load16_u)
  (func (export "st32") (param $a i32) (param $v i32) (result i32)
    local.get $a local.get $v i32.store
    local.get $a i32.load)
  (func (export "st64_8") (param $a i32) (param $v i64) (result i64)
    local.get $a local.get $v i64.store8
    local.get $a i64.load8_u)
  (func (export "st64_16") (param $a i32) (param $v i64) (result i64)
    local.get $a local.get $v i64.store16
    local.get $a i64.load16_u)
  (func (export "st64_32") (param $a i32) (param $v i64) (result i64)
    local.get $a local.get $v i64.store32
    local.get $a i64.load32_u)
  (func (export "stf32") (param $a i32) (param $v f32) (result i32)
    local.get $a local.get $v f32.store
    local.get $a i32.load)
  (func (export "stf64") (param $a i32) (param $v f64) (result i64)
    local.get $a local.get $v f64.store
    local.get $a i64.load))
""", [run("st8", [ti32(5), ti32(0x1FF)], "i32"),
      run("st8", [ti32(65535), ti32(-1)], "i32"),
      run("st8", [ti32(65536), ti32(1)], "i32"),
      run("st16", [ti32(7), ti32(0x12345)], "i32"),
      run("st16", [ti32(65534), ti32(-2)], "i32"),
      run("st16", [ti32(65535), ti32(1)], "i32"),
      run("st32", [ti32(9), ti32(-123456789)], "i32"),
      run("st32", [ti32(65532), ti32(7)], "i32"),
      run("st32", [ti32(65533), ti32(7)], "i32"),
      run("st64_8", [ti32(0), ti64(0x1234)], "i64"),
      run("st64_16", [ti32(0), ti64(-3)], "i64"),
      run("st64_32", [ti32(0), ti64(0x123456789A - (1 << 40))], "i64"),
      run("stf32", [ti32(16), tf32(1.5)], "i32"),
      run("stf32", [ti32(16), tf32(F32_NAN)], "i32"),
      run("stf64", [ti32(24), tf64(-2.5)], "i64"),
      run("stf64", [ti32(24), tf64(F64_NAN)], "i64")])

    add("mem_grow_limits", """
(module (memory 1 3)
  (func (export "size") (result i32) memory.size)
  (func (export "grow") (param i32) (result i32) local.get 0 memory.grow)
  (func (export "probe") (param i32) (result i32) local.get 0 i32.load))
""", [run("size", [], "i32"),
      run("probe", [ti32(65532)], "i32"),
      run("probe", [ti32(65533)], "i32"),
      run("grow", [ti32(1)], "i32"),
      run("size", [], "i32"),
      run("probe", [ti32(131068)], "i32"),
      run("probe", [ti32(131069)], "i32"),
      run("grow", [ti32(5)], "i32"),
      run("grow", [ti32(0)], "i32"),
      run("grow", [ti32(1)], "i32"),
      run("grow", [ti32(1)], "i32"),
      run("size", [], "i32")])

    add("mem_zero_min", """
(module (memory 0 2)
  (func (export "size") (result i32) memory.size)
  (func (export "grow") (param i32) (result i32) local.get 0 memory.grow)
  (func (export "probe") (param i32) (result i32) local.get 0 i32.load))
""", [run("size", [], "i32"),
      run("probe", [ti32(0)], "i32"),
      run("grow", [ti32(1)], "i32"),
      run("probe", [ti32(0)], "i32"),
      run("size", [], "i32")])

    add("mem_unaligned", """
(module (memory 1)
  (func (export "run") (param $a i32) (param $v i32) (result i32)
    local.get $a local.get $v i32.store align=1
    local.get $a i32.load align=1))
""", [run("run", [ti32(1), ti32(-77)], "i32"),
      run("run", [ti32(3), ti32(0x7FFFFFFF)], "i32")])

    add("data_segments", """
(module (memory 1)
  (data (i32.const 16) "capsule")
  (data (i32.const 64) "\\ff\\00\\ff")
  (func (export "run") (param i32) (result i32) local.get 0 i32.load8_u))
""", [run("run", [ti32(v)], "i32") for v in (15, 16, 17, 22, 23, 63, 64, 65, 66)])

    add("fletcher_like", """
(module (memory 1)
  (data (i32.const 0) "abcdefghijklmnopqrstuvwxyz012345")
  (func (export "run") (param $len i32) (result i32)
    (local $i i32) (local $s1 i32) (local $s2 i32)
    block $done
      loop $top
        local.get $i local.get $len i32.ge_u br_if $done
        local.get $s1 local.get $i i32.load8_u i32.add
        i32.const 65535 i32.rem_u local.set $s1
        local.get $s2 local.get $s1 i32.add
        i32.const 65535 i32.rem_u local.set $s2
        local.get $i i32.const 1 i32.add local.set $i
        br $top
      end
    end
    local.get $s2 i32.const 16 i32.shl local.get $s1 i32.or))
""", [run("run", [ti32(v)], "i32") for v in (0, 1, 5, 26, 32)])

    add("deep_nesting", """
(module (func (export "run") (param i32) (result i32)
  block block block block block block block block block block
    block block block block block block block block block block
      local.get 0 br_table 3 7 19 0
    end end end end end end end end end end
    i32.const 5 return
  end end end end end end end end end end
  i32.const 6))
""", [run("run", [ti32(v)], "i32") for v in (0, 1, 2, 3, 9)])

    add("mixed_params", """
(module (func (export "run") (param i32 i64 f32 f64) (result f64)
  local.get 0 f64.convert_i32_s
  local.get 1 f64.convert_i64_s f64.add
  local.get 2 f64.promote_f32 f64.add
  local.get 3 f64.add))
""", [run("run", [ti32(1), ti64(2), tf32(0.5), tf64(0.25)], "f64"),
      run("run", [ti32(-5), ti64(1 << 40), tf32(-1.5), tf64(1e10)], "f64")])

    add("many_locals", """
(module (func (export "run") (param $n i32) (result i32)
  (local i32 i32 i32 i32 i32 i32 i32 i32 i32 i32
         i32 i32 i32 i32 i32 i32 i32 i32 i32 i32)
  local.get $n local.set 1
  local.get 1 i32.const 2 i32.mul local.set 2
  local.get 2 i32.const 3 i32.add local.set 10
  local.get 10 local.set 20
  local.get 20))
""", [run("run", [ti32(v)], "i32") for v in (0, 5, -9)])

    add("float_mix", """
(module
  (func (export "hyp") (param $a f64) (param $b f64) (result f64)
    local.get $a local.get $a f64.mul
    local.get $b local.get $b f64.mul
    f64.add f64.sqrt)
  (func (export "f32chain") (param $x f32) (result f32)
    local.get $x f32.const 2 f32.mul f32.const 1 f32.add
    local.get $x f32.div))
""", [run("hyp", [tf64(3.0), tf64(4.0)], "f64"),
      run("hyp", [tf64(1e200), tf64(1e200)], "f64"),
      run("hyp", [tf64(F64_NAN), tf64(1.0)], "f64"),
      run("f32chain", [tf32(0.5)], "f32"),
      run("f32chain", [tf32(0.0)], "f32"),
      run("f32chain", [tf32(3.0)], "f32")])

    add("int_mix", """
(module (func (export "run") (param $x i32) (result i32)
  local.get $x i32.clz
  local.get $x i32.ctz i32.add
  local.get $x i32.popcnt i32.add
  local.get $x i32.const 5 i32.rotl i32.xor))
""", [run("run", [ti32(v)], "i32") for v in (0, 1, -1, 0x00F0F0F0, -0x80000000)])

    add("i64_mix", """
(module (func (export "run") (param $x i64) (result i64)
  local.get $x i64.const 13 i64.rotr
  local.get $x i64.const 7 i64.shl i64.xor
  local.get $x i64.popcnt i64.add))
""", [run("run", [ti64(v)], "i64") for v in (0, 1, -1, 0x0123456789ABCDEF)])

    add("div_traps", """
(module
  (func (export "d32") (param i32 i32) (result i32) local.get 0 local.get 1 i32.div_s)
  (func (export "r64") (param i64 i64) (result i64) local.get 0 local.get 1 i64.rem_u))
""", [run("d32", [ti32(7), ti32(0)], "i32"),
      run("d32", [ti32(-0x80000000), ti32(-1)], "i32"),
      run("d32", [ti32(-7), ti32(2)], "i32"),
      run("r64", [ti64(7), ti64(0)], "i64"),
      run("r64", [ti64(-1), ti64(10)], "i64")])

    add("polymorphic_stack", """
(module (func (export "run") (param i32) (result i32)
  block (result i32)
    local.get 0
    if (result i32)
      i32.const 1 br 1
    else
      i32.const 2
    end
  end
  i32.const 10 i32.mul))
""", [run("run", [ti32(0)], "i32"), run("run", [ti32(1)], "i32")])

    return mods


def build_invalid_modules() -> list[dict]:
    """Modules that must be rejected; verdicts cross-checked with V8."""
    mods = []

    def bad(name, wat):
        mods.append({"name": name, "wat": wat, "skip_validate_wat": True,
                     "invocations": []})

    bad("bad_i64_add_on_i32", '(module (func (export "f") (result i64) '
        "i32.const 1 i32.const 2 i64.add))")
    bad("bad_mixed_operands", '(module (func (export "f") (result i32) '
        "i32.const 1 f32.const 2 i32.add))")
    bad("bad_br_table_arity", """
(module (func (export "f") (result i32)
  block $a (result i32)
    block $b
      i32.const 1
      i32.const 0 br_table $a $b
    end
    i32.const 2
  end))
""")
    bad("bad_unknown_local", '(module (func (export "f") (result i32) local.get 5))')
    bad("bad_unknown_global", '(module (func (export "f") (result i32) global.get 3))')
    bad("bad_unknown_func", '(module (func (export "f") call 7))')
    bad("bad_set_immutable", "(module (global $g i32 (i32.const 1)) "
        '(func (export "f") i32.const 2 global.set $g))')
    bad("bad_if_result_no_else", '(module (func (export "f") (result i32) '
        "i32.const 1 if (result i32) i32.const 2 end))")
    bad("bad_missing_result", '(module (func (export "f") (result i32) nop))')
    bad("bad_extra_value", '(module (func (export "f") i32.const 1))')
    bad("bad_label_depth", '(module (func (export "f") br 5))')
    bad("bad_select_types", '(module (func (export "f") (result i32) '
        "i32.const 1 f32.const 2 i32.const 0 select drop i32.const 1))")
    bad("bad_load_alignment", '(module (memory 1) (func (export "f") (result i32) '
        "i32.const 0 i32.load align=8))")
    bad("bad_no_memory", '(module (func (export "f") (result i32) '
        "i32.const 0 i32.load))")
    bad("bad_stack_underflow", '(module (func (export "f") (result i32) i32.add))')
    bad("bad_br_value_type", '(module (func (export "f") (result i32) '
        "block (result i32) f64.const 1 br 0 end))")
    return mods


def build_instantiate_error_modules() -> list[dict]:
    return [
        {"name": "ie_data_oob",
         "wat": '(module (memory 1) (data (i32.const 65535) "xy"))',
         "invocations": [run("nosuch", [], "void")]},
        {"name": "ie_data_way_oob",
         "wat": '(module (memory 1) (data (i32.const 70000) "x"))',
         "invocations": [run("nosuch", [], "void")]},
        {"name": "ie_elem_oob",
         "wat": "(module (table 1 funcref) (func $g) (elem (i32.const 1) $g))",
         "invocations": [run("nosuch", [], "void")]},
        {"name": "ie_start_trap",
         "wat": "(module (func $s unreachable) (start $s))",
         "invocations": [run("nosuch", [], "void")]},
    ]


def build_local_modules() -> list[dict]:
    """Assembled but not executed by V8: page-size behavior is ours alone."""
    return [
        {"name": "local_page_probe", "local_only": True, "wat": """
(module (memory 1 4)
  (func (export "size") (result i32) memory.size)
  (func (export "grow") (param i32) (result i32) local.get 0 memory.grow)
  (func (export "load8") (param i32) (result i32) local.get 0 i32.load8_u)
  (func (export "store8") (param i32) local.get 0 i32.const 170 i32.store8)
  (func (export "load32") (param i32) (result i32) local.get 0 i32.load)
  (func (export "store32") (param i32) local.get 0 i32.const -559038737 i32.store))
""", "invocations": []},
        {"name": "local_mem_min2", "local_only": True, "wat": """
(module (memory 2)
  (func (export "size") (result i32) memory.size)
  (func (export "grow") (param i32) (result i32) local.get 0 memory.grow))
""", "invocations": []},
        {"name": "local_empty", "local_only": True, "wat": "(module)",
         "invocations": []},
    ]


def main() -> int:
    modules = (build_numeric_modules() + build_exec_modules()
               + build_invalid_modules() + build_instantiate_error_modules()
               + build_local_modules())
    names = [m["name"] for m in modules]
    assert len(names) == len(set(names)), "duplicate module names"

    job = {"modules": modules}
    job_path = TOOLS / "_oracle_job.json"
    res_path = TOOLS / "_oracle_result.json"
    job_path.write_text(json.dumps(job))
    subprocess.run(["node", str(TOOLS / "ref_runner.js"), str(job_path), str(res_path)],
                   check=True)
    result = json.loads(res_path.read_text())

    by_name = {m["name"]: m for m in modules}
    frozen = {"modules": []}
    n_invocations = 0
    for rec in result["modules"]:
        src = by_name[rec["name"]]
        if "assemble_error" in rec:
            raise SystemExit(f"{rec['name']}: wabt failed: {rec['assemble_error']}")
        entry = {
            "name": rec["name"],
            "wasm_hex": rec["wasm_hex"],
            "valid": rec["valid"],
            "local_only": bool(src.get("local_only")),
        }
        if "instantiate_error" in rec:
            entry["instantiate_error"] = rec["instantiate_error"]
        if rec.get("invocations"):
            entry["invocations"] = rec["invocations"]
            n_invocations += len(rec["invocations"])
        frozen["modules"].append(entry)

    n_invalid = sum(1 for m in frozen["modules"] if not m["valid"])
    OUT_PATH.parent.mkdir(parents=True, exist_ok=True)
    OUT_PATH.write_text(json.dumps(frozen, indent=1, sort_keys=True))
    job_path.unlink()
    res_path.unlink()
    print(f"wrote {OUT_PATH}: {len(frozen['modules'])} modules "
          f"({n_invalid} invalid), {n_invocations} reference invocations")
    return 0


if __name__ == "__main__":
    sys.exit(main())
