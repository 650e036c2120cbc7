#!/usr/bin/env node
// Reference oracle runner: assembles WAT with wabt, then validates and
// executes the binaries on V8's WebAssembly engine. Reads a job JSON file
// and writes a result JSON file; the Python generator freezes the results
// into the repo's test data.
//
// Job format:
//   { "modules": [ { "name": str, "wat": str,
//                    "skip_validate_wat": bool,   // emit without wabt validation
//                    "invocations": [ { "export": str, "args": [typed...],
//                                       "result_type": "i32"|"i64"|"f32"|"f64"|"void" } ] } ] }
// Typed value: {"t":"i32","v":n} | {"t":"i64","v":"dec"} |
//              {"t":"f32","bits":"xxxxxxxx"} | {"t":"f64","bits":"x16"}

"use strict";
const fs = require("fs");

const FEATURES = {
  exceptions: false,
  mutable_globals: true,
  sat_float_to_int: true,
  sign_extension: true,
  simd: false,
  threads: false,
  function_references: false,
  multi_value: false,
  tail_call: false,
  bulk_memory: false,
  reference_types: false,
  annotations: false,
  gc: false,
  memory64: false,
  multi_memory: false,
  extended_const: false,
  relaxed_simd: false,
};

function decodeArg(a) {
  switch (a.t) {
    case "i32": return a.v | 0;
    case "i64": return BigInt(a.v);
    case "f32": {
      const dv = new DataView(new ArrayBuffer(4));
      dv.setUint32(0, parseInt(a.bits, 16), false);
      return dv.getFloat32(0, false);
    }
    case "f64": {
      const dv = new DataView(new ArrayBuffer(8));
      dv.setBigUint64(0, BigInt("0x" + a.bits), false);
      return dv.getFloat64(0, false);
    }
    default: throw new Error("bad arg type " + a.t);
  }
}

function encodeResult(v, t) {
  switch (t) {
    case "void": return { t: "void" };
    case "i32": return { t: "i32", v: v | 0 };
    case "i64": return { t: "i64", v: v.toString() };
    case "f32": {
      const f = Math.fround(v);
      const dv = new DataView(new ArrayBuffer(4));
      dv.setFloat32(0, f, false);
      return { t: "f32", bits: dv.getUint32(0, false).toString(16).padStart(8, "0") };
    }
    case "f64": {
      const dv = new DataView(new ArrayBuffer(8));
      dv.setFloat64(0, v, false);
      return { t: "f64", bits: dv.getBigUint64(0, false).toString(16).padStart(16, "0") };
    }
    default: throw new Error("bad result type " + t);
  }
}

async function main() {
  const wabt = await require("wabt")();
  const job = JSON.parse(fs.readFileSync(process.argv[2], "utf8"));
  const out = { modules: [] };

  for (const m of job.modules) {
    const rec = { name: m.name };
    let bin;
    try {
      const parsed = wabt.parseWat(m.name + ".wat", m.wat, FEATURES);
      parsed.resolveNames();
      if (!m.skip_validate_wat) parsed.validate();
      bin = parsed.toBinary({ canonicalize_lebs: true, write_debug_names: false }).buffer;
      parsed.destroy();
    } catch (e) {
      rec.assemble_error = String(e.message || e);
      out.modules.push(rec);
      continue;
    }
    rec.wasm_hex = Buffer.from(bin).toString("hex");
    rec.valid = WebAssembly.validate(bin);
    if (!rec.valid || !m.invocations || m.invocations.length === 0) {
      out.modules.push(rec);
      continue;
    }
    let inst;
    try {
      inst = new WebAssembly.Instance(new WebAssembly.Module(bin), {});
    } catch (e) {
      rec.instantiate_error = String(e.message || e);
      rec.instantiate_error_type = e.constructor.name;
      out.modules.push(rec);
      continue;
    }
    rec.invocations = [];
    for (const call of m.invocations) {
      const args = call.args.map(decodeArg);
      const r = { export: call.export, args: call.args, result_type: call.result_type };
      try {
        const v = inst.exports[call.export](...args);
        r.expected = encodeResult(v, call.result_type);
      } catch (e) {
        r.trap = String(e.message || e);
        r.trap_type = e.constructor.name;
      }
      rec.invocations.push(r);
    }
    out.modules.push(rec);
  }
  fs.writeFileSync(process.argv[3], JSON.stringify(out, null, 1));
}

main().catch((e) => { console.error(e); process.exit(1); });
