#!/usr/bin/env node
// Assemble one WAT file to wasm with the corpus feature set (no SIMD,
// no reference types, no bulk memory, no multi-value).
// Usage: node wat2wasm.js in.wat out.wasm

"use strict";
const fs = require("fs");

const FEATURES = {
  exceptions: false, mutable_globals: true, sat_float_to_int: true,
  sign_extension: true, simd: false, threads: false, multi_value: false,
  tail_call: false, bulk_memory: false, reference_types: false,
};

(async () => {
  const wabt = await require("wabt")();
  const src = fs.readFileSync(process.argv[2], "utf8");
  const m = wabt.parseWat(process.argv[2], src, FEATURES);
  m.resolveNames();
  m.validate();
  const bin = m.toBinary({ canonicalize_lebs: true, write_debug_names: false });
  fs.writeFileSync(process.argv[3], Buffer.from(bin.buffer));
  m.destroy();
})().catch((e) => { console.error(String(e.message || e)); process.exit(1); });
