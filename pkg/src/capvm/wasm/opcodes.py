"""Opcode constants for the supported core-Wasm instruction subset.

Saturating truncations live under the 0xFC prefix on the wire; they are
re-tagged here as 0xFC00|sub so every decoded instruction carries a single
integer opcode.
"""

UNREACHABLE = 0x00
NOP = 0x01
BLOCK = 0x02
LOOP = 0x03
IF = 0x04
ELSE = 0x05
END = 0x0B
BR = 0x0C
BR_IF = 0x0D
BR_TABLE = 0x0E
RETURN = 0x0F
CALL = 0x10
CALL_INDIRECT = 0x11

DROP = 0x1A
SELECT = 0x1B

LOCAL_GET = 0x20
LOCAL_SET = 0x21
LOCAL_TEE = 0x22
GLOBAL_GET = 0x23
GLOBAL_SET = 0x24

I32_LOAD = 0x28
I64_LOAD = 0x29
F32_LOAD = 0x2A
F64_LOAD = 0x2B
I32_LOAD8_S = 0x2C
I32_LOAD8_U = 0x2D
I32_LOAD16_S = 0x2E
I32_LOAD16_U = 0x2F
I64_LOAD8_S = 0x30
I64_LOAD8_U = 0x31
I64_LOAD16_S = 0x32
I64_LOAD16_U = 0x33
I64_LOAD32_S = 0x34
I64_LOAD32_U = 0x35
I32_STORE = 0x36
I64_STORE = 0x37
F32_STORE = 0x38
F64_STORE = 0x39
I32_STORE8 = 0x3A
I32_STORE16 = 0x3B
I64_STORE8 = 0x3C
I64_STORE16 = 0x3D
I64_STORE32 = 0x3E
MEMORY_SIZE = 0x3F
MEMORY_GROW = 0x40

I32_CONST = 0x41
I64_CONST = 0x42
F32_CONST = 0x43
F64_CONST = 0x44

# 0x45..0xBF are plain numeric ops; 0xC0..0xC4 are sign extensions.
# Their per-opcode signatures and semantics live in numerics.OPS.

FC_PREFIX = 0xFC


def fc_op(sub: int) -> int:
    return 0xFC00 | sub


# Saturating truncations (0xFC sub-opcodes 0..7).
I32_TRUNC_SAT_F32_S = fc_op(0)
I32_TRUNC_SAT_F32_U = fc_op(1)
I32_TRUNC_SAT_F64_S = fc_op(2)
I32_TRUNC_SAT_F64_U = fc_op(3)
I64_TRUNC_SAT_F32_S = fc_op(4)
I64_TRUNC_SAT_F32_U = fc_op(5)
I64_TRUNC_SAT_F64_S = fc_op(6)
I64_TRUNC_SAT_F64_U = fc_op(7)

# Opcodes belonging to excluded proposals, mapped to the feature name the
# parser reports in UnsupportedFeature.
UNSUPPORTED = {}
for _op in range(0x06, 0x0B):
    UNSUPPORTED[_op] = "exceptions"
UNSUPPORTED[0x12] = "tail-calls"
UNSUPPORTED[0x13] = "tail-calls"
UNSUPPORTED[0x14] = "function-references"
UNSUPPORTED[0x1C] = "reference-types"  # select with type annotation
UNSUPPORTED[0x25] = "reference-types"  # table.get
UNSUPPORTED[0x26] = "reference-types"  # table.set
UNSUPPORTED[0xD0] = "reference-types"
UNSUPPORTED[0xD1] = "reference-types"
UNSUPPORTED[0xD2] = "reference-types"
UNSUPPORTED[0xFB] = "gc"
UNSUPPORTED[0xFD] = "simd"
UNSUPPORTED[0xFE] = "threads"

# 0xFC sub-opcodes beyond the saturating truncations.
UNSUPPORTED_FC = {}
for _sub in range(8, 12):
    UNSUPPORTED_FC[_sub] = "bulk-memory"  # memory.init/data.drop/memory.copy/fill
for _sub in range(12, 18):
    UNSUPPORTED_FC[_sub] = "reference-types"  # table.* ops

MEMOPS = {
    # opcode: (name, "load"/"store", valtype, byte width)
    I32_LOAD: ("i32.load", "load", "i32", 4),
    I64_LOAD: ("i64.load", "load", "i64", 8),
    F32_LOAD: ("f32.load", "load", "f32", 4),
    F64_LOAD: ("f64.load", "load", "f64", 8),
    I32_LOAD8_S: ("i32.load8_s", "load", "i32", 1),
    I32_LOAD8_U: ("i32.load8_u", "load", "i32", 1),
    I32_LOAD16_S: ("i32.load16_s", "load", "i32", 2),
    I32_LOAD16_U: ("i32.load16_u", "load", "i32", 2),
    I64_LOAD8_S: ("i64.load8_s", "load", "i64", 1),
    I64_LOAD8_U: ("i64.load8_u", "load", "i64", 1),
    I64_LOAD16_S: ("i64.load16_s", "load", "i64", 2),
    I64_LOAD16_U: ("i64.load16_u", "load", "i64", 2),
    I64_LOAD32_S: ("i64.load32_s", "load", "i64", 4),
    I64_LOAD32_U: ("i64.load32_u", "load", "i64", 4),
    I32_STORE: ("i32.store", "store", "i32", 4),
    I64_STORE: ("i64.store", "store", "i64", 8),
    F32_STORE: ("f32.store", "store", "f32", 4),
    F64_STORE: ("f64.store", "store", "f64", 8),
    I32_STORE8: ("i32.store8", "store", "i32", 1),
    I32_STORE16: ("i32.store16", "store", "i32", 2),
    I64_STORE8: ("i64.store8", "store", "i64", 1),
    I64_STORE16: ("i64.store16", "store", "i64", 2),
    I64_STORE32: ("i64.store32", "store", "i64", 4),
}
