"""Scalar numeric semantics for every supported value instruction.

One table, OPS, maps each numeric opcode to (name, operand types, result
type, callable). The validator reads the types; the interpreter binds the
callable into the compiled instruction stream.

Conventions: i32/i64 values are canonical signed Python ints
([-2^31, 2^31) and [-2^63, 2^63)); f32/f64 are Python floats, with f32
values kept exactly representable in binary32 after every f32 op. All NaN
results are canonicalized to the positive quiet NaN with zero payload, so
execution is bit-deterministic across platforms.
"""

from __future__ import annotations

import math
import struct

from . import opcodes as op
from .errors import Trap, TrapKind

U32 = 0xFFFFFFFF
U64 = 0xFFFFFFFFFFFFFFFF
I32_MIN, I32_MAX = -(1 << 31), (1 << 31) - 1
I64_MIN, I64_MAX = -(1 << 63), (1 << 63) - 1

F64_NAN = struct.unpack("<d", b"\x00\x00\x00\x00\x00\x00\xf8\x7f")[0]
F32_NAN_BITS = 0x7FC00000
F64_NAN_BITS = 0x7FF8000000000000


def s32(v: int) -> int:
    v &= U32
    return v - (1 << 32) if v >= (1 << 31) else v


def s64(v: int) -> int:
    v &= U64
    return v - (1 << 64) if v >= (1 << 63) else v


def u32(v: int) -> int:
    return v & U32


def u64(v: int) -> int:
    return v & U64


def f32(x: float) -> float:
    """Round a double to the nearest binary32 value (overflow to +-inf)."""
    try:
        return struct.unpack("<f", struct.pack("<f", x))[0]
    except OverflowError:
        return math.inf if x > 0 else -math.inf


def canon(x: float) -> float:
    return F64_NAN if x != x else x


def f32_bits(x: float) -> int:
    if x != x:
        return F32_NAN_BITS
    return struct.unpack("<I", struct.pack("<f", x))[0]


def f64_bits(x: float) -> int:
    if x != x:
        return F64_NAN_BITS
    return struct.unpack("<Q", struct.pack("<d", x))[0]


def f32_from_bits(b: int) -> float:
    return canon(struct.unpack("<f", struct.pack("<I", b & U32))[0])


def f64_from_bits(b: int) -> float:
    return canon(struct.unpack("<d", struct.pack("<Q", b & U64))[0])


# ------------------------------------------------------------ integer ops

def _idiv_s(a: int, b: int, lo: int) -> int:
    if b == 0:
        raise Trap(TrapKind.IntegerDivByZero)
    if a == lo and b == -1:
        raise Trap(TrapKind.IntegerOverflow)
    q = abs(a) // abs(b)
    return q if (a < 0) == (b < 0) else -q


def _irem_s(a: int, b: int) -> int:
    if b == 0:
        raise Trap(TrapKind.IntegerDivByZero)
    r = abs(a) % abs(b)
    return r if a >= 0 else -r


def _idiv_u(a: int, b: int) -> int:
    if b == 0:
        raise Trap(TrapKind.IntegerDivByZero)
    return a // b


def _irem_u(a: int, b: int) -> int:
    if b == 0:
        raise Trap(TrapKind.IntegerDivByZero)
    return a % b


def _clz(v: int, width: int) -> int:
    return width - v.bit_length()


def _ctz(v: int, width: int) -> int:
    return (v & -v).bit_length() - 1 if v else width


def _rotl(v: int, n: int, width: int, mask: int) -> int:
    n %= width
    return ((v << n) | (v >> (width - n))) & mask if n else v


def _rotr(v: int, n: int, width: int, mask: int) -> int:
    n %= width
    return ((v >> n) | (v << (width - n))) & mask if n else v


def _sext(v: int, frombits: int) -> int:
    m = 1 << (frombits - 1)
    v &= (1 << frombits) - 1
    return (v ^ m) - m


# -------------------------------------------------------------- float ops

def _fmin(a: float, b: float) -> float:
    if a != a or b != b:
        return F64_NAN
    if a == b:  # pick -0 over +0
        return a if math.copysign(1.0, a) < math.copysign(1.0, b) else b
    return a if a < b else b


def _fmax(a: float, b: float) -> float:
    if a != a or b != b:
        return F64_NAN
    if a == b:
        return a if math.copysign(1.0, a) > math.copysign(1.0, b) else b
    return a if a > b else b


def _fsqrt(x: float) -> float:
    if x != x or x < 0:
        return F64_NAN
    return math.sqrt(x)  # sqrt(-0.0) is -0.0, no trap


def _fceil(x: float) -> float:
    if x != x:
        return F64_NAN
    if math.isinf(x) or x == 0.0:
        return x
    r = float(math.ceil(x))
    return math.copysign(0.0, x) if r == 0.0 else r


def _ffloor(x: float) -> float:
    if x != x:
        return F64_NAN
    if math.isinf(x) or x == 0.0:
        return x
    r = float(math.floor(x))
    return math.copysign(0.0, x) if r == 0.0 else r


def _ftrunc(x: float) -> float:
    if x != x:
        return F64_NAN
    if math.isinf(x) or x == 0.0:
        return x
    r = float(math.trunc(x))
    return math.copysign(0.0, x) if r == 0.0 else r


def _fnearest(x: float) -> float:
    if x != x:
        return F64_NAN
    if math.isinf(x) or x == 0.0:
        return x
    r = float(round(x))  # round() ties to even
    return math.copysign(0.0, x) if r == 0.0 else r


def _fcopysign(a: float, b: float) -> float:
    return canon(math.copysign(a, b))


def _fdiv(a: float, b: float) -> float:
    if b == 0.0:
        if a != a or a == 0.0:
            return F64_NAN
        # sign of the zero divisor participates: 1 / -0 = -inf
        return math.copysign(math.inf, a) * math.copysign(1.0, b)
    return a / b


def _fneg(x: float) -> float:
    return canon(-x)


def _fabs(x: float) -> float:
    return canon(math.fabs(x))


# -------------------------------------------------------------- conversion

def _trunc_checked(x: float, lo: int, hi: int) -> int:
    if x != x:
        raise Trap(TrapKind.InvalidConversion)
    if math.isinf(x):
        raise Trap(TrapKind.IntegerOverflow)
    t = math.trunc(x)
    if t < lo or t > hi:
        raise Trap(TrapKind.IntegerOverflow)
    return t


def _trunc_sat(x: float, lo: int, hi: int) -> int:
    if x != x:
        return 0
    if x == math.inf:
        return hi
    if x == -math.inf:
        return lo
    t = math.trunc(x)
    return lo if t < lo else hi if t > hi else t


def _f32_from_int(v: int) -> float:
    """Correctly rounded int -> binary32 (round-to-odd through binary64)."""
    n = abs(v)
    if n < (1 << 53):
        return f32(float(v))
    sh = n.bit_length() - 53
    top = n >> sh
    if (top << sh) != n:
        top |= 1  # sticky bit: round-to-odd avoids double rounding
    d = math.ldexp(float(top), sh)
    return f32(d if v >= 0 else -d)


# ------------------------------------------------------------------ table

# opcode: (name, operand types, result type, fn)
OPS: dict[int, tuple] = {}


def _d(code: int, name: str, ins: str, out: str, fn):
    assert code not in OPS
    OPS[code] = (name, tuple(ins.split()), (out,), fn)


# i32 comparisons / unary tests
_d(0x45, "i32.eqz", "i32", "i32", lambda a: 1 if a == 0 else 0)
_d(0x46, "i32.eq", "i32 i32", "i32", lambda a, b: 1 if a == b else 0)
_d(0x47, "i32.ne", "i32 i32", "i32", lambda a, b: 1 if a != b else 0)
_d(0x48, "i32.lt_s", "i32 i32", "i32", lambda a, b: 1 if a < b else 0)
_d(0x49, "i32.lt_u", "i32 i32", "i32", lambda a, b: 1 if u32(a) < u32(b) else 0)
_d(0x4A, "i32.gt_s", "i32 i32", "i32", lambda a, b: 1 if a > b else 0)
_d(0x4B, "i32.gt_u", "i32 i32", "i32", lambda a, b: 1 if u32(a) > u32(b) else 0)
_d(0x4C, "i32.le_s", "i32 i32", "i32", lambda a, b: 1 if a <= b else 0)
_d(0x4D, "i32.le_u", "i32 i32", "i32", lambda a, b: 1 if u32(a) <= u32(b) else 0)
_d(0x4E, "i32.ge_s", "i32 i32", "i32", lambda a, b: 1 if a >= b else 0)
_d(0x4F, "i32.ge_u", "i32 i32", "i32", lambda a, b: 1 if u32(a) >= u32(b) else 0)

# i64 comparisons
_d(0x50, "i64.eqz", "i64", "i32", lambda a: 1 if a == 0 else 0)
_d(0x51, "i64.eq", "i64 i64", "i32", lambda a, b: 1 if a == b else 0)
_d(0x52, "i64.ne", "i64 i64", "i32", lambda a, b: 1 if a != b else 0)
_d(0x53, "i64.lt_s", "i64 i64", "i32", lambda a, b: 1 if a < b else 0)
_d(0x54, "i64.lt_u", "i64 i64", "i32", lambda a, b: 1 if u64(a) < u64(b) else 0)
_d(0x55, "i64.gt_s", "i64 i64", "i32", lambda a, b: 1 if a > b else 0)
_d(0x56, "i64.gt_u", "i64 i64", "i32", lambda a, b: 1 if u64(a) > u64(b) else 0)
_d(0x57, "i64.le_s", "i64 i64", "i32", lambda a, b: 1 if a <= b else 0)
_d(0x58, "i64.le_u", "i64 i64", "i32", lambda a, b: 1 if u64(a) <= u64(b) else 0)
_d(0x59, "i64.ge_s", "i64 i64", "i32", lambda a, b: 1 if a >= b else 0)
_d(0x5A, "i64.ge_u", "i64 i64", "i32", lambda a, b: 1 if u64(a) >= u64(b) else 0)

# float comparisons (NaN compares false, ne true)
for _c, _t in ((0x5B, "f32"), (0x61, "f64")):
    _d(_c + 0, f"{_t}.eq", f"{_t} {_t}", "i32", lambda a, b: 1 if a == b else 0)
    _d(_c + 1, f"{_t}.ne", f"{_t} {_t}", "i32", lambda a, b: 1 if a != b else 0)
    _d(_c + 2, f"{_t}.lt", f"{_t} {_t}", "i32", lambda a, b: 1 if a < b else 0)
    _d(_c + 3, f"{_t}.gt", f"{_t} {_t}", "i32", lambda a, b: 1 if a > b else 0)
    _d(_c + 4, f"{_t}.le", f"{_t} {_t}", "i32", lambda a, b: 1 if a <= b else 0)
    _d(_c + 5, f"{_t}.ge", f"{_t} {_t}", "i32", lambda a, b: 1 if a >= b else 0)

# i32 arithmetic
_d(0x67, "i32.clz", "i32", "i32", lambda a: _clz(u32(a), 32))
_d(0x68, "i32.ctz", "i32", "i32", lambda a: _ctz(u32(a), 32))
_d(0x69, "i32.popcnt", "i32", "i32", lambda a: u32(a).bit_count())
_d(0x6A, "i32.add", "i32 i32", "i32", lambda a, b: s32(a + b))
_d(0x6B, "i32.sub", "i32 i32", "i32", lambda a, b: s32(a - b))
_d(0x6C, "i32.mul", "i32 i32", "i32", lambda a, b: s32(a * b))
_d(0x6D, "i32.div_s", "i32 i32", "i32", lambda a, b: _idiv_s(a, b, I32_MIN))
_d(0x6E, "i32.div_u", "i32 i32", "i32", lambda a, b: s32(_idiv_u(u32(a), u32(b))))
_d(0x6F, "i32.rem_s", "i32 i32", "i32", _irem_s)
_d(0x70, "i32.rem_u", "i32 i32", "i32", lambda a, b: s32(_irem_u(u32(a), u32(b))))
_d(0x71, "i32.and", "i32 i32", "i32", lambda a, b: s32(u32(a) & u32(b)))
_d(0x72, "i32.or", "i32 i32", "i32", lambda a, b: s32(u32(a) | u32(b)))
_d(0x73, "i32.xor", "i32 i32", "i32", lambda a, b: s32(u32(a) ^ u32(b)))
_d(0x74, "i32.shl", "i32 i32", "i32", lambda a, b: s32(u32(a) << (b & 31)))
_d(0x75, "i32.shr_s", "i32 i32", "i32", lambda a, b: a >> (b & 31))
_d(0x76, "i32.shr_u", "i32 i32", "i32", lambda a, b: s32(u32(a) >> (b & 31)))
_d(0x77, "i32.rotl", "i32 i32", "i32", lambda a, b: s32(_rotl(u32(a), b, 32, U32)))
_d(0x78, "i32.rotr", "i32 i32", "i32", lambda a, b: s32(_rotr(u32(a), b, 32, U32)))

# i64 arithmetic
_d(0x79, "i64.clz", "i64", "i64", lambda a: _clz(u64(a), 64))
_d(0x7A, "i64.ctz", "i64", "i64", lambda a: _ctz(u64(a), 64))
_d(0x7B, "i64.popcnt", "i64", "i64", lambda a: u64(a).bit_count())
_d(0x7C, "i64.add", "i64 i64", "i64", lambda a, b: s64(a + b))
_d(0x7D, "i64.sub", "i64 i64", "i64", lambda a, b: s64(a - b))
_d(0x7E, "i64.mul", "i64 i64", "i64", lambda a, b: s64(a * b))
_d(0x7F, "i64.div_s", "i64 i64", "i64", lambda a, b: _idiv_s(a, b, I64_MIN))
_d(0x80, "i64.div_u", "i64 i64", "i64", lambda a, b: s64(_idiv_u(u64(a), u64(b))))
_d(0x81, "i64.rem_s", "i64 i64", "i64", _irem_s)
_d(0x82, "i64.rem_u", "i64 i64", "i64", lambda a, b: s64(_irem_u(u64(a), u64(b))))
_d(0x83, "i64.and", "i64 i64", "i64", lambda a, b: s64(u64(a) & u64(b)))
_d(0x84, "i64.or", "i64 i64", "i64", lambda a, b: s64(u64(a) | u64(b)))
_d(0x85, "i64.xor", "i64 i64", "i64", lambda a, b: s64(u64(a) ^ u64(b)))
_d(0x86, "i64.shl", "i64 i64", "i64", lambda a, b: s64(u64(a) << (b & 63)))
_d(0x87, "i64.shr_s", "i64 i64", "i64", lambda a, b: a >> (b & 63))
_d(0x88, "i64.shr_u", "i64 i64", "i64", lambda a, b: s64(u64(a) >> (b & 63)))
_d(0x89, "i64.rotl", "i64 i64", "i64", lambda a, b: s64(_rotl(u64(a), b, 64, U64)))
_d(0x8A, "i64.rotr", "i64 i64", "i64", lambda a, b: s64(_rotr(u64(a), b, 64, U64)))

# f32 arithmetic (compute in double, round once: exact for + - * / sqrt)
_d(0x8B, "f32.abs", "f32", "f32", _fabs)
_d(0x8C, "f32.neg", "f32", "f32", _fneg)
_d(0x8D, "f32.ceil", "f32", "f32", lambda a: f32(_fceil(a)))
_d(0x8E, "f32.floor", "f32", "f32", lambda a: f32(_ffloor(a)))
_d(0x8F, "f32.trunc", "f32", "f32", lambda a: f32(_ftrunc(a)))
_d(0x90, "f32.nearest", "f32", "f32", lambda a: f32(_fnearest(a)))
_d(0x91, "f32.sqrt", "f32", "f32", lambda a: f32(_fsqrt(a)))
_d(0x92, "f32.add", "f32 f32", "f32", lambda a, b: canon(f32(a + b)))
_d(0x93, "f32.sub", "f32 f32", "f32", lambda a, b: canon(f32(a - b)))
_d(0x94, "f32.mul", "f32 f32", "f32", lambda a, b: canon(f32(a * b)))
_d(0x95, "f32.div", "f32 f32", "f32", lambda a, b: canon(f32(_fdiv(a, b))))
_d(0x96, "f32.min", "f32 f32", "f32", _fmin)
_d(0x97, "f32.max", "f32 f32", "f32", _fmax)
_d(0x98, "f32.copysign", "f32 f32", "f32", _fcopysign)

# f64 arithmetic
_d(0x99, "f64.abs", "f64", "f64", _fabs)
_d(0x9A, "f64.neg", "f64", "f64", _fneg)
_d(0x9B, "f64.ceil", "f64", "f64", _fceil)
_d(0x9C, "f64.floor", "f64", "f64", _ffloor)
_d(0x9D, "f64.trunc", "f64", "f64", _ftrunc)
_d(0x9E, "f64.nearest", "f64", "f64", _fnearest)
_d(0x9F, "f64.sqrt", "f64", "f64", _fsqrt)
_d(0xA0, "f64.add", "f64 f64", "f64", lambda a, b: canon(a + b))
_d(0xA1, "f64.sub", "f64 f64", "f64", lambda a, b: canon(a - b))
_d(0xA2, "f64.mul", "f64 f64", "f64", lambda a, b: canon(a * b))
_d(0xA3, "f64.div", "f64 f64", "f64", lambda a, b: canon(_fdiv(a, b)))
_d(0xA4, "f64.min", "f64 f64", "f64", _fmin)
_d(0xA5, "f64.max", "f64 f64", "f64", _fmax)
_d(0xA6, "f64.copysign", "f64 f64", "f64", _fcopysign)

# conversions
_d(0xA7, "i32.wrap_i64", "i64", "i32", s32)
_d(0xA8, "i32.trunc_f32_s", "f32", "i32", lambda a: _trunc_checked(a, I32_MIN, I32_MAX))
_d(0xA9, "i32.trunc_f32_u", "f32", "i32", lambda a: s32(_trunc_checked(a, 0, U32)))
_d(0xAA, "i32.trunc_f64_s", "f64", "i32", lambda a: _trunc_checked(a, I32_MIN, I32_MAX))
_d(0xAB, "i32.trunc_f64_u", "f64", "i32", lambda a: s32(_trunc_checked(a, 0, U32)))
_d(0xAC, "i64.extend_i32_s", "i32", "i64", lambda a: a)
_d(0xAD, "i64.extend_i32_u", "i32", "i64", u32)
_d(0xAE, "i64.trunc_f32_s", "f32", "i64", lambda a: _trunc_checked(a, I64_MIN, I64_MAX))
_d(0xAF, "i64.trunc_f32_u", "f32", "i64", lambda a: s64(_trunc_checked(a, 0, U64)))
_d(0xB0, "i64.trunc_f64_s", "f64", "i64", lambda a: _trunc_checked(a, I64_MIN, I64_MAX))
_d(0xB1, "i64.trunc_f64_u", "f64", "i64", lambda a: s64(_trunc_checked(a, 0, U64)))
_d(0xB2, "f32.convert_i32_s", "i32", "f32", lambda a: f32(float(a)))
_d(0xB3, "f32.convert_i32_u", "i32", "f32", lambda a: f32(float(u32(a))))
_d(0xB4, "f32.convert_i64_s", "i64", "f32", _f32_from_int)
_d(0xB5, "f32.convert_i64_u", "i64", "f32", lambda a: _f32_from_int(u64(a)))
_d(0xB6, "f32.demote_f64", "f64", "f32", lambda a: canon(f32(a)))
_d(0xB7, "f64.convert_i32_s", "i32", "f64", float)
_d(0xB8, "f64.convert_i32_u", "i32", "f64", lambda a: float(u32(a)))
_d(0xB9, "f64.convert_i64_s", "i64", "f64", float)
_d(0xBA, "f64.convert_i64_u", "i64", "f64", lambda a: float(u64(a)))
_d(0xBB, "f64.promote_f32", "f32", "f64", canon)
_d(0xBC, "i32.reinterpret_f32", "f32", "i32", lambda a: s32(f32_bits(a)))
_d(0xBD, "i64.reinterpret_f64", "f64", "i64", lambda a: s64(f64_bits(a)))
_d(0xBE, "f32.reinterpret_i32", "i32", "f32", lambda a: f32_from_bits(u32(a)))
_d(0xBF, "f64.reinterpret_i64", "i64", "f64", lambda a: f64_from_bits(u64(a)))

# sign extensions
_d(0xC0, "i32.extend8_s", "i32", "i32", lambda a: _sext(a, 8))
_d(0xC1, "i32.extend16_s", "i32", "i32", lambda a: _sext(a, 16))
_d(0xC2, "i64.extend8_s", "i64", "i64", lambda a: _sext(a, 8))
_d(0xC3, "i64.extend16_s", "i64", "i64", lambda a: _sext(a, 16))
_d(0xC4, "i64.extend32_s", "i64", "i64", lambda a: _sext(a, 32))

# saturating truncations
_d(op.I32_TRUNC_SAT_F32_S, "i32.trunc_sat_f32_s", "f32", "i32",
   lambda a: _trunc_sat(a, I32_MIN, I32_MAX))
_d(op.I32_TRUNC_SAT_F32_U, "i32.trunc_sat_f32_u", "f32", "i32",
   lambda a: s32(_trunc_sat(a, 0, U32)))
_d(op.I32_TRUNC_SAT_F64_S, "i32.trunc_sat_f64_s", "f64", "i32",
   lambda a: _trunc_sat(a, I32_MIN, I32_MAX))
_d(op.I32_TRUNC_SAT_F64_U, "i32.trunc_sat_f64_u", "f64", "i32",
   lambda a: s32(_trunc_sat(a, 0, U32)))
_d(op.I64_TRUNC_SAT_F32_S, "i64.trunc_sat_f32_s", "f32", "i64",
   lambda a: _trunc_sat(a, I64_MIN, I64_MAX))
_d(op.I64_TRUNC_SAT_F32_U, "i64.trunc_sat_f32_u", "f32", "i64",
   lambda a: s64(_trunc_sat(a, 0, U64)))
_d(op.I64_TRUNC_SAT_F64_S, "i64.trunc_sat_f64_s", "f64", "i64",
   lambda a: _trunc_sat(a, I64_MIN, I64_MAX))
_d(op.I64_TRUNC_SAT_F64_U, "i64.trunc_sat_f64_u", "f64", "i64",
   lambda a: s64(_trunc_sat(a, 0, U64)))
