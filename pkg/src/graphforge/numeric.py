"""Scalar arithmetic primitives with fixed, reproducible semantics.

Single-precision results are produced by computing in double precision and
rounding once through an IEEE-754 binary32 representation.  64-bit integers
wrap as two's complement.  All helpers are total: out-of-range float results
become infinities, invalid ones become NaN, never exceptions.
"""

from __future__ import annotations

import math
import struct

_F32 = struct.Struct("<f")

# Doubles at or above this magnitude round to binary32 infinity.
_F32_OVERFLOW = (2.0 - 2.0**-24) * 2.0**127

_I64_MASK = (1 << 64) - 1
_I64_SIGN = 1 << 63


def round_f32(x: float) -> float:
    """Nearest binary32 value of `x`, returned as a double."""
    if math.isnan(x) or math.isinf(x):
        return x
    if x >= _F32_OVERFLOW:
        return math.inf
    if x <= -_F32_OVERFLOW:
        return -math.inf
    return _F32.unpack(_F32.pack(x))[0]


def wrap_i64(v: int) -> int:
    """Two's-complement 64-bit wrap of an arbitrary Python int."""
    return ((v + _I64_SIGN) & _I64_MASK) - _I64_SIGN


def safe_div(x: float, y: float) -> float:
    """IEEE-754 division: zero divisors give signed infinity or NaN."""
    if y != 0.0:
        return x / y
    if x != x or x == 0.0:
        return math.nan
    sign = math.copysign(1.0, x) * math.copysign(1.0, y)
    return math.copysign(math.inf, sign)


def safe_exp(x: float) -> float:
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


def safe_log(x: float) -> float:
    if x != x:
        return x
    if x < 0.0:
        return math.nan
    if x == 0.0:
        return -math.inf
    return math.log(x)


def sigmoid(x: float) -> float:
    # Branch keeps exp() argument non-positive, so it never overflows.
    if x != x:
        return x
    if x >= 0.0:
        return 1.0 / (1.0 + safe_exp(-x))
    e = safe_exp(x)
    return e / (1.0 + e)


def binary_maximum(x: float, y: float) -> float:
    """First operand wins ties; a NaN first operand yields the second."""
    return x if x >= y else y


def float_bits(x: float) -> bytes:
    return struct.pack("<d", x)


def floats_bit_equal(x: float, y: float) -> bool:
    return struct.pack("<d", x) == struct.pack("<d", y)
