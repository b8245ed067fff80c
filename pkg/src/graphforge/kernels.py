"""Layout-aware scalar kernels for every op the interpreter executes.

All kernels iterate logical indices in ascending row-major order and use
fixed accumulation orders (Sum: reduced axes ascending; Dot: inner dimension
ascending; Conv2D: channel, then filter row, then filter column), so repeated
execution is bit-reproducible regardless of storage layout.

F32 arithmetic rounds to binary32 after every primitive operation; I64
arithmetic wraps as two's complement.
"""

from __future__ import annotations

import itertools
import math
from typing import Mapping, Sequence

from .errors import UnsupportedOp
from .ir import ElementType, OpKind
from .numeric import (
    binary_maximum,
    round_f32,
    safe_div,
    safe_exp,
    safe_log,
    sigmoid,
    wrap_i64,
)
from .tensor import TensorValue, tensor_from_flat


def _f32_wrap1(f):
    return lambda x: round_f32(f(x))


def _f32_wrap2(f):
    return lambda x, y: round_f32(f(x, y))


def _i64_wrap1(f):
    return lambda x: wrap_i64(f(x))


def _i64_wrap2(f):
    return lambda x, y: wrap_i64(f(x, y))


_BINARY_RAW = {
    OpKind.ADD: lambda x, y: x + y,
    OpKind.SUBTRACT: lambda x, y: x - y,
    OpKind.MULTIPLY: lambda x, y: x * y,
    OpKind.DIVIDE: safe_div,
    OpKind.MAXIMUM: binary_maximum,
}

_UNARY_RAW = {
    OpKind.NEGATE: lambda x: -x,
    OpKind.EXP: safe_exp,
    OpKind.LOG: safe_log,
    OpKind.TANH: math.tanh,
    OpKind.SIGMOID: sigmoid,
    OpKind.RELU: lambda x: x if x > 0.0 else 0.0,
}


def _binary_fn(kind: OpKind, et: ElementType):
    raw = _BINARY_RAW[kind]
    if et is ElementType.F32:
        return _f32_wrap2(raw)
    if et is ElementType.I64:
        return _i64_wrap2(raw)
    return raw


def _unary_fn(kind: OpKind, et: ElementType):
    raw = _UNARY_RAW[kind]
    if et is ElementType.F32:
        return _f32_wrap1(raw)
    if et is ElementType.I64:
        return _i64_wrap1(raw)
    return raw


def _add_fn(et: ElementType):
    return _binary_fn(OpKind.ADD, et)


def _mul_fn(et: ElementType):
    return _binary_fn(OpKind.MULTIPLY, et)


def constant_value(attrs: Mapping) -> TensorValue:
    """Materialize a Constant node's attributes as an identity-layout tensor."""
    return tensor_from_flat(attrs["element_type"], attrs["shape"], attrs["data"])


def _all_identity(tensors: Sequence[TensorValue]) -> bool:
    return all(t.layout.is_identity for t in tensors)


def _run_elementwise_binary(kind, a: TensorValue, b: TensorValue, out: TensorValue):
    f = _binary_fn(kind, out.element_type)
    if _all_identity((a, b, out)):
        ab, bb, ob = a.buffer, b.buffer, out.buffer
        for i in range(len(ob)):
            ob[i] = f(ab[i], bb[i])
        return
    for idx in out.indices():
        out.set(idx, f(a.get(idx), b.get(idx)))


def _run_elementwise_unary(kind, a: TensorValue, out: TensorValue):
    f = _unary_fn(kind, out.element_type)
    if _all_identity((a, out)):
        ab, ob = a.buffer, out.buffer
        for i in range(len(ob)):
            ob[i] = f(ab[i])
        return
    for idx in out.indices():
        out.set(idx, f(a.get(idx)))


def _run_dot(a: TensorValue, b: TensorValue, out: TensorValue):
    add = _add_fn(out.element_type)
    mul = _mul_fn(out.element_type)
    (m, k_extent) = a.shape
    n = b.shape[1]
    for i in range(m):
        for j in range(n):
            acc = 0.0
            for k in range(k_extent):
                acc = add(acc, mul(a.get((i, k)), b.get((k, j))))
            out.set((i, j), acc)


def _run_broadcast(attrs, a: TensorValue, out: TensorValue):
    axes = set(attrs["broadcast_axes"])
    kept = [i for i in range(len(out.shape)) if i not in axes]
    for idx in out.indices():
        out.set(idx, a.get(tuple(idx[i] for i in kept)))


def _run_reshape(attrs, a: TensorValue, out: TensorValue):
    # Permute the input axes, then read the permuted tensor in row-major
    # order into the output shape.
    order = attrs["input_order"]
    perm_dims = [a.shape[axis] for axis in order]
    src = [0] * len(order)
    out_indices = out.indices()
    for perm_idx in itertools.product(*(range(d) for d in perm_dims)):
        for pos, axis in enumerate(order):
            src[axis] = perm_idx[pos]
        out.set(next(out_indices), a.get(tuple(src)))


def _run_sum(attrs, a: TensorValue, out: TensorValue):
    axes = list(attrs["reduction_axes"])
    kind = attrs["reduction_kind"]
    et = out.element_type
    kept = [i for i in range(len(a.shape)) if i not in set(axes)]
    reduced_dims = [a.shape[i] for i in axes]
    if kind == "sum":
        fold = _add_fn(et)
        start = 0 if et is ElementType.I64 else 0.0
    else:
        fold = binary_maximum
        start = -math.inf
    src = [0] * len(a.shape)
    for out_idx in out.indices():
        for pos, axis in enumerate(kept):
            src[axis] = out_idx[pos]
        acc = start
        for red_idx in itertools.product(*(range(d) for d in reduced_dims)):
            for pos, axis in enumerate(axes):
                src[axis] = red_idx[pos]
            acc = fold(acc, a.get(tuple(src)))
        out.set(out_idx, acc)


def _run_conv2d(attrs, data: TensorValue, flt: TensorValue, out: TensorValue):
    add = _add_fn(out.element_type)
    mul = _mul_fn(out.element_type)
    _, c_extent, h_extent, w_extent = data.shape
    _, _, r_extent, s_extent = flt.shape
    sh, sw = attrs["strides"]
    pt, _, pl, _ = attrs["padding"]
    n_out, k_out, ho, wo = out.shape
    for n in range(n_out):
        for k in range(k_out):
            for p in range(ho):
                for q in range(wo):
                    acc = 0.0
                    for c in range(c_extent):
                        for r in range(r_extent):
                            h = p * sh - pt + r
                            if not 0 <= h < h_extent:
                                continue
                            for s in range(s_extent):
                                w = q * sw - pl + s
                                if not 0 <= w < w_extent:
                                    continue
                                acc = add(
                                    acc,
                                    mul(data.get((n, c, h, w)), flt.get((k, c, r, s))),
                                )
                    out.set((n, k, p, q), acc)


def _run_conv_backprop_data(attrs, delta: TensorValue, flt: TensorValue, out: TensorValue):
    # Adjoint of stride-1 Conv2D with respect to its data input.
    add = _add_fn(out.element_type)
    mul = _mul_fn(out.element_type)
    _, k_extent, ho, wo = delta.shape
    _, _, r_extent, s_extent = flt.shape
    pt, _, pl, _ = attrs["padding"]
    n_out, c_out, h_out, w_out = out.shape
    for n in range(n_out):
        for c in range(c_out):
            for h in range(h_out):
                for w in range(w_out):
                    acc = 0.0
                    for k in range(k_extent):
                        for r in range(r_extent):
                            p = h + pt - r
                            if not 0 <= p < ho:
                                continue
                            for s in range(s_extent):
                                q = w + pl - s
                                if not 0 <= q < wo:
                                    continue
                                acc = add(
                                    acc,
                                    mul(delta.get((n, k, p, q)), flt.get((k, c, r, s))),
                                )
                    out.set((n, c, h, w), acc)


def _run_conv_backprop_filter(attrs, data: TensorValue, delta: TensorValue, out: TensorValue):
    # Adjoint of stride-1 Conv2D with respect to its filter input.
    add = _add_fn(out.element_type)
    mul = _mul_fn(out.element_type)
    n_extent, _, h_extent, w_extent = data.shape
    _, _, ho, wo = delta.shape
    pt, _, pl, _ = attrs["padding"]
    k_out, c_out, r_out, s_out = out.shape
    for k in range(k_out):
        for c in range(c_out):
            for r in range(r_out):
                for s in range(s_out):
                    acc = 0.0
                    for n in range(n_extent):
                        for p in range(ho):
                            h = p + r - pt
                            if not 0 <= h < h_extent:
                                continue
                            for q in range(wo):
                                w = q + s - pl
                                if not 0 <= w < w_extent:
                                    continue
                                acc = add(
                                    acc,
                                    mul(delta.get((n, k, p, q)), data.get((n, c, h, w))),
                                )
                    out.set((k, c, r, s), acc)


def _run_convert_layout(a: TensorValue, out: TensorValue):
    for idx in out.indices():
        out.set(idx, a.get(idx))


def evaluate_node(
    kind: OpKind, attrs: Mapping, inputs: Sequence[TensorValue], output: TensorValue
) -> None:
    """Execute one op, writing into the preallocated `output` tensor."""
    if kind in _BINARY_RAW:
        _run_elementwise_binary(kind, inputs[0], inputs[1], output)
    elif kind in _UNARY_RAW:
        _run_elementwise_unary(kind, inputs[0], output)
    elif kind is OpKind.DOT:
        _run_dot(inputs[0], inputs[1], output)
    elif kind is OpKind.BROADCAST:
        _run_broadcast(attrs, inputs[0], output)
    elif kind is OpKind.RESHAPE:
        _run_reshape(attrs, inputs[0], output)
    elif kind is OpKind.SUM:
        _run_sum(attrs, inputs[0], output)
    elif kind is OpKind.CONV2D:
        _run_conv2d(attrs, inputs[0], inputs[1], output)
    elif kind is OpKind.CONV_BACKPROP_DATA:
        _run_conv_backprop_data(attrs, inputs[0], inputs[1], output)
    elif kind is OpKind.CONV_BACKPROP_FILTER:
        _run_conv_backprop_filter(attrs, inputs[0], inputs[1], output)
    elif kind is OpKind.CONVERT_LAYOUT:
        _run_convert_layout(inputs[0], output)
    else:
        raise UnsupportedOp(f"no kernel for {kind.wire_name}")
