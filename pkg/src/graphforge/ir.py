"""Core graph data model: element types, shapes, the fixed op set, nodes,
functions, output inference, validation, and deterministic ordering.

A `Function` is a DAG of stateless nodes.  Each node's output descriptors are
fully determined by its op, attributes, and input descriptors; inference runs
at construction time and validation re-checks stored descriptors against a
fresh inference pass.

Axis sets are represented as sorted tuples of axis indices so iteration order
is deterministic everywhere; axis vectors are plain tuples.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Sequence

from .errors import (
    ArityMismatch,
    CycleDetected,
    ElementTypeMismatch,
    InvalidAttribute,
    ShapeMismatch,
    UnknownInput,
)
from .numeric import round_f32

Shape = tuple[int, ...]
AxisSet = tuple[int, ...]  # sorted, duplicate-free
AxisVector = tuple[int, ...]

I64_MIN = -(1 << 63)
I64_MAX = (1 << 63) - 1


class ElementType(Enum):
    F32 = "F32"
    F64 = "F64"
    I64 = "I64"
    BOOL = "BOOL"

    @property
    def byte_size(self) -> int:
        return _BYTE_SIZES[self]

    @property
    def is_float(self) -> bool:
        return self in (ElementType.F32, ElementType.F64)


_BYTE_SIZES = {
    ElementType.F32: 4,
    ElementType.F64: 8,
    ElementType.I64: 8,
    ElementType.BOOL: 1,
}


def element_count(shape: Sequence[int]) -> int:
    n = 1
    for d in shape:
        n *= d
    return n


@dataclass(frozen=True)
class TensorDescriptor:
    element_type: ElementType
    shape: Shape

    @property
    def element_count(self) -> int:
        return element_count(self.shape)

    @property
    def byte_size(self) -> int:
        return self.element_count * self.element_type.byte_size

    def __str__(self) -> str:
        return f"{self.element_type.value}{list(self.shape)}"


class OpKind(Enum):
    PARAMETER = "Parameter"
    CONSTANT = "Constant"
    ADD = "Add"
    SUBTRACT = "Subtract"
    MULTIPLY = "Multiply"
    DIVIDE = "Divide"
    NEGATE = "Negate"
    EXP = "Exp"
    LOG = "Log"
    TANH = "Tanh"
    SIGMOID = "Sigmoid"
    RELU = "Relu"
    MAXIMUM = "Maximum"
    DOT = "Dot"
    BROADCAST = "Broadcast"
    RESHAPE = "Reshape"
    SUM = "Sum"
    CONV2D = "Conv2D"
    CONVERT_LAYOUT = "ConvertLayout"
    # Internal ops, emitted only by the differentiator.
    CONV_BACKPROP_DATA = "ConvBackpropData"
    CONV_BACKPROP_FILTER = "ConvBackpropFilter"

    @property
    def wire_name(self) -> str:
        return self.value

    @property
    def is_internal(self) -> bool:
        return self in (OpKind.CONV_BACKPROP_DATA, OpKind.CONV_BACKPROP_FILTER)


OP_BY_WIRE_NAME = {k.value: k for k in OpKind}

ELEMENTWISE_BINARY = frozenset(
    {OpKind.ADD, OpKind.SUBTRACT, OpKind.MULTIPLY, OpKind.DIVIDE, OpKind.MAXIMUM}
)
ELEMENTWISE_UNARY = frozenset(
    {OpKind.NEGATE, OpKind.EXP, OpKind.LOG, OpKind.TANH, OpKind.SIGMOID, OpKind.RELU}
)

_ARITY = {
    OpKind.PARAMETER: 0,
    OpKind.CONSTANT: 0,
    OpKind.ADD: 2,
    OpKind.SUBTRACT: 2,
    OpKind.MULTIPLY: 2,
    OpKind.DIVIDE: 2,
    OpKind.NEGATE: 1,
    OpKind.EXP: 1,
    OpKind.LOG: 1,
    OpKind.TANH: 1,
    OpKind.SIGMOID: 1,
    OpKind.RELU: 1,
    OpKind.MAXIMUM: 2,
    OpKind.DOT: 2,
    OpKind.BROADCAST: 1,
    OpKind.RESHAPE: 1,
    OpKind.SUM: 1,
    OpKind.CONV2D: 2,
    OpKind.CONVERT_LAYOUT: 1,
    OpKind.CONV_BACKPROP_DATA: 2,
    OpKind.CONV_BACKPROP_FILTER: 2,
}

# Per-element-type op support.  Floats support everything; the integer and
# boolean kernel matrices are deliberately narrow.
_I64_OPS = frozenset(
    {
        OpKind.PARAMETER,
        OpKind.CONSTANT,
        OpKind.ADD,
        OpKind.SUBTRACT,
        OpKind.MULTIPLY,
        OpKind.NEGATE,
        OpKind.RESHAPE,
        OpKind.BROADCAST,
        OpKind.SUM,
    }
)
_BOOL_OPS = frozenset(
    {OpKind.PARAMETER, OpKind.CONSTANT, OpKind.RESHAPE, OpKind.BROADCAST}
)


def op_arity(kind: OpKind) -> int:
    return _ARITY[kind]


def op_supports_element_type(kind: OpKind, et: ElementType) -> bool:
    if et.is_float:
        return True
    if et is ElementType.I64:
        return kind in _I64_OPS
    return kind in _BOOL_OPS


@dataclass(frozen=True)
class Node:
    id: int
    op: OpKind
    attrs: Mapping
    inputs: tuple[tuple[int, int], ...]
    outputs: tuple[TensorDescriptor, ...]

    @property
    def output(self) -> TensorDescriptor:
        return self.outputs[0]


# ---------------------------------------------------------------------------
# Attribute normalization


def _int_tuple(value, name: str, minimum: int = 0) -> tuple[int, ...]:
    try:
        items = tuple(int(v) for v in value)
    except (TypeError, ValueError):
        raise InvalidAttribute(f"{name} must be a sequence of integers")
    if any(v < minimum for v in items):
        raise InvalidAttribute(f"{name} entries must be >= {minimum}, got {items}")
    return items


def _axis_set(value, name: str) -> AxisSet:
    axes = _int_tuple(value, name)
    ordered = tuple(sorted(axes))
    if len(set(ordered)) != len(ordered):
        raise InvalidAttribute(f"{name} contains duplicate axes: {axes}")
    return ordered


def _element_type(value) -> ElementType:
    if isinstance(value, ElementType):
        return value
    try:
        return ElementType(value)
    except ValueError:
        raise InvalidAttribute(f"unknown element type {value!r}")


def _constant_data(et: ElementType, shape: Shape, data) -> tuple:
    values = list(data)
    if len(values) != element_count(shape):
        raise InvalidAttribute(
            f"constant data length {len(values)} != element count "
            f"{element_count(shape)} for shape {list(shape)}"
        )
    out = []
    for v in values:
        if et is ElementType.BOOL:
            if not isinstance(v, bool) and v not in (0, 1):
                raise InvalidAttribute(f"boolean constant entry {v!r}")
            out.append(bool(v))
        elif et is ElementType.I64:
            if isinstance(v, bool) or not isinstance(v, int):
                raise InvalidAttribute(f"integer constant entry {v!r}")
            if not I64_MIN <= v <= I64_MAX:
                raise InvalidAttribute(f"integer constant entry {v} out of 64-bit range")
            out.append(v)
        else:
            v = float(v)
            out.append(round_f32(v) if et is ElementType.F32 else v)
    return tuple(out)


def normalize_attrs(kind: OpKind, attrs: Mapping | None) -> dict:
    """Validate and canonicalize `attrs` for the given op kind.

    Returns a fresh dict with deterministic, immutable values (ints, strings,
    tuples, ElementType).  Unknown or missing keys raise InvalidAttribute.
    """
    attrs = dict(attrs or {})

    def take(*names):
        missing = [n for n in names if n not in attrs]
        if missing:
            raise InvalidAttribute(f"{kind.wire_name} requires attrs {missing}")
        extra = set(attrs) - set(names)
        if extra:
            raise InvalidAttribute(f"{kind.wire_name} got unknown attrs {sorted(extra)}")

    if kind is OpKind.PARAMETER:
        take("element_type", "shape")
        return {
            "element_type": _element_type(attrs["element_type"]),
            "shape": _int_tuple(attrs["shape"], "shape"),
        }
    if kind is OpKind.CONSTANT:
        take("element_type", "shape", "data")
        et = _element_type(attrs["element_type"])
        shape = _int_tuple(attrs["shape"], "shape")
        return {
            "element_type": et,
            "shape": shape,
            "data": _constant_data(et, shape, attrs["data"]),
        }
    if kind is OpKind.BROADCAST:
        take("output_shape", "broadcast_axes")
        return {
            "output_shape": _int_tuple(attrs["output_shape"], "output_shape"),
            "broadcast_axes": _axis_set(attrs["broadcast_axes"], "broadcast_axes"),
        }
    if kind is OpKind.RESHAPE:
        take("input_order", "output_shape")
        return {
            "input_order": _int_tuple(attrs["input_order"], "input_order"),
            "output_shape": _int_tuple(attrs["output_shape"], "output_shape"),
        }
    if kind is OpKind.SUM:
        if "reduction_kind" not in attrs:
            attrs["reduction_kind"] = "sum"
        take("reduction_axes", "reduction_kind")
        rk = attrs["reduction_kind"]
        if rk not in ("sum", "max"):
            raise InvalidAttribute(f"reduction_kind must be 'sum' or 'max', got {rk!r}")
        return {
            "reduction_axes": _axis_set(attrs["reduction_axes"], "reduction_axes"),
            "reduction_kind": rk,
        }
    if kind is OpKind.CONV2D:
        take("strides", "padding")
        strides = _int_tuple(attrs["strides"], "strides", minimum=1)
        padding = _int_tuple(attrs["padding"], "padding")
        if len(strides) != 2:
            raise InvalidAttribute(f"strides must be (sh, sw), got {strides}")
        if len(padding) != 4:
            raise InvalidAttribute(f"padding must be (top, bottom, left, right), got {padding}")
        return {"strides": strides, "padding": padding}
    if kind is OpKind.CONVERT_LAYOUT:
        take("order")
        return {"order": _int_tuple(attrs["order"], "order")}
    if kind is OpKind.CONV_BACKPROP_DATA:
        take("data_shape", "padding")
        return {
            "data_shape": _int_tuple(attrs["data_shape"], "data_shape"),
            "padding": _int_tuple(attrs["padding"], "padding"),
        }
    if kind is OpKind.CONV_BACKPROP_FILTER:
        take("filter_shape", "padding")
        return {
            "filter_shape": _int_tuple(attrs["filter_shape"], "filter_shape"),
            "padding": _int_tuple(attrs["padding"], "padding"),
        }
    take()
    return {}


def attrs_key(node: Node) -> tuple:
    """Hashable structural key for a node's attributes.

    Float constant data is keyed by bit pattern so NaNs compare equal to
    themselves and +0.0 / -0.0 stay distinct.
    """
    items = []
    for k in sorted(node.attrs):
        v = node.attrs[k]
        if k == "data" and node.attrs.get("element_type", ElementType.I64).is_float:
            from .numeric import float_bits

            v = tuple(float_bits(x) for x in v)
        elif isinstance(v, ElementType):
            v = v.value
        items.append((k, v))
    return tuple(items)


# ---------------------------------------------------------------------------
# Shape and element-type inference


def _require_same_descriptor(kind: OpKind, descs: Sequence[TensorDescriptor]):
    first = descs[0]
    for d in descs[1:]:
        if d.element_type is not first.element_type:
            raise ElementTypeMismatch(
                f"{kind.wire_name} inputs must share an element type: "
                f"{first.element_type.value} vs {d.element_type.value}"
            )
        if d.shape != first.shape:
            raise ShapeMismatch(
                f"{kind.wire_name} inputs must share a shape: "
                f"{list(first.shape)} vs {list(d.shape)}"
            )


def _check_element_support(kind: OpKind, descs: Sequence[TensorDescriptor], attrs: Mapping):
    for d in descs:
        et = d.element_type
        if not op_supports_element_type(kind, et):
            raise ElementTypeMismatch(
                f"{kind.wire_name} does not support element type {et.value}"
            )
    if kind is OpKind.SUM and attrs.get("reduction_kind") == "max":
        if not descs[0].element_type.is_float:
            raise ElementTypeMismatch("max-reduce requires a floating element type")


def delete_axes(shape: Shape, axes: Iterable[int]) -> Shape:
    axes = set(axes)
    return tuple(d for i, d in enumerate(shape) if i not in axes)


def infer_output(
    kind: OpKind, attrs: Mapping, input_descs: Sequence[TensorDescriptor]
) -> TensorDescriptor:
    """Compute the single output descriptor for an op application.

    Raises ArityMismatch / ShapeMismatch / ElementTypeMismatch /
    InvalidAttribute.  `attrs` must already be normalized.
    """
    expected = op_arity(kind)
    if len(input_descs) != expected:
        raise ArityMismatch(
            f"{kind.wire_name} takes {expected} inputs, got {len(input_descs)}"
        )
    _check_element_support(kind, input_descs, attrs)

    if kind in (OpKind.PARAMETER, OpKind.CONSTANT):
        return TensorDescriptor(attrs["element_type"], attrs["shape"])

    if kind in ELEMENTWISE_BINARY:
        _require_same_descriptor(kind, input_descs)
        return input_descs[0]

    if kind in ELEMENTWISE_UNARY:
        return input_descs[0]

    if kind is OpKind.DOT:
        a, b = input_descs
        _require_same_element_type(a, b)
        if len(a.shape) != 2 or len(b.shape) != 2:
            raise ShapeMismatch(
                f"Dot requires rank-2 inputs, got {list(a.shape)} and {list(b.shape)}"
            )
        if a.shape[1] != b.shape[0]:
            raise ShapeMismatch(
                f"Dot inner extents differ: {list(a.shape)} x {list(b.shape)}"
            )
        return TensorDescriptor(a.element_type, (a.shape[0], b.shape[1]))

    if kind is OpKind.BROADCAST:
        (arg,) = input_descs
        out_shape = attrs["output_shape"]
        axes = attrs["broadcast_axes"]
        if any(ax >= len(out_shape) for ax in axes):
            raise InvalidAttribute(
                f"broadcast axis out of range for output shape {list(out_shape)}"
            )
        if delete_axes(out_shape, axes) != arg.shape:
            raise ShapeMismatch(
                f"Broadcast: deleting axes {list(axes)} from {list(out_shape)} "
                f"does not yield input shape {list(arg.shape)}"
            )
        return TensorDescriptor(arg.element_type, out_shape)

    if kind is OpKind.RESHAPE:
        (arg,) = input_descs
        order = attrs["input_order"]
        out_shape = attrs["output_shape"]
        if sorted(order) != list(range(len(arg.shape))):
            raise InvalidAttribute(
                f"input_order {list(order)} is not a permutation of rank {len(arg.shape)}"
            )
        if element_count(out_shape) != arg.element_count:
            raise ShapeMismatch(
                f"Reshape element count mismatch: {list(arg.shape)} -> {list(out_shape)}"
            )
        return TensorDescriptor(arg.element_type, out_shape)

    if kind is OpKind.SUM:
        (arg,) = input_descs
        axes = attrs["reduction_axes"]
        if any(ax >= len(arg.shape) for ax in axes):
            raise InvalidAttribute(
                f"reduction axis out of range for shape {list(arg.shape)}"
            )
        return TensorDescriptor(arg.element_type, delete_axes(arg.shape, axes))

    if kind is OpKind.CONV2D:
        data, flt = input_descs
        _require_same_element_type(data, flt)
        if len(data.shape) != 4 or len(flt.shape) != 4:
            raise ShapeMismatch(
                f"Conv2D requires rank-4 input and filter, got "
                f"{list(data.shape)} and {list(flt.shape)}"
            )
        n, c, h, w = data.shape
        k, c2, r, s = flt.shape
        if c2 != c:
            raise ShapeMismatch(f"Conv2D channel mismatch: input {c}, filter {c2}")
        sh, sw = attrs["strides"]
        pt, pb, pl, pr = attrs["padding"]
        if h + pt + pb < r or w + pl + pr < s:
            raise InvalidAttribute(
                f"filter {r}x{s} larger than padded input "
                f"{h + pt + pb}x{w + pl + pr}"
            )
        ho = (h + pt + pb - r) // sh + 1
        wo = (w + pl + pr - s) // sw + 1
        return TensorDescriptor(data.element_type, (n, k, ho, wo))

    if kind is OpKind.CONVERT_LAYOUT:
        (arg,) = input_descs
        order = attrs["order"]
        if sorted(order) != list(range(len(arg.shape))):
            raise InvalidAttribute(
                f"layout order {list(order)} is not a permutation of rank {len(arg.shape)}"
            )
        return arg

    if kind is OpKind.CONV_BACKPROP_DATA:
        delta, flt = input_descs
        _require_same_element_type(delta, flt)
        data_shape = attrs["data_shape"]
        if len(data_shape) != 4 or len(delta.shape) != 4 or len(flt.shape) != 4:
            raise ShapeMismatch("ConvBackpropData requires rank-4 tensors")
        return TensorDescriptor(delta.element_type, data_shape)

    if kind is OpKind.CONV_BACKPROP_FILTER:
        data, delta = input_descs
        _require_same_element_type(data, delta)
        filter_shape = attrs["filter_shape"]
        if len(filter_shape) != 4 or len(data.shape) != 4 or len(delta.shape) != 4:
            raise ShapeMismatch("ConvBackpropFilter requires rank-4 tensors")
        return TensorDescriptor(data.element_type, filter_shape)

    raise InvalidAttribute(f"no inference rule for {kind.wire_name}")


def _require_same_element_type(a: TensorDescriptor, b: TensorDescriptor):
    if a.element_type is not b.element_type:
        raise ElementTypeMismatch(
            f"element types differ: {a.element_type.value} vs {b.element_type.value}"
        )


# ---------------------------------------------------------------------------
# Function


class Function:
    """A named, acyclic graph of nodes with ordered parameters and results.

    Construction is single-threaded; once built (and shared), a Function is
    treated as immutable.  Node ids are assigned as 1 + the maximum existing
    id, so two identical construction sequences produce identical graphs.
    """

    def __init__(self, name: str):
        self.name = name
        self.nodes: dict[int, Node] = {}
        self.parameters: list[int] = []
        self.results: list[tuple[int, int]] = []

    def node(self, node_id: int) -> Node:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise UnknownInput(f"no node with id {node_id}")

    def _insert(self, kind: OpKind, attrs, inputs) -> int:
        node_id = max(self.nodes, default=0) + 1
        attrs = normalize_attrs(kind, attrs)
        refs = []
        for ref in inputs:
            node_ref, port = (ref, 0) if isinstance(ref, int) else ref
            producer = self.node(node_ref)
            if port >= len(producer.outputs):
                raise UnknownInput(f"node {node_ref} has no output port {port}")
            refs.append((node_ref, port))
        descs = [self.nodes[i].outputs[p] for i, p in refs]
        out = infer_output(kind, attrs, descs)
        self.nodes[node_id] = Node(node_id, kind, attrs, tuple(refs), (out,))
        return node_id

    def add_parameter(self, element_type: ElementType, shape: Sequence[int]) -> int:
        node_id = self._insert(
            OpKind.PARAMETER, {"element_type": element_type, "shape": tuple(shape)}, ()
        )
        self.parameters.append(node_id)
        return node_id

    def add_constant(
        self, element_type: ElementType, shape: Sequence[int], data: Sequence
    ) -> int:
        return self._insert(
            OpKind.CONSTANT,
            {"element_type": element_type, "shape": tuple(shape), "data": tuple(data)},
            (),
        )

    def add_node(self, kind: OpKind, inputs, attrs=None, *, allow_internal=False) -> int:
        if kind in (OpKind.PARAMETER, OpKind.CONSTANT):
            raise InvalidAttribute(
                f"use add_parameter/add_constant to create {kind.wire_name} nodes"
            )
        if kind.is_internal and not allow_internal:
            raise InvalidAttribute(f"{kind.wire_name} is internal")
        return self._insert(kind, attrs, inputs)

    def set_results(self, refs) -> None:
        out = []
        for ref in refs:
            node_ref, port = (ref, 0) if isinstance(ref, int) else ref
            producer = self.node(node_ref)
            if port >= len(producer.outputs):
                raise UnknownInput(f"node {node_ref} has no output port {port}")
            out.append((node_ref, port))
        self.results = out

    def consumers(self) -> dict[tuple[int, int], list[int]]:
        """Map each (node id, port) tensor to the sorted ids of its readers."""
        uses: dict[tuple[int, int], list[int]] = {}
        for node_id in sorted(self.nodes):
            for ref in self.nodes[node_id].inputs:
                uses.setdefault(ref, []).append(node_id)
        return uses


# ---------------------------------------------------------------------------
# Validation and ordering


@dataclass(frozen=True)
class Diagnostic:
    code: str
    node_id: int | None
    message: str

    def __str__(self) -> str:
        where = f"node {self.node_id}: " if self.node_id is not None else ""
        return f"[{self.code}] {where}{self.message}"


def validate_function(fn: Function) -> list[Diagnostic]:
    """Check every structural invariant; returns one diagnostic per violation."""
    diags: list[Diagnostic] = []

    def report(code, node_id, message):
        diags.append(Diagnostic(code, node_id, message))

    param_nodes = {i for i, n in fn.nodes.items() if n.op is OpKind.PARAMETER}
    seen = set()
    for pid in fn.parameters:
        if pid in seen:
            report("param-list", pid, "listed more than once in the parameter list")
        seen.add(pid)
        if pid not in fn.nodes:
            report("param-list", pid, "parameter id does not exist")
        elif fn.nodes[pid].op is not OpKind.PARAMETER:
            report("param-list", pid, "parameter list entry is not a Parameter node")
    for pid in sorted(param_nodes - seen):
        report("param-list", pid, "Parameter node missing from the parameter list")

    wired = True
    for node_id in sorted(fn.nodes):
        node = fn.nodes[node_id]
        if node.id != node_id or node_id <= 0:
            report("node-id", node_id, "node id key mismatch or non-positive id")
        if len(node.inputs) != op_arity(node.op):
            report(
                "arity",
                node_id,
                f"{node.op.wire_name} takes {op_arity(node.op)} inputs, "
                f"got {len(node.inputs)}",
            )
            wired = False
        for ref, port in node.inputs:
            if ref not in fn.nodes:
                report("unknown-input", node_id, f"input references missing node {ref}")
                wired = False
            elif port >= len(fn.nodes[ref].outputs):
                report("unknown-input", node_id, f"input references bad port {ref}:{port}")
                wired = False

    for ref, port in fn.results:
        if ref not in fn.nodes:
            report("result-ref", ref, "result references missing node")
        elif port >= len(fn.nodes[ref].outputs):
            report("result-ref", ref, f"result references bad port {port}")

    if not wired:
        return diags

    try:
        order = topological_order(fn)
    except CycleDetected as exc:
        report("cycle", None, f"cycle among nodes {sorted(exc.node_ids)}")
        return diags

    for node_id in order:
        node = fn.nodes[node_id]
        descs = [fn.nodes[i].outputs[p] for i, p in node.inputs]
        try:
            attrs = normalize_attrs(node.op, node.attrs)
            inferred = infer_output(node.op, attrs, descs)
        except Exception as exc:  # inference rejects the stored attrs/inputs
            report("bad-attrs", node_id, str(exc))
            continue
        if attrs != dict(node.attrs):
            report("bad-attrs", node_id, "attributes are not in normalized form")
        if node.outputs != (inferred,):
            report(
                "descriptor-mismatch",
                node_id,
                f"stored {node.outputs[0]} but inference gives {inferred}",
            )
    return diags


def topological_order(fn: Function) -> list[int]:
    """Kahn's algorithm with a min-id heap, so the order is deterministic."""
    indegree = {i: len(n.inputs) for i, n in fn.nodes.items()}
    dependents: dict[int, list[int]] = {i: [] for i in fn.nodes}
    for node_id, node in fn.nodes.items():
        for ref, _ in node.inputs:
            dependents[ref].append(node_id)
    ready = [i for i, d in indegree.items() if d == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        node_id = heapq.heappop(ready)
        order.append(node_id)
        for dep in dependents[node_id]:
            indegree[dep] -= 1
            if indegree[dep] == 0:
                heapq.heappush(ready, dep)
    if len(order) != len(fn.nodes):
        raise CycleDetected([i for i in fn.nodes if indegree[i] > 0])
    return order


def reachable_from_results(fn: Function) -> set[int]:
    stack = [ref for ref, _ in fn.results]
    seen: set[int] = set()
    while stack:
        node_id = stack.pop()
        if node_id in seen:
            continue
        seen.add(node_id)
        stack.extend(ref for ref, _ in fn.nodes[node_id].inputs)
    return seen


# ---------------------------------------------------------------------------
# Softmax composite


def build_softmax(fn: Function, input_id: int, axis: int) -> int:
    """Append a numerically stabilized softmax over `axis`.

    Expands to: m = max-reduce(x, {axis}); e = exp(x - broadcast(m));
    out = e / broadcast(sum(e, {axis})).  Returns the final Divide node id.
    """
    desc = fn.node(input_id).output
    rank = len(desc.shape)
    if not 0 <= axis < rank:
        raise InvalidAttribute(f"softmax axis {axis} out of range for rank {rank}")
    m = fn.add_node(
        OpKind.SUM, [input_id], {"reduction_axes": (axis,), "reduction_kind": "max"}
    )
    mb = fn.add_node(
        OpKind.BROADCAST,
        [m],
        {"output_shape": desc.shape, "broadcast_axes": (axis,)},
    )
    centered = fn.add_node(OpKind.SUBTRACT, [input_id, mb])
    e = fn.add_node(OpKind.EXP, [centered])
    s = fn.add_node(
        OpKind.SUM, [e], {"reduction_axes": (axis,), "reduction_kind": "sum"}
    )
    sb = fn.add_node(
        OpKind.BROADCAST,
        [s],
        {"output_shape": desc.shape, "broadcast_axes": (axis,)},
    )
    return fn.add_node(OpKind.DIVIDE, [e, sb])
