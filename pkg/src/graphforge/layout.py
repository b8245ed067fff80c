"""Axis-order layouts and the layout-assignment pass.

A Layout is a permutation of a tensor's axes: position i of `order` names the
axis stored with the i-th largest stride, and strides are derived as
contiguous row-major over the permuted axes.  The identity order is canonical
row-major storage.

`assign_layouts` rewrites a Function so that every consumer sees its required
layout, inserting ConvertLayout nodes only where producer and consumer
disagree.  Result tensors are normalized to the identity layout so a
function's calling convention does not depend on the layout policy.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import InvalidAttribute
from .ir import (
    AxisVector,
    Function,
    Node,
    OpKind,
    Shape,
    topological_order,
)


@dataclass(frozen=True)
class Layout:
    order: AxisVector

    def __post_init__(self):
        if sorted(self.order) != list(range(len(self.order))):
            raise InvalidAttribute(f"layout order {list(self.order)} is not a permutation")

    @property
    def rank(self) -> int:
        return len(self.order)

    @property
    def is_identity(self) -> bool:
        return self.order == tuple(range(len(self.order)))

    def strides(self, shape: Shape) -> tuple[int, ...]:
        """Element stride per logical axis under this layout."""
        by_axis = [0] * len(shape)
        stride = 1
        for axis in reversed(self.order):
            by_axis[axis] = stride
            stride *= shape[axis]
        return tuple(by_axis)


def identity_layout(rank: int) -> Layout:
    return Layout(tuple(range(rank)))


NHWC_ORDER: AxisVector = (0, 2, 3, 1)


class LayoutPolicy:
    """Per-op layout requirements; identity everywhere by default.

    A non-identity `conv_order` applies to Conv2D's data input and output;
    filter weights stay in identity order.
    """

    def __init__(self, conv_order: AxisVector | None = None):
        self.conv_order = tuple(conv_order) if conv_order is not None else None

    def input_order(self, kind: OpKind, index: int, rank: int) -> AxisVector | None:
        """Required input order, or None when any layout is acceptable."""
        if kind is OpKind.CONVERT_LAYOUT:
            return None
        if self.conv_order is not None and kind is OpKind.CONV2D and index == 0:
            return self.conv_order
        return tuple(range(rank))

    def output_order(self, kind: OpKind, attrs, rank: int) -> AxisVector:
        if kind is OpKind.CONVERT_LAYOUT:
            return tuple(attrs["order"])
        if self.conv_order is not None and kind is OpKind.CONV2D:
            return self.conv_order
        return tuple(range(rank))


_POLICIES = {
    "identity": lambda: LayoutPolicy(),
    "nhwc": lambda: LayoutPolicy(NHWC_ORDER),
}


def layout_policy(name: str) -> LayoutPolicy:
    try:
        return _POLICIES[name]()
    except KeyError:
        raise InvalidAttribute(
            f"unknown layout policy {name!r}; expected one of {sorted(_POLICIES)}"
        )


def tensor_layouts(
    fn: Function,
    policy: LayoutPolicy,
    parameter_layouts: list[Layout] | None = None,
) -> dict[tuple[int, int], Layout]:
    """Layout produced for every tensor in `fn` under `policy`.

    Parameters produce identity unless overridden positionally via
    `parameter_layouts` (None entries mean identity).
    """
    param_index = {pid: i for i, pid in enumerate(fn.parameters)}
    produced: dict[tuple[int, int], Layout] = {}
    for node_id in topological_order(fn):
        node = fn.nodes[node_id]
        rank = len(node.output.shape)
        if node.op is OpKind.PARAMETER:
            layout = identity_layout(rank)
            if parameter_layouts is not None:
                override = parameter_layouts[param_index[node_id]]
                if override is not None:
                    if override.rank != rank:
                        raise InvalidAttribute(
                            f"parameter {param_index[node_id]} layout rank "
                            f"{override.rank} != tensor rank {rank}"
                        )
                    layout = override
        elif node.op is OpKind.CONSTANT:
            layout = identity_layout(rank)
        else:
            layout = Layout(policy.output_order(node.op, node.attrs, rank))
        produced[(node_id, 0)] = layout
    return produced


def assign_layouts(
    fn: Function,
    policy: LayoutPolicy | None = None,
    parameter_layouts: list[Layout] | None = None,
) -> Function:
    """Insert ConvertLayout nodes wherever a consumer's required layout
    differs from its producer's output layout; normalize results to identity.

    Conversions are shared per (tensor, target order) pair.  The returned
    Function validates and computes the same logical values.
    """
    policy = policy or LayoutPolicy()
    produced = tensor_layouts(fn, policy, parameter_layouts)

    g = Function(fn.name)
    g.parameters = list(fn.parameters)
    g.results = list(fn.results)
    for node_id in sorted(fn.nodes):
        g.nodes[node_id] = fn.nodes[node_id]

    conversions: dict[tuple[tuple[int, int], AxisVector], int] = {}

    def converted(ref: tuple[int, int], target: AxisVector) -> tuple[int, int]:
        key = (ref, target)
        conv = conversions.get(key)
        if conv is None:
            conv = max(g.nodes) + 1
            desc = g.nodes[ref[0]].outputs[ref[1]]
            g.nodes[conv] = Node(
                conv, OpKind.CONVERT_LAYOUT, {"order": target}, (ref,), (desc,)
            )
            produced[(conv, 0)] = Layout(target)
            conversions[key] = conv
        return (conv, 0)

    for node_id in topological_order(fn):
        node = g.nodes[node_id]
        if not node.inputs:
            continue
        new_inputs = []
        changed = False
        for idx, ref in enumerate(node.inputs):
            rank = len(g.nodes[ref[0]].outputs[ref[1]].shape)
            required = policy.input_order(node.op, idx, rank)
            if required is not None and produced[ref].order != required:
                ref = converted(ref, required)
                changed = True
            new_inputs.append(ref)
        if changed:
            g.nodes[node_id] = Node(
                node.id, node.op, node.attrs, tuple(new_inputs), node.outputs
            )

    new_results = []
    for ref in g.results:
        layout = produced[ref]
        if not layout.is_identity:
            ref = converted(ref, tuple(range(layout.rank)))
        new_results.append(ref)
    g.results = new_results
    return g


def count_convert_layout(fn: Function) -> int:
    return sum(1 for n in fn.nodes.values() if n.op is OpKind.CONVERT_LAYOUT)
