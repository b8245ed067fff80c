"""Reverse-mode differentiation as a graph-to-graph transform.

`differentiate` builds a new Function that embeds a copy of the forward
graph, takes one extra seed parameter (the gradient of the single result),
and returns one gradient per requested parameter, each with its parameter's
descriptor.  Adjoints accumulate through explicit Add nodes; every rule is
expressed with existing ops, including the Relu/Maximum selection masks.

Max-reductions contribute no gradient: they appear only as the stabilizing
shift inside the softmax composite, where the shift cancels analytically, so
their output is treated as a constant of the differentiation.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import (
    MultipleResults,
    NonDifferentiableOp,
    UnknownInput,
    UnsupportedStride,
    ValidationFailure,
)
from .ir import (
    Function,
    OpKind,
    TensorDescriptor,
    topological_order,
    validate_function,
)


def differentiate(fn: Function, wrt: list[int]) -> Function:
    """Gradient function of `fn`'s single result with respect to `wrt`.

    The returned Function's parameters are fn's parameters followed by one
    seed parameter with the result's descriptor; its results are the
    gradients for `wrt`, in order.  Parameters the result does not depend on
    get an all-zeros gradient.
    """
    diags = validate_function(fn)
    if diags:
        raise ValidationFailure(diags)
    if len(fn.results) != 1:
        raise MultipleResults(f"expected exactly one result, got {len(fn.results)}")
    for pid in wrt:
        if pid not in fn.parameters:
            raise UnknownInput(f"wrt id {pid} is not a parameter of {fn.name}")
        if not fn.nodes[pid].output.element_type.is_float:
            raise NonDifferentiableOp(
                f"parameter {pid} has integer element type"
            )
    result_desc = fn.nodes[fn.results[0][0]].outputs[fn.results[0][1]]
    if not result_desc.element_type.is_float:
        raise NonDifferentiableOp("result has integer element type")

    g = Function(f"{fn.name}_grad")
    mapping: dict[int, int] = {}
    for pid in fn.parameters:
        node = fn.nodes[pid]
        mapping[pid] = g.add_parameter(node.output.element_type, node.output.shape)

    order = topological_order(fn)
    for node_id in order:
        node = fn.nodes[node_id]
        if node.op is OpKind.PARAMETER:
            continue
        if node.op is OpKind.CONSTANT:
            mapping[node_id] = g.add_constant(
                node.attrs["element_type"], node.attrs["shape"], node.attrs["data"]
            )
            continue
        inputs = [(mapping[ref], port) for ref, port in node.inputs]
        mapping[node_id] = g.add_node(node.op, inputs, node.attrs, allow_internal=True)

    seed = g.add_parameter(result_desc.element_type, result_desc.shape)

    def const_fill(desc: TensorDescriptor, value: float) -> int:
        return g.add_constant(
            desc.element_type, desc.shape, (value,) * desc.element_count
        )

    contributions: dict[int, list[int]] = {fn.results[0][0]: [seed]}
    adjoint: dict[int, int] = {}

    for node_id in reversed(order):
        contribs = contributions.get(node_id)
        if not contribs:
            continue
        adj = contribs[0]
        for extra in contribs[1:]:
            adj = g.add_node(OpKind.ADD, [adj, extra])
        adjoint[node_id] = adj

        node = fn.nodes[node_id]
        if node.op in (OpKind.PARAMETER, OpKind.CONSTANT):
            continue
        if node.op is OpKind.SUM and node.attrs["reduction_kind"] == "max":
            continue  # stabilization shift: constant w.r.t. differentiation
        if node.op is OpKind.CONVERT_LAYOUT:
            raise NonDifferentiableOp("ConvertLayout has no gradient")
        if not node.output.element_type.is_float:
            raise NonDifferentiableOp(
                f"{node.op.wire_name} on {node.output.element_type.value}"
            )

        def contribute(input_pos: int, grad_id: int):
            contributions.setdefault(node.inputs[input_pos][0], []).append(grad_id)

        x = mapping[node.inputs[0][0]] if node.inputs else None
        y = mapping[node.inputs[1][0]] if len(node.inputs) > 1 else None
        fwd = mapping[node_id]
        desc = node.output

        if node.op is OpKind.ADD:
            contribute(0, adj)
            contribute(1, adj)
        elif node.op is OpKind.SUBTRACT:
            contribute(0, adj)
            contribute(1, g.add_node(OpKind.NEGATE, [adj]))
        elif node.op is OpKind.MULTIPLY:
            contribute(0, g.add_node(OpKind.MULTIPLY, [adj, y]))
            contribute(1, g.add_node(OpKind.MULTIPLY, [adj, x]))
        elif node.op is OpKind.DIVIDE:
            contribute(0, g.add_node(OpKind.DIVIDE, [adj, y]))
            ax = g.add_node(OpKind.MULTIPLY, [adj, x])
            yy = g.add_node(OpKind.MULTIPLY, [y, y])
            contribute(1, g.add_node(OpKind.NEGATE, [g.add_node(OpKind.DIVIDE, [ax, yy])]))
        elif node.op is OpKind.NEGATE:
            contribute(0, g.add_node(OpKind.NEGATE, [adj]))
        elif node.op is OpKind.EXP:
            contribute(0, g.add_node(OpKind.MULTIPLY, [adj, fwd]))
        elif node.op is OpKind.LOG:
            contribute(0, g.add_node(OpKind.DIVIDE, [adj, x]))
        elif node.op is OpKind.TANH:
            tt = g.add_node(OpKind.MULTIPLY, [fwd, fwd])
            omt = g.add_node(OpKind.SUBTRACT, [const_fill(desc, 1.0), tt])
            contribute(0, g.add_node(OpKind.MULTIPLY, [adj, omt]))
        elif node.op is OpKind.SIGMOID:
            oms = g.add_node(OpKind.SUBTRACT, [const_fill(desc, 1.0), fwd])
            contribute(0, g.add_node(OpKind.MULTIPLY, [adj, g.add_node(OpKind.MULTIPLY, [fwd, oms])]))
        elif node.op is OpKind.RELU:
            # 1 where x > 0, else 0; exact at the kink because 0/0 -> NaN and
            # Maximum(NaN, 0) takes its second operand.
            ratio = g.add_node(OpKind.DIVIDE, [fwd, x])
            mask = g.add_node(OpKind.MAXIMUM, [ratio, const_fill(desc, 0.0)])
            contribute(0, g.add_node(OpKind.MULTIPLY, [adj, mask]))
        elif node.op is OpKind.MAXIMUM:
            # Route to the first input where x >= y, to the second where
            # x < y; built as masks so ties (diff == 0 -> NaN ratio) pick x.
            d = g.add_node(OpKind.SUBTRACT, [x, y])
            nd = g.add_node(OpKind.NEGATE, [d])
            absd = g.add_node(
                OpKind.ADD,
                [g.add_node(OpKind.RELU, [d]), g.add_node(OpKind.RELU, [nd])],
            )
            ratio = g.add_node(OpKind.DIVIDE, [nd, absd])
            y_mask = g.add_node(OpKind.MAXIMUM, [ratio, const_fill(desc, 0.0)])
            x_mask = g.add_node(OpKind.SUBTRACT, [const_fill(desc, 1.0), y_mask])
            contribute(0, g.add_node(OpKind.MULTIPLY, [adj, x_mask]))
            contribute(1, g.add_node(OpKind.MULTIPLY, [adj, y_mask]))
        elif node.op is OpKind.DOT:
            a_desc = fn.nodes[node.inputs[0][0]].output
            b_desc = fn.nodes[node.inputs[1][0]].output
            bt = g.add_node(
                OpKind.RESHAPE,
                [y],
                {"input_order": (1, 0), "output_shape": b_desc.shape[::-1]},
            )
            contribute(0, g.add_node(OpKind.DOT, [adj, bt]))
            at = g.add_node(
                OpKind.RESHAPE,
                [x],
                {"input_order": (1, 0), "output_shape": a_desc.shape[::-1]},
            )
            contribute(1, g.add_node(OpKind.DOT, [at, adj]))
        elif node.op is OpKind.BROADCAST:
            contribute(
                0,
                g.add_node(
                    OpKind.SUM,
                    [adj],
                    {
                        "reduction_axes": node.attrs["broadcast_axes"],
                        "reduction_kind": "sum",
                    },
                ),
            )
        elif node.op is OpKind.SUM:
            in_shape = fn.nodes[node.inputs[0][0]].output.shape
            contribute(
                0,
                g.add_node(
                    OpKind.BROADCAST,
                    [adj],
                    {
                        "output_shape": in_shape,
                        "broadcast_axes": node.attrs["reduction_axes"],
                    },
                ),
            )
        elif node.op is OpKind.RESHAPE:
            in_shape = fn.nodes[node.inputs[0][0]].output.shape
            p = node.attrs["input_order"]
            permuted = tuple(in_shape[a] for a in p)
            inverse = [0] * len(p)
            for i, a in enumerate(p):
                inverse[a] = i
            flat = g.add_node(
                OpKind.RESHAPE,
                [adj],
                {
                    "input_order": tuple(range(len(desc.shape))),
                    "output_shape": permuted,
                },
            )
            contribute(
                0,
                g.add_node(
                    OpKind.RESHAPE,
                    [flat],
                    {"input_order": tuple(inverse), "output_shape": in_shape},
                ),
            )
        elif node.op is OpKind.CONV2D:
            if node.attrs["strides"] != (1, 1):
                raise UnsupportedStride(
                    f"Conv2D gradient requires stride 1, got {node.attrs['strides']}"
                )
            data_desc = fn.nodes[node.inputs[0][0]].output
            filter_desc = fn.nodes[node.inputs[1][0]].output
            contribute(
                0,
                g.add_node(
                    OpKind.CONV_BACKPROP_DATA,
                    [adj, y],
                    {"data_shape": data_desc.shape, "padding": node.attrs["padding"]},
                    allow_internal=True,
                ),
            )
            contribute(
                1,
                g.add_node(
                    OpKind.CONV_BACKPROP_FILTER,
                    [x, adj],
                    {"filter_shape": filter_desc.shape, "padding": node.attrs["padding"]},
                    allow_internal=True,
                ),
            )
        else:
            raise NonDifferentiableOp(f"no gradient rule for {node.op.wire_name}")

    results = []
    for pid in wrt:
        grad = adjoint.get(pid)
        if grad is None:
            grad = const_fill(fn.nodes[pid].output, 0.0)
        results.append((grad, 0))
    g.set_results(results)
    return g


# ---------------------------------------------------------------------------
# Finite-difference oracle


@dataclass(frozen=True)
class ParameterGradientReport:
    parameter: int  # position in the wrt list
    max_relative_error: float
    worst_element: int


@dataclass(frozen=True)
class GradientReport:
    per_parameter: tuple[ParameterGradientReport, ...]

    @property
    def max_relative_error(self) -> float:
        return max((p.max_relative_error for p in self.per_parameter), default=0.0)


def check_gradient(fn: Function, point, h: float = 1e-6) -> GradientReport:
    """Compare the gradient graph against central finite differences.

    `fn` must produce a single rank-0 float result; `point` supplies one
    tensor per parameter.  The step for element j is h * max(1, |x_j|), and
    relative error uses denominator max(1, |analytic|, |numeric|).
    """
    from .interpreter import call, compile_function
    from .tensor import tensor_from_flat

    result_ref = fn.results[0]
    result_desc = fn.nodes[result_ref[0]].outputs[result_ref[1]]
    if result_desc.shape != ():
        raise MultipleResults("check_gradient requires a rank-0 result")

    wrt = [p for p in fn.parameters if fn.nodes[p].output.element_type.is_float]
    grad_fn = differentiate(fn, wrt)

    exe = compile_function(fn, optimize=False)
    grad_exe = compile_function(grad_fn, optimize=False)

    def forward(tensors) -> float:
        return call(exe, tensors)[0].get(())

    seed = tensor_from_flat(result_desc.element_type, (), [1.0])
    analytic = call(grad_exe, list(point) + [seed])

    reports = []
    wrt_positions = {pid: i for i, pid in enumerate(fn.parameters)}
    for gi, pid in enumerate(wrt):
        pos = wrt_positions[pid]
        base = point[pos]
        flat = base.to_flat()
        worst = 0.0
        worst_elem = 0
        grads = analytic[gi].to_flat()
        for j, v in enumerate(flat):
            step = h * max(1.0, abs(v))
            bumped = list(flat)
            bumped[j] = v + step
            plus = forward(
                _replaced(point, pos, tensor_from_flat(base.element_type, base.shape, bumped))
            )
            bumped[j] = v - step
            minus = forward(
                _replaced(point, pos, tensor_from_flat(base.element_type, base.shape, bumped))
            )
            numeric = (plus - minus) / (2.0 * step)
            a = grads[j]
            err = abs(a - numeric) / max(1.0, abs(a), abs(numeric))
            if err > worst:
                worst, worst_elem = err, j
        reports.append(ParameterGradientReport(gi, worst, worst_elem))
    return GradientReport(tuple(reports))


def _replaced(point, pos, tensor):
    out = list(point)
    out[pos] = tensor
    return out
