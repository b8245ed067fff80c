"""Reference execution backend: compile a Function to an instruction list
over a static memory plan, then interpret it with the scalar kernels.

Compilation optionally optimizes, assigns layouts, and plans the arena;
constants are evaluated once into a read-only pool.  Each call allocates a
private arena, so one Executable may be invoked concurrently.  Repeated
calls with equal inputs are bit-identical.
"""

from __future__ import annotations

import heapq
import struct
from dataclasses import dataclass

from .errors import SignatureMismatch, ValidationFailure
from .ir import (
    ElementType,
    Function,
    OpKind,
    TensorDescriptor,
    reachable_from_results,
    topological_order,
    validate_function,
)
from .kernels import constant_value, evaluate_node
from .layout import Layout, layout_policy, tensor_layouts, assign_layouts
from .memory import MemoryPlan, plan_memory
from .partition import Partitioning, partition
from .rewrite import run_pipeline
from .tensor import TensorValue, create_tensor, tensor_from_flat

_ARENA_FORMATS = {
    ElementType.F32: struct.Struct("<f"),
    ElementType.F64: struct.Struct("<d"),
    ElementType.I64: struct.Struct("<q"),
    ElementType.BOOL: struct.Struct("<?"),
}


class ArenaView:
    """Flat element storage backed by a byte range of a shared arena."""

    __slots__ = ("arena", "offset", "length", "_fmt")

    def __init__(self, arena: bytearray, offset: int, et: ElementType, length: int):
        self.arena = arena
        self.offset = offset
        self.length = length
        self._fmt = _ARENA_FORMATS[et]

    def __len__(self) -> int:
        return self.length

    def __getitem__(self, i: int):
        return self._fmt.unpack_from(self.arena, self.offset + i * self._fmt.size)[0]

    def __setitem__(self, i: int, value) -> None:
        self._fmt.pack_into(self.arena, self.offset + i * self._fmt.size, value)


@dataclass(frozen=True)
class Instruction:
    node_id: int
    kernel: str
    input_slots: tuple[str, ...]
    output_slot: str


@dataclass
class Executable:
    function: Function
    instructions: list[Instruction]
    plan: MemoryPlan
    pool: dict[tuple[int, int], TensorValue]
    layouts: dict[tuple[int, int], Layout]
    param_index: dict[tuple[int, int], int]
    result_index: dict[tuple[int, int], int]
    parameter_signature: list[tuple[TensorDescriptor, Layout]]
    result_signature: list[tuple[TensorDescriptor, Layout]]

    def listing(self) -> str:
        lines = [f"arena {self.plan.arena_size} bytes"]
        for i, inst in enumerate(self.instructions):
            lines.append(
                f"{i}\t{inst.node_id}\t{inst.kernel}\t"
                f"{','.join(inst.input_slots) or '-'}\t{inst.output_slot}"
            )
        return "\n".join(lines) + "\n"


def compile_function(
    fn: Function,
    *,
    optimize: bool = True,
    conv_layout: str = "identity",
    parameter_layouts: list[Layout | None] | None = None,
) -> Executable:
    """Lower a Function to an Executable.

    Pipeline: optional {simplify, cse, fold}, then layout assignment under
    `conv_layout` ("identity" or "nhwc"), liveness, and arena planning.
    Nodes no result depends on are not emitted (kernels are pure, so dead
    code is unobservable).
    """
    diags = validate_function(fn)
    if diags:
        raise ValidationFailure(diags)

    policy = layout_policy(conv_layout)
    g = fn
    if optimize:
        g = run_pipeline(g, ["simplify", "cse", "fold"])
    g = assign_layouts(g, policy, parameter_layouts)
    layouts = tensor_layouts(g, policy, parameter_layouts)
    plan = plan_memory(g)

    reachable = reachable_from_results(g)
    result_index: dict[tuple[int, int], int] = {}
    for j, ref in enumerate(g.results):
        result_index.setdefault(ref, j)
    param_index = {(pid, 0): i for i, pid in enumerate(g.parameters)}

    pool: dict[tuple[int, int], TensorValue] = {}
    instructions: list[Instruction] = []

    def slot_name(ref: tuple[int, int]) -> str:
        if ref in param_index:
            return f"param{param_index[ref]}"
        if ref in pool:
            return f"const{ref[0]}"
        if ref in result_index:
            return f"result{result_index[ref]}"
        return f"arena+{plan.placements[ref]}"

    for node_id in topological_order(g):
        if node_id not in reachable:
            continue
        node = g.nodes[node_id]
        if node.op is OpKind.PARAMETER:
            continue
        if node.op is OpKind.CONSTANT:
            pool[(node_id, 0)] = constant_value(node.attrs)
            continue
        instructions.append(
            Instruction(
                node_id,
                node.op.wire_name,
                tuple(slot_name(ref) for ref in node.inputs),
                slot_name((node_id, 0)),
            )
        )

    parameter_signature = [
        (g.nodes[pid].output, layouts[(pid, 0)]) for pid in g.parameters
    ]
    result_signature = [
        (g.nodes[ref[0]].outputs[ref[1]], layouts[ref]) for ref in g.results
    ]
    return Executable(
        g,
        instructions,
        plan,
        pool,
        layouts,
        param_index,
        result_index,
        parameter_signature,
        result_signature,
    )


def _check_signature(exe: Executable, inputs: list[TensorValue]) -> None:
    expected = exe.parameter_signature
    if len(inputs) != len(expected):
        raise SignatureMismatch(
            f"expected {len(expected)} inputs, got {len(inputs)}"
        )
    for i, (tensor, (desc, layout)) in enumerate(zip(inputs, expected)):
        if tensor.descriptor != desc:
            raise SignatureMismatch(
                f"input {i}: expected {desc}, got {tensor.descriptor}"
            )
        if tensor.layout.order != layout.order:
            raise SignatureMismatch(
                f"input {i}: expected layout order {list(layout.order)}, "
                f"got {list(tensor.layout.order)}"
            )


def call(
    exe: Executable, inputs: list[TensorValue], *, private_buffers: bool = False
) -> list[TensorValue]:
    """Execute and return one fresh tensor per result.

    With `private_buffers` every intermediate gets its own list buffer
    instead of an arena slot; outputs must be bit-identical either way
    (used to verify the plan never overlaps live tensors).
    """
    _check_signature(exe, inputs)
    fn = exe.function
    arena = bytearray(exe.plan.arena_size)
    env: dict[tuple[int, int], TensorValue] = dict(exe.pool)
    for ref, i in exe.param_index.items():
        env[ref] = inputs[i]

    fresh_results: dict[int, TensorValue] = {}
    for inst in exe.instructions:
        node = fn.nodes[inst.node_id]
        ref = (inst.node_id, 0)
        desc = node.output
        layout = exe.layouts[ref]
        if ref in exe.result_index:
            out = create_tensor(desc.element_type, desc.shape, layout)
            fresh_results[exe.result_index[ref]] = out
        elif private_buffers:
            out = create_tensor(desc.element_type, desc.shape, layout)
        else:
            out = TensorValue(
                desc,
                layout,
                ArenaView(
                    arena,
                    exe.plan.placements[ref],
                    desc.element_type,
                    desc.element_count,
                ),
            )
        env[ref] = out
        evaluate_node(node.op, node.attrs, [env[r] for r in node.inputs], out)

    results = []
    for j, ref in enumerate(fn.results):
        if j in fresh_results and exe.result_index[ref] == j:
            results.append(fresh_results[j])
        else:
            # Parameter/constant results and duplicate result refs are
            # copied so callers never alias internal or input storage.
            src = env[ref]
            results.append(
                tensor_from_flat(
                    src.element_type, src.shape, src.to_flat(), exe.layouts[ref]
                )
            )
    return results


# ---------------------------------------------------------------------------
# Heterogeneous-style execution: per-group sub-functions with CPU fallback


@dataclass
class _SubGraph:
    function: Function
    boundary_inputs: list[tuple[int, int]]  # refs in the parent function
    boundary_outputs: list[tuple[int, int]]


def _group_subfunction(fn: Function, group_nodes: tuple[int, ...], index) -> _SubGraph:
    group = set(group_nodes)
    consumed_outside: set[tuple[int, int]] = set()
    for node_id, node in fn.nodes.items():
        if node_id in group:
            continue
        consumed_outside.update(node.inputs)
    result_refs = set(fn.results)

    external_inputs: list[tuple[int, int]] = []
    embedded_constants: list[int] = []
    for node_id in sorted(group, key=lambda n: index[n]):
        for ref in fn.nodes[node_id].inputs:
            producer = fn.nodes[ref[0]]
            if ref[0] in group:
                continue
            if producer.op is OpKind.CONSTANT:
                if ref[0] not in embedded_constants:
                    embedded_constants.append(ref[0])
            elif ref not in external_inputs:
                external_inputs.append(ref)

    sub = Function(f"{fn.name}_part")
    mapping: dict[tuple[int, int], tuple[int, int]] = {}
    for ref in external_inputs:
        desc = fn.nodes[ref[0]].outputs[ref[1]]
        mapping[ref] = (sub.add_parameter(desc.element_type, desc.shape), 0)
    for const_id in embedded_constants:
        attrs = fn.nodes[const_id].attrs
        mapping[(const_id, 0)] = (
            sub.add_constant(attrs["element_type"], attrs["shape"], attrs["data"]),
            0,
        )
    for node_id in sorted(group, key=lambda n: index[n]):
        node = fn.nodes[node_id]
        new_id = sub.add_node(
            node.op,
            [mapping[ref] for ref in node.inputs],
            node.attrs,
            allow_internal=True,
        )
        mapping[(node_id, 0)] = (new_id, 0)

    boundary_outputs = sorted(
        (
            (node_id, 0)
            for node_id in group
            if (node_id, 0) in consumed_outside or (node_id, 0) in result_refs
        ),
        key=lambda ref: (index[ref[0]], ref[1]),
    )
    sub.set_results([mapping[ref] for ref in boundary_outputs])
    return _SubGraph(sub, external_inputs, boundary_outputs)


def run_with_fallback(
    fn: Function,
    supported,
    inputs: list[TensorValue],
    *,
    parts: Partitioning | None = None,
) -> list[TensorValue]:
    """Partition `fn`, compile each group separately, and execute the groups
    in condensation order, shuttling boundary tensors between them.

    Kernels are shared across groups, so the output is bit-identical to a
    plain unoptimized call.
    """
    parts = parts or partition(fn, supported)
    order = topological_order(fn)
    index = {node_id: i for i, node_id in enumerate(order)}

    group_of: dict[int, int] = {}
    for gi, group in enumerate(parts.groups):
        for node_id in group.nodes:
            group_of[node_id] = gi

    # Kahn over the condensation, smallest first-member index first.
    edges: set[tuple[int, int]] = set()
    for node_id, node in fn.nodes.items():
        g = group_of.get(node_id)
        if g is None:
            continue
        for ref, _port in node.inputs:
            h = group_of.get(ref)
            if h is not None and h != g:
                edges.add((h, g))
    indegree = {gi: 0 for gi in range(len(parts.groups))}
    for _, b in edges:
        indegree[b] += 1
    key = {gi: min(index[n] for n in parts.groups[gi].nodes) for gi in indegree}
    ready = [(key[gi], gi) for gi, d in indegree.items() if d == 0]
    heapq.heapify(ready)
    execution_order = []
    while ready:
        _, gi = heapq.heappop(ready)
        execution_order.append(gi)
        for a, b in edges:
            if a == gi:
                indegree[b] -= 1
                if indegree[b] == 0:
                    heapq.heappush(ready, (key[b], b))

    env: dict[tuple[int, int], TensorValue] = {}
    for i, pid in enumerate(fn.parameters):
        env[(pid, 0)] = inputs[i]

    for gi in execution_order:
        sub = _group_subfunction(fn, parts.groups[gi].nodes, index)
        exe = compile_function(sub.function, optimize=False)
        outs = call(exe, [env[ref] for ref in sub.boundary_inputs])
        for ref, value in zip(sub.boundary_outputs, outs):
            env[ref] = value

    results = []
    for ref in fn.results:
        if ref not in env:
            node = fn.nodes[ref[0]]
            if node.op is OpKind.CONSTANT:
                env[ref] = constant_value(node.attrs)
            else:
                raise SignatureMismatch(f"result {ref} was never produced")
        src = env[ref]
        results.append(tensor_from_flat(src.element_type, src.shape, src.to_flat()))
    return results
