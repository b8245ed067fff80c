"""Pattern matching, algebraic simplification, common-subexpression
elimination, constant folding, and the named pass pipeline.

Every pass is a pure Function -> Function transform that preserves observable
semantics; simplify and cse are idempotent, and folding reuses the
interpreter's kernels so folded values are bit-identical to runtime results.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable

from .edit import prune_unreachable, rebuild, resolve
from .errors import UnknownPass
from .ir import (
    Function,
    Node,
    OpKind,
    attrs_key,
    op_arity,
    topological_order,
)
from .kernels import constant_value, evaluate_node
from .tensor import create_tensor

# ---------------------------------------------------------------------------
# Pattern matching


class Pattern:
    """Base class for rooted structural patterns over the node graph."""


@dataclass(frozen=True)
class Wildcard(Pattern):
    label: str


@dataclass(frozen=True)
class OpMatcher(Pattern):
    kind: OpKind
    inputs: tuple[Pattern, ...] = ()

    def __post_init__(self):
        if len(self.inputs) != op_arity(self.kind):
            raise ValueError(
                f"{self.kind.wire_name} pattern needs {op_arity(self.kind)} "
                f"sub-patterns, got {len(self.inputs)}"
            )


@dataclass(frozen=True)
class ConstantPredicate(Pattern):
    """Matches a Constant node whose attributes satisfy `predicate`."""

    description: str
    predicate: Callable = field(compare=False)


def match_pattern(pattern: Pattern, fn: Function, root: int) -> dict[str, int] | None:
    """Bindings from wildcard labels to node ids, or None if no match.

    The same label must bind the same node everywhere it appears.
    """
    bindings: dict[str, int] = {}

    def walk(p: Pattern, node_id: int) -> bool:
        node = fn.nodes[node_id]
        if isinstance(p, Wildcard):
            bound = bindings.get(p.label)
            if bound is None:
                bindings[p.label] = node_id
                return True
            return bound == node_id
        if isinstance(p, ConstantPredicate):
            return node.op is OpKind.CONSTANT and bool(p.predicate(node.attrs))
        if isinstance(p, OpMatcher):
            if node.op is not p.kind:
                return False
            return all(
                walk(sub, ref[0]) for sub, ref in zip(p.inputs, node.inputs)
            )
        raise TypeError(f"not a pattern: {p!r}")

    return bindings if walk(pattern, root) else None


def _all_elements_equal(value):
    def predicate(attrs):
        data = attrs["data"]
        return len(data) > 0 and all(v == value for v in data)

    return predicate


CONST_ZERO = ConstantPredicate("all elements = 0", _all_elements_equal(0))
CONST_ONE = ConstantPredicate("all elements = 1", _all_elements_equal(1))


# ---------------------------------------------------------------------------
# Algebraic simplification

# Each rule: (pattern, guard(fn, root, bindings) -> replacement ref or None).
# The replacement must carry the same descriptor as the matched root.


def _replace_with_binding(label):
    def apply(fn, root, bindings):
        return (bindings[label], 0)

    return apply


def _reshape_pair_is_identity(fn: Function, root: int) -> bool:
    outer = fn.nodes[root]
    inner = fn.nodes[outer.inputs[0][0]]
    source = fn.nodes[inner.inputs[0][0]]
    if outer.output.shape != source.output.shape:
        return False
    count = source.output.element_count
    if count == 0:
        return True
    # Trace each flat position through both axis permutations and row-major
    # re-reads; the pair elides only if the composite map is the identity.
    positions = list(range(count))
    for node in (inner, outer):
        in_shape = fn.nodes[node.inputs[0][0]].output.shape
        order = node.attrs["input_order"]
        perm_dims = [in_shape[a] for a in order]
        in_strides = []
        stride = 1
        for d in reversed(in_shape):
            in_strides.append(stride)
            stride *= d
        in_strides.reverse()
        mapped = []
        src = [0] * len(order)
        for perm_idx in itertools.product(*(range(d) for d in perm_dims)):
            for pos, axis in enumerate(order):
                src[axis] = perm_idx[pos]
            flat = sum(i * s for i, s in zip(src, in_strides))
            mapped.append(positions[flat])
        positions = mapped
    return positions == list(range(count))


def _reshape_reshape_rule(fn, root, bindings):
    if not _reshape_pair_is_identity(fn, root):
        return None
    inner = fn.nodes[fn.nodes[root].inputs[0][0]]
    return inner.inputs[0]


_W = Wildcard("x")

_SIMPLIFY_RULES = [
    (OpMatcher(OpKind.ADD, (_W, CONST_ZERO)), _replace_with_binding("x")),
    (OpMatcher(OpKind.ADD, (CONST_ZERO, _W)), _replace_with_binding("x")),
    (OpMatcher(OpKind.SUBTRACT, (_W, CONST_ZERO)), _replace_with_binding("x")),
    (OpMatcher(OpKind.MULTIPLY, (_W, CONST_ONE)), _replace_with_binding("x")),
    (OpMatcher(OpKind.MULTIPLY, (CONST_ONE, _W)), _replace_with_binding("x")),
    (OpMatcher(OpKind.DIVIDE, (_W, CONST_ONE)), _replace_with_binding("x")),
    (
        OpMatcher(OpKind.NEGATE, (OpMatcher(OpKind.NEGATE, (_W,)),)),
        _replace_with_binding("x"),
    ),
    (
        OpMatcher(OpKind.RESHAPE, (OpMatcher(OpKind.RESHAPE, (Wildcard("x"),)),)),
        _reshape_reshape_rule,
    ),
]


def algebraic_simplify(fn: Function) -> Function:
    """Apply the local rewrite rules to fixpoint and prune dead nodes."""
    while True:
        redirect: dict[tuple[int, int], tuple[int, int]] = {}
        for node_id in topological_order(fn):
            if (node_id, 0) in redirect:
                continue
            for pattern, apply in _SIMPLIFY_RULES:
                bindings = match_pattern(pattern, fn, node_id)
                if bindings is None:
                    continue
                replacement = apply(fn, node_id, bindings)
                if replacement is None:
                    continue
                redirect[(node_id, 0)] = resolve(redirect, replacement)
                break
        if not redirect:
            return prune_unreachable(fn)
        fn = prune_unreachable(rebuild(fn, drop=set(), redirect=redirect))


# ---------------------------------------------------------------------------
# Common-subexpression elimination


def eliminate_common_subexpressions(fn: Function) -> Function:
    """Merge nodes with identical (op, attrs, inputs) onto the earliest id."""
    while True:
        seen: dict[tuple, int] = {}
        redirect: dict[tuple[int, int], tuple[int, int]] = {}
        drop: set[int] = set()
        for node_id in topological_order(fn):
            node = fn.nodes[node_id]
            if node.op is OpKind.PARAMETER:
                continue
            inputs = tuple(resolve(redirect, ref) for ref in node.inputs)
            key = (node.op, attrs_key(node), inputs)
            kept = seen.get(key)
            if kept is None:
                seen[key] = node_id
            else:
                redirect[(node_id, 0)] = (kept, 0)
                drop.add(node_id)
        if not drop:
            return prune_unreachable(fn)
        fn = prune_unreachable(rebuild(fn, drop=drop, redirect=redirect))


# ---------------------------------------------------------------------------
# Constant folding


def constant_fold(fn: Function) -> Function:
    """Evaluate every node whose inputs are all Constants, in place by id.

    Uses the interpreter's kernels, so folded data is bit-identical to what
    runtime execution would produce.  NaN/Inf results fold like any value.
    """
    g = rebuild(fn)
    changed = True
    while changed:
        changed = False
        for node_id in topological_order(g):
            node = g.nodes[node_id]
            if node.op in (OpKind.PARAMETER, OpKind.CONSTANT) or not node.inputs:
                continue
            producers = [g.nodes[ref] for ref, _ in node.inputs]
            if not all(p.op is OpKind.CONSTANT for p in producers):
                continue
            inputs = [constant_value(p.attrs) for p in producers]
            out = create_tensor(node.output.element_type, node.output.shape)
            evaluate_node(node.op, node.attrs, inputs, out)
            attrs = {
                "element_type": out.element_type,
                "shape": out.shape,
                "data": tuple(out.to_flat()),
            }
            g.nodes[node_id] = Node(node_id, OpKind.CONSTANT, attrs, (), node.outputs)
            changed = True
    return prune_unreachable(g)


# ---------------------------------------------------------------------------
# Pipeline

PASSES: dict[str, Callable[[Function], Function]] = {
    "simplify": algebraic_simplify,
    "cse": eliminate_common_subexpressions,
    "fold": constant_fold,
}


def run_pipeline(fn: Function, passes: list[str], layout_policy=None) -> Function:
    """Apply named passes in order; `layouts` uses the given policy."""
    from .layout import LayoutPolicy, assign_layouts

    for name in passes:
        if name == "layouts":
            fn = assign_layouts(fn, layout_policy or LayoutPolicy())
        elif name in PASSES:
            fn = PASSES[name](fn)
        else:
            raise UnknownPass(
                f"unknown pass {name!r}; expected one of "
                f"{sorted([*PASSES, 'layouts'])}"
            )
    return fn
