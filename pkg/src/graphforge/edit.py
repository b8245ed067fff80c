"""Internal helpers for building modified copies of Functions.

Passes never mutate their input; they assemble a new Function that keeps the
original node ids (merged nodes keep the earliest id, inserted nodes take
fresh ids above the current maximum).
"""

from __future__ import annotations

from .ir import Function, Node, reachable_from_results


def resolve(redirect: dict, ref: tuple[int, int]) -> tuple[int, int]:
    while ref in redirect:
        ref = redirect[ref]
    return ref


def rebuild(
    fn: Function,
    drop: frozenset | set = frozenset(),
    redirect: dict | None = None,
) -> Function:
    """Copy `fn`, dropping nodes and redirecting tensor references.

    `redirect` maps (id, port) -> (id, port) and is followed transitively;
    callers must redirect every reference to a dropped node.
    """
    redirect = redirect or {}
    g = Function(fn.name)
    for node_id in sorted(fn.nodes):
        if node_id in drop:
            continue
        node = fn.nodes[node_id]
        inputs = tuple(resolve(redirect, ref) for ref in node.inputs)
        g.nodes[node_id] = Node(node.id, node.op, node.attrs, inputs, node.outputs)
    g.parameters = list(fn.parameters)
    g.results = [resolve(redirect, ref) for ref in fn.results]
    return g


def prune_unreachable(fn: Function) -> Function:
    """Drop non-parameter nodes that no result depends on."""
    keep = reachable_from_results(fn) | set(fn.parameters)
    if keep >= set(fn.nodes):
        return fn
    g = Function(fn.name)
    for node_id in sorted(fn.nodes):
        if node_id in keep:
            g.nodes[node_id] = fn.nodes[node_id]
    g.parameters = list(fn.parameters)
    g.results = list(fn.results)
    return g
