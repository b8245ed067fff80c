"""Liveness analysis and static arena planning for intermediate tensors.

Instruction indices refer to positions in the deterministic topological
order of the whole Function (parameters and constants included).  Result
tensors stay live to end-of-program; parameters, constants, and results are
caller-owned and never placed in the arena.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .ir import Function, OpKind, reachable_from_results, topological_order

ALIGNMENT = 64

END_OF_PROGRAM = math.inf


@dataclass(frozen=True)
class LiveInterval:
    tensor: tuple[int, int]
    start: int
    end: int | float  # END_OF_PROGRAM for result tensors


@dataclass
class MemoryPlan:
    arena_size: int
    placements: dict[tuple[int, int], int]
    intervals: list[LiveInterval]
    alignment: int = ALIGNMENT
    sizes: dict[tuple[int, int], int] = field(default_factory=dict)


def align_up(n: int, alignment: int = ALIGNMENT) -> int:
    return (n + alignment - 1) // alignment * alignment


def intervals_overlap(a: LiveInterval, b: LiveInterval) -> bool:
    return a.start <= b.end and b.start <= a.end


def liveness(fn: Function) -> list[LiveInterval]:
    """One interval per node output reachable from the results.

    start = producer's topological index (0 for parameters and constants,
    which are live from entry); end = the last consumer's index, or
    end-of-program for result tensors.  Ordered by start, then node id.
    """
    order = topological_order(fn)
    index = {node_id: i for i, node_id in enumerate(order)}
    reachable = reachable_from_results(fn)
    result_tensors = set(fn.results)

    last_use: dict[tuple[int, int], int | float] = {}
    for node_id in reachable:
        for ref in fn.nodes[node_id].inputs:
            prev = last_use.get(ref, -1)
            last_use[ref] = max(prev, index[node_id])

    intervals = []
    for node_id in sorted(reachable, key=lambda i: (index[i], i)):
        node = fn.nodes[node_id]
        start = 0 if node.op in (OpKind.PARAMETER, OpKind.CONSTANT) else index[node_id]
        for port in range(len(node.outputs)):
            ref = (node_id, port)
            if ref in result_tensors:
                end = END_OF_PROGRAM
            else:
                end = last_use.get(ref, index[node_id])
            intervals.append(LiveInterval(ref, start, end))
    return intervals


def plan_memory(fn: Function) -> MemoryPlan:
    """First-fit arena plan over intermediate tensors.

    Tensors are placed in (start asc, byte size desc, node id asc) order,
    each at the smallest 64-byte-aligned offset whose byte range is disjoint
    from every already-placed tensor with an overlapping live interval.
    """
    intervals = liveness(fn)
    by_tensor = {iv.tensor: iv for iv in intervals}
    result_tensors = set(fn.results)

    sizes: dict[tuple[int, int], int] = {}
    candidates = []
    for iv in intervals:
        node = fn.nodes[iv.tensor[0]]
        sizes[iv.tensor] = node.outputs[iv.tensor[1]].byte_size
        if node.op in (OpKind.PARAMETER, OpKind.CONSTANT):
            continue
        if iv.tensor in result_tensors:
            continue
        candidates.append(iv)

    candidates.sort(key=lambda iv: (iv.start, -sizes[iv.tensor], iv.tensor))

    placements: dict[tuple[int, int], int] = {}
    for iv in candidates:
        size = sizes[iv.tensor]
        conflicts = sorted(
            (placements[other.tensor], placements[other.tensor] + sizes[other.tensor])
            for other in candidates
            if other.tensor in placements and intervals_overlap(iv, other)
        )
        offset = 0
        for lo, hi in conflicts:
            if offset + size <= lo:
                break
            offset = max(offset, align_up(hi))
        placements[iv.tensor] = offset

    arena = max(
        (off + sizes[t] for t, off in placements.items()),
        default=0,
    )
    return MemoryPlan(align_up(arena), placements, intervals, ALIGNMENT, sizes)


def liveness_reference(fn: Function) -> list[LiveInterval]:
    """Quadratic oracle: scan every later instruction for uses of each tensor."""
    order = topological_order(fn)
    index = {node_id: i for i, node_id in enumerate(order)}
    reachable = reachable_from_results(fn)
    result_tensors = set(fn.results)
    intervals = []
    for node_id in sorted(reachable, key=lambda i: (index[i], i)):
        node = fn.nodes[node_id]
        start = 0 if node.op in (OpKind.PARAMETER, OpKind.CONSTANT) else index[node_id]
        for port in range(len(node.outputs)):
            ref = (node_id, port)
            if ref in result_tensors:
                end: int | float = END_OF_PROGRAM
            else:
                end = start
                for later in order:
                    if later in reachable and ref in fn.nodes[later].inputs:
                        end = max(end, index[later])
            intervals.append(LiveInterval(ref, start, end))
    return intervals
