"""Backend partitioning: tag nodes main/fallback and group them into maximal
subgraphs whose condensation stays acyclic.

Parameters and constants are caller-owned and belong to no group.  Groups are
grown greedily in topological order, then coalesced to a fixpoint so that no
two same-tag groups can be merged without creating a cycle.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .ir import Function, Node, OpKind, topological_order

MAIN = "main"
FALLBACK = "fallback"


@dataclass(frozen=True)
class PartitionGroup:
    nodes: tuple[int, ...]  # sorted node ids
    tag: str


@dataclass
class Partitioning:
    assignment: dict[int, str]
    groups: list[PartitionGroup]


def _condensation_edges(fn: Function, group_of: dict[int, int]) -> set[tuple[int, int]]:
    edges = set()
    for node_id, node in fn.nodes.items():
        g = group_of.get(node_id)
        if g is None:
            continue
        for ref, _ in node.inputs:
            h = group_of.get(ref)
            if h is not None and h != g:
                edges.add((h, g))
    return edges


def _reaches(edges: set[tuple[int, int]], source: int, target: int) -> bool:
    stack = [source]
    seen = set()
    while stack:
        g = stack.pop()
        if g == target:
            return True
        if g in seen:
            continue
        seen.add(g)
        stack.extend(b for a, b in edges if a == g)
    return False


def condensation_is_acyclic(fn: Function, group_of: dict[int, int]) -> bool:
    edges = _condensation_edges(fn, group_of)
    groups = set(group_of.values())
    indegree = {g: 0 for g in groups}
    for _, b in edges:
        indegree[b] += 1
    ready = [g for g, d in indegree.items() if d == 0]
    done = 0
    while ready:
        g = ready.pop()
        done += 1
        for a, b in edges:
            if a == g:
                indegree[b] -= 1
                if indegree[b] == 0:
                    ready.append(b)
    return done == len(groups)


def partition(fn: Function, supported: Callable[[Node], bool]) -> Partitioning:
    """Greedy grouping plus same-tag coalescing to a merge fixpoint.

    Postcondition: the condensation is acyclic and no two distinct same-tag
    groups can be merged without creating a condensation cycle.
    """
    order = topological_order(fn)
    tags: dict[int, str] = {}
    group_of: dict[int, int] = {}
    group_tag: dict[int, str] = {}
    next_group = 0

    for node_id in order:
        node = fn.nodes[node_id]
        if node.op in (OpKind.PARAMETER, OpKind.CONSTANT):
            continue
        tag = MAIN if supported(node) else FALLBACK
        tags[node_id] = tag

        producer_groups = []
        for ref, _ in node.inputs:
            g = group_of.get(ref)
            if g is not None and group_tag[g] == tag and g not in producer_groups:
                producer_groups.append(g)

        joined = None
        edges = _condensation_edges(fn, group_of)
        for g in producer_groups:
            # Joining g adds an edge H -> g for every other producer group H;
            # that closes a cycle exactly when g already reaches H.
            others = {
                group_of[ref]
                for ref, _ in node.inputs
                if group_of.get(ref) is not None and group_of[ref] != g
            }
            if not any(_reaches(edges, g, h) for h in others):
                joined = g
                break
        if joined is None:
            joined = next_group
            group_tag[joined] = tag
            next_group += 1
        group_of[node_id] = joined

    # Coalesce: merge any same-tag pair whose union keeps the condensation
    # acyclic.  Greedy alone is not maximal (two groups grown independently
    # can become mergeable once a later node connects them).
    changed = True
    while changed:
        changed = False
        alive = sorted(set(group_of.values()))
        for i, a in enumerate(alive):
            for b in alive[i + 1 :]:
                if group_tag[a] != group_tag[b]:
                    continue
                trial = {
                    n: (a if g == b else g) for n, g in group_of.items()
                }
                if condensation_is_acyclic(fn, trial):
                    group_of = trial
                    changed = True
                    break
            if changed:
                break

    index = {node_id: i for i, node_id in enumerate(order)}
    members: dict[int, list[int]] = {}
    for node_id, g in group_of.items():
        members.setdefault(g, []).append(node_id)
    ordered_groups = sorted(members, key=lambda g: min(index[n] for n in members[g]))
    groups = [
        PartitionGroup(tuple(sorted(members[g])), group_tag[g]) for g in ordered_groups
    ]
    return Partitioning(tags, groups)
