"""Textual interchange formats: function documents, tensor documents, and
Graphviz export.

Documents are JSON.  The canonical printed form sorts nodes by id and
attribute keys alphabetically, keeps the field order (id, op, attrs, inputs),
and writes floats in round-trip-exact decimal form; NaN and infinities appear
as the strings "NaN", "Inf", "-Inf" so the output stays valid JSON.  Only
Parameter and Constant nodes carry shapes; every other descriptor is
re-inferred on parse, so a document can never disagree with the inference
rules.
"""

from __future__ import annotations

import json
import math

from .errors import DocumentSyntaxError, UnknownOp, ValidationFailure
from .ir import (
    OP_BY_WIRE_NAME,
    Diagnostic,
    ElementType,
    Function,
    Node,
    OpKind,
    infer_output,
    normalize_attrs,
    validate_function,
)
from .layout import Layout
from .tensor import TensorValue, create_tensor

_SPECIALS = {"NaN": math.nan, "Inf": math.inf, "-Inf": -math.inf}


def _encode_float(v: float):
    if math.isnan(v):
        return "NaN"
    if math.isinf(v):
        return "Inf" if v > 0 else "-Inf"
    return v


def _decode_number(v, et: ElementType):
    if isinstance(v, str):
        if not et.is_float or v not in _SPECIALS:
            raise DocumentSyntaxError(f"bad numeric entry {v!r}")
        return _SPECIALS[v]
    return v


def _encode_data(data, et: ElementType) -> list:
    if et.is_float:
        return [_encode_float(v) for v in data]
    return list(data)


def _attrs_to_json(attrs) -> dict:
    out = {}
    et = attrs.get("element_type")
    for key in sorted(attrs):
        value = attrs[key]
        if isinstance(value, ElementType):
            out[key] = value.value
        elif key == "data":
            out[key] = _encode_data(value, et)
        elif isinstance(value, tuple):
            out[key] = list(value)
        else:
            out[key] = value
    return out


def function_to_document(fn: Function) -> dict:
    nodes = []
    for node_id in sorted(fn.nodes):
        node = fn.nodes[node_id]
        nodes.append(
            {
                "id": node_id,
                "op": node.op.wire_name,
                "attrs": _attrs_to_json(node.attrs),
                "inputs": [[ref, port] for ref, port in node.inputs],
            }
        )
    return {
        "name": fn.name,
        "nodes": nodes,
        "parameters": list(fn.parameters),
        "results": [[ref, port] for ref, port in fn.results],
    }


def print_function(fn: Function) -> str:
    """Canonical text form; printing twice yields identical bytes."""
    return json.dumps(function_to_document(fn), indent=2) + "\n"


def _expect(cond, message):
    if not cond:
        raise DocumentSyntaxError(message)


def parse_function(text: str) -> Function:
    """Parse and fully validate a function document.

    Raises DocumentSyntaxError for malformed JSON or structure, UnknownOp for
    an op name outside the fixed set, and ValidationFailure (carrying
    diagnostics) when the graph breaks a Function invariant.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DocumentSyntaxError(exc.msg, position=exc.pos)
    return document_to_function(doc)


def document_to_function(doc) -> Function:
    _expect(isinstance(doc, dict), "document must be a JSON object")
    extra = set(doc) - {"name", "nodes", "parameters", "results"}
    _expect(not extra, f"unknown document fields {sorted(extra)}")
    _expect(isinstance(doc.get("name"), str), "'name' must be a string")
    _expect(isinstance(doc.get("nodes"), list), "'nodes' must be a list")
    _expect(isinstance(doc.get("parameters"), list), "'parameters' must be a list")
    _expect(isinstance(doc.get("results"), list), "'results' must be a list")

    specs = {}
    for entry in doc["nodes"]:
        _expect(isinstance(entry, dict), "node entries must be objects")
        extra = set(entry) - {"id", "op", "attrs", "inputs"}
        _expect(not extra, f"unknown node fields {sorted(extra)}")
        node_id = entry.get("id")
        _expect(isinstance(node_id, int) and not isinstance(node_id, bool),
                "node id must be an integer")
        _expect(node_id not in specs, f"duplicate node id {node_id}")
        op_name = entry.get("op")
        if op_name not in OP_BY_WIRE_NAME:
            raise UnknownOp(f"unknown op {op_name!r}")
        attrs = entry.get("attrs", {})
        _expect(isinstance(attrs, dict), f"node {node_id}: attrs must be an object")
        inputs = entry.get("inputs", [])
        _expect(isinstance(inputs, list), f"node {node_id}: inputs must be a list")
        refs = []
        for ref in inputs:
            _expect(
                isinstance(ref, list) and len(ref) == 2
                and all(isinstance(x, int) for x in ref),
                f"node {node_id}: inputs must be [id, port] pairs",
            )
            refs.append((ref[0], ref[1]))
        specs[node_id] = (OP_BY_WIRE_NAME[op_name], attrs, tuple(refs))

    diagnostics: list[Diagnostic] = []
    fn = Function(doc["name"])

    # Process nodes producers-first so descriptors can be inferred; anything
    # left over is a cycle or a dangling reference.
    pending = dict(specs)
    while pending:
        ready = [
            nid
            for nid, (_, _, refs) in pending.items()
            if all(r in fn.nodes for r, _ in refs)
        ]
        if not ready:
            break
        for node_id in sorted(ready):
            kind, raw_attrs, refs = pending.pop(node_id)
            try:
                attrs = _attrs_from_json(kind, raw_attrs)
                descs = []
                ok = True
                for ref, port in refs:
                    if port >= len(fn.nodes[ref].outputs):
                        diagnostics.append(
                            Diagnostic("unknown-input", node_id, f"bad port {ref}:{port}")
                        )
                        ok = False
                        break
                    descs.append(fn.nodes[ref].outputs[port])
                if not ok:
                    continue
                out = infer_output(kind, attrs, descs)
            except DocumentSyntaxError:
                raise
            except Exception as exc:
                diagnostics.append(Diagnostic("bad-attrs", node_id, str(exc)))
                continue
            fn.nodes[node_id] = Node(node_id, kind, attrs, refs, (out,))

    for node_id, (_, _, refs) in sorted(pending.items()):
        missing = [r for r, _ in refs if r not in specs]
        if missing:
            diagnostics.append(
                Diagnostic("unknown-input", node_id, f"missing inputs {missing}")
            )
        else:
            diagnostics.append(
                Diagnostic("cycle", node_id, "node participates in a cycle")
            )

    for pid in doc["parameters"]:
        _expect(isinstance(pid, int), "'parameters' entries must be node ids")
        fn.parameters.append(pid)
    for ref in doc["results"]:
        _expect(
            isinstance(ref, list) and len(ref) == 2
            and all(isinstance(x, int) for x in ref),
            "'results' entries must be [id, port] pairs",
        )
        fn.results.append((ref[0], ref[1]))

    if not diagnostics:
        diagnostics = validate_function(fn)
    if diagnostics:
        raise ValidationFailure(diagnostics)
    return fn


def _attrs_from_json(kind: OpKind, raw: dict) -> dict:
    attrs = dict(raw)
    if kind in (OpKind.PARAMETER, OpKind.CONSTANT) and "data" in attrs:
        et = attrs.get("element_type")
        if et in (ElementType.F32.value, ElementType.F64.value):
            data = attrs["data"]
            if isinstance(data, list):
                attrs["data"] = [
                    _decode_number(v, ElementType(et)) for v in data
                ]
    return normalize_attrs(kind, attrs)


# ---------------------------------------------------------------------------
# Tensor documents


def tensor_to_document(t: TensorValue) -> dict:
    return {
        "element_type": t.element_type.value,
        "shape": list(t.shape),
        "order": list(t.layout.order),
        "data": _encode_data(list(t.buffer), t.element_type),
    }


def print_tensor(t: TensorValue) -> str:
    return json.dumps(tensor_to_document(t), indent=2) + "\n"


def parse_tensor(text: str) -> TensorValue:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DocumentSyntaxError(exc.msg, position=exc.pos)
    _expect(isinstance(doc, dict), "tensor document must be a JSON object")
    extra = set(doc) - {"element_type", "shape", "order", "data"}
    _expect(not extra, f"unknown tensor fields {sorted(extra)}")
    try:
        et = ElementType(doc.get("element_type"))
    except ValueError:
        raise DocumentSyntaxError(f"unknown element type {doc.get('element_type')!r}")
    shape = doc.get("shape")
    _expect(
        isinstance(shape, list) and all(isinstance(d, int) and d >= 0 for d in shape),
        "'shape' must be a list of non-negative integers",
    )
    order = doc.get("order", list(range(len(shape))))
    _expect(isinstance(order, list), "'order' must be a list")
    data = doc.get("data")
    _expect(isinstance(data, list), "'data' must be a list")
    t = create_tensor(et, tuple(shape), Layout(tuple(order)))
    _expect(
        len(data) == t.descriptor.element_count,
        f"data length {len(data)} != element count {t.descriptor.element_count}",
    )
    from .tensor import coerce_scalar

    for i, v in enumerate(data):
        t.buffer[i] = coerce_scalar(et, _decode_number(v, et))
    return t


# ---------------------------------------------------------------------------
# Graphviz export


def export_dot(fn: Function) -> str:
    """Graphviz digraph with one node per IR node and one edge per input."""
    lines = [f'digraph "{fn.name}" {{']
    for node_id in sorted(fn.nodes):
        node = fn.nodes[node_id]
        label = f"{node_id}: {node.op.wire_name} {list(node.output.shape)}"
        lines.append(f'  n{node_id} [label="{label}"];')
    for node_id in sorted(fn.nodes):
        for ref, _port in fn.nodes[node_id].inputs:
            lines.append(f"  n{ref} -> n{node_id};")
    lines.append("}")
    return "\n".join(lines) + "\n"
