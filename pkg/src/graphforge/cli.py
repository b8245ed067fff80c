"""Command-line driver.

Subcommands: validate | run | grad | optimize | plan | partition | dot.
Machine-readable payloads go to stdout or files; diagnostics go to stderr.
Exit codes: 0 success, 2 validation/parse failure, 3 runtime execution
failure, 4 usage error.  GRAPHFORGE_CONV_LAYOUT=identity|nhwc selects the
Conv2D layout preference for `run` (default identity).
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .autodiff import differentiate
from .errors import (
    ArityMismatch,
    CycleDetected,
    DocumentError,
    ElementTypeMismatch,
    GraphError,
    InvalidAttribute,
    MultipleResults,
    NonDifferentiableOp,
    ShapeMismatch,
    SignatureMismatch,
    UnknownInput,
    UnknownPass,
    UnsupportedStride,
    ValidationFailure,
)
from .interpreter import call, compile_function
from .ir import OP_BY_WIRE_NAME
from .memory import liveness, plan_memory
from .partition import partition
from .rewrite import run_pipeline
from .serialize import (
    export_dot,
    parse_function,
    parse_tensor,
    print_function,
    print_tensor,
)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3
EXIT_USAGE = 4


class UsageError(Exception):
    pass


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}")


def _load_function(path: str):
    return parse_function(_read_text(path))


def _cmd_validate(args) -> int:
    try:
        _load_function(args.file)
    except ValidationFailure as exc:
        for diag in exc.diagnostics:
            print(str(diag), file=sys.stderr)
        return EXIT_VALIDATION
    print("OK")
    return EXIT_OK


def _conv_layout_from_env() -> str:
    value = os.environ.get("GRAPHFORGE_CONV_LAYOUT", "identity")
    if value not in ("identity", "nhwc"):
        raise UsageError(
            f"GRAPHFORGE_CONV_LAYOUT must be 'identity' or 'nhwc', got {value!r}"
        )
    return value


def _bind_inputs(fn, specs: list[str]):
    """Match --input entries to parameters by order, or by name p<k>."""
    named: dict[int, str] = {}
    positional: list[str] = []
    for spec in specs:
        name, sep, path = spec.partition("=")
        if sep and name.startswith("p") and name[1:].isdigit():
            k = int(name[1:])
            if k in named:
                raise UsageError(f"duplicate input for p{k}")
            named[k] = path
        else:
            positional.append(spec)
    paths = []
    queue = list(positional)
    for k in range(len(fn.parameters)):
        if k in named:
            paths.append(named.pop(k))
        elif queue:
            paths.append(queue.pop(0))
        else:
            raise UsageError(f"missing input for parameter p{k}")
    if named or queue:
        raise UsageError("more inputs than parameters")
    return [parse_tensor(_read_text(p)) for p in paths]


def _cmd_run(args) -> int:
    fn = _load_function(args.file)
    tensors = _bind_inputs(fn, args.input or [])
    exe = compile_function(
        fn,
        optimize=not args.no_optimize,
        conv_layout=_conv_layout_from_env(),
        parameter_layouts=[t.layout for t in tensors],
    )
    results = call(exe, tensors)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for j, tensor in enumerate(results):
        path = out_dir / f"result{j}.tensor.json"
        path.write_text(print_tensor(tensor), encoding="utf-8")
        print(f"result{j} {tensor.descriptor} {path}")
    return EXIT_OK


def _parse_wrt(fn, text: str | None) -> list[int]:
    if text is None:
        return list(fn.parameters)
    ids = []
    for item in text.split(","):
        item = item.strip()
        if not (item.startswith("p") and item[1:].isdigit()):
            raise UsageError(f"--wrt entries look like p0,p1,...; got {item!r}")
        k = int(item[1:])
        if k >= len(fn.parameters):
            raise UsageError(f"no parameter p{k}")
        ids.append(fn.parameters[k])
    return ids


def _cmd_grad(args) -> int:
    fn = _load_function(args.file)
    grad = differentiate(fn, _parse_wrt(fn, args.wrt))
    text = print_function(grad)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_optimize(args) -> int:
    fn = _load_function(args.file)
    spec = args.passes if args.passes is not None else "simplify,cse,fold"
    names = [n for n in spec.split(",") if n]
    optimized = run_pipeline(fn, names)
    Path(args.out).write_text(print_function(optimized), encoding="utf-8")
    print(f"nodes before {len(fn.nodes)} after {len(optimized.nodes)}")
    return EXIT_OK


def _cmd_plan(args) -> int:
    fn = _load_function(args.file)
    plan = plan_memory(fn)
    for iv in liveness(fn):
        node = fn.nodes[iv.tensor[0]]
        size = node.outputs[iv.tensor[1]].byte_size
        offset = plan.placements.get(iv.tensor)
        end = "inf" if iv.end == float("inf") else str(iv.end)
        cols = (
            str(iv.tensor[0]),
            str(iv.start),
            end,
            "-" if offset is None else str(offset),
            str(size),
        )
        print("\t".join(cols))
    print(f"arena {plan.arena_size} bytes")
    return EXIT_OK


def _cmd_partition(args) -> int:
    fn = _load_function(args.file)
    names = set()
    if args.supported:
        for item in args.supported.split(","):
            item = item.strip()
            if item not in OP_BY_WIRE_NAME:
                raise UsageError(f"unknown op {item!r} in --supported")
            names.add(item)
    parts = partition(fn, lambda node: node.op.wire_name in names)
    for i, group in enumerate(parts.groups):
        ids = ",".join(str(n) for n in group.nodes)
        print(f"group{i}\t{group.tag}\t{ids}")
    return EXIT_OK


def _cmd_dot(args) -> int:
    fn = _load_function(args.file)
    sys.stdout.write(export_dot(fn))
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="graphforge", description="tensor graph compiler and interpreter"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="parse and validate a function document")
    p.add_argument("file")
    p.set_defaults(handler=_cmd_validate)

    p = sub.add_parser("run", help="compile and execute a function")
    p.add_argument("file")
    p.add_argument("--input", action="append", metavar="[p<k>=]TENSORFILE")
    p.add_argument("--out", required=True, help="directory for result tensors")
    p.add_argument("--no-optimize", action="store_true")
    p.set_defaults(handler=_cmd_run)

    p = sub.add_parser("grad", help="emit the gradient function")
    p.add_argument("file")
    p.add_argument("--wrt", help="comma-separated parameter names, e.g. p0,p1")
    p.add_argument("--out", help="output file (stdout when omitted)")
    p.set_defaults(handler=_cmd_grad)

    p = sub.add_parser("optimize", help="run rewrite passes and print the result")
    p.add_argument("file")
    p.add_argument("--passes", help="comma-separated: simplify,cse,fold,layouts")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_optimize)

    p = sub.add_parser("plan", help="print liveness intervals and arena offsets")
    p.add_argument("file")
    p.set_defaults(handler=_cmd_plan)

    p = sub.add_parser("partition", help="group nodes by backend support")
    p.add_argument("file")
    p.add_argument("--supported", help="comma-separated op names")
    p.set_defaults(handler=_cmd_partition)

    p = sub.add_parser("dot", help="print a Graphviz digraph")
    p.add_argument("file")
    p.set_defaults(handler=_cmd_dot)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        return args.handler(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except UnknownPass as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValidationFailure as exc:
        for diag in exc.diagnostics:
            print(str(diag), file=sys.stderr)
        return EXIT_VALIDATION
    except (
        DocumentError,
        SignatureMismatch,
        InvalidAttribute,
        NonDifferentiableOp,
        UnsupportedStride,
        MultipleResults,
        ShapeMismatch,
        ElementTypeMismatch,
        ArityMismatch,
        UnknownInput,
        CycleDetected,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except GraphError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
