"""graphforge: a miniature tensor-graph compiler.

A framework-neutral IR with shape/element-type inference, graph-to-graph
reverse-mode differentiation, rewrite/analysis passes (simplification, CSE,
constant folding, liveness, arena planning, layout assignment, backend
partitioning), and a deterministic reference interpreter, all driven by a
JSON graph format and a CLI.
"""

from .autodiff import check_gradient, differentiate
from .errors import GraphError
from .interpreter import call, compile_function, run_with_fallback
from .ir import (
    ElementType,
    Function,
    OpKind,
    Shape,
    TensorDescriptor,
    build_softmax,
    infer_output,
    topological_order,
    validate_function,
)
from .layout import Layout, LayoutPolicy, assign_layouts, identity_layout, layout_policy
from .memory import LiveInterval, MemoryPlan, liveness, plan_memory
from .partition import Partitioning, partition
from .rewrite import (
    ConstantPredicate,
    OpMatcher,
    Pattern,
    Wildcard,
    algebraic_simplify,
    constant_fold,
    eliminate_common_subexpressions,
    match_pattern,
    run_pipeline,
)
from .serialize import (
    export_dot,
    parse_function,
    parse_tensor,
    print_function,
    print_tensor,
)
from .tensor import TensorValue, create_tensor, tensor_from_flat, tensors_bit_equal

__version__ = "0.1.0"

__all__ = [
    "ElementType",
    "Function",
    "GraphError",
    "Layout",
    "LayoutPolicy",
    "LiveInterval",
    "MemoryPlan",
    "OpKind",
    "Partitioning",
    "Pattern",
    "OpMatcher",
    "Wildcard",
    "ConstantPredicate",
    "Shape",
    "TensorDescriptor",
    "TensorValue",
    "algebraic_simplify",
    "assign_layouts",
    "build_softmax",
    "call",
    "check_gradient",
    "compile_function",
    "constant_fold",
    "create_tensor",
    "differentiate",
    "eliminate_common_subexpressions",
    "export_dot",
    "identity_layout",
    "infer_output",
    "layout_policy",
    "liveness",
    "match_pattern",
    "parse_function",
    "parse_tensor",
    "partition",
    "plan_memory",
    "print_function",
    "print_tensor",
    "run_pipeline",
    "run_with_fallback",
    "tensor_from_flat",
    "tensors_bit_equal",
    "topological_order",
    "validate_function",
]
