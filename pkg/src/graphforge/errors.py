"""Exception hierarchy shared across the compiler."""

from __future__ import annotations


class GraphError(Exception):
    """Base class for all graph construction and compilation errors."""


class ArityMismatch(GraphError):
    pass


class ShapeMismatch(GraphError):
    pass


class ElementTypeMismatch(GraphError):
    pass


class InvalidAttribute(GraphError):
    pass


class UnknownInput(GraphError):
    pass


class CycleDetected(GraphError):
    def __init__(self, node_ids):
        self.node_ids = tuple(node_ids)
        super().__init__(f"cycle involving nodes {sorted(self.node_ids)}")


class NonDifferentiableOp(GraphError):
    pass


class UnsupportedStride(GraphError):
    pass


class MultipleResults(GraphError):
    pass


class RankMismatch(GraphError):
    pass


class SignatureMismatch(GraphError):
    pass


class UnsupportedOp(GraphError):
    pass


class UnknownPass(GraphError):
    pass


class DocumentError(GraphError):
    """Base class for interchange-format failures."""


class DocumentSyntaxError(DocumentError):
    def __init__(self, message, position=None):
        self.position = position
        if position is not None:
            message = f"{message} (at offset {position})"
        super().__init__(message)


class UnknownOp(DocumentError):
    pass


class ValidationFailure(DocumentError):
    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        lines = "; ".join(str(d) for d in self.diagnostics)
        super().__init__(f"function does not validate: {lines}")
