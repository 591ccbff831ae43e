"""Exception types shared across the package.

Structural validation problems that should be *reported in bulk* (shape
checking, document parsing) are represented as :class:`Issue` values rather
than exceptions, so callers can surface every problem at once.
"""

from __future__ import annotations

from dataclasses import dataclass


class CapsForgeError(Exception):
    """Base class for all library errors."""


# --- tensor kernels ---------------------------------------------------------

class ShapeMismatch(CapsForgeError):
    pass


class StrideMismatch(CapsForgeError):
    pass


class WindowMismatch(CapsForgeError):
    pass


# --- graph substrate --------------------------------------------------------

class GraphError(CapsForgeError):
    pass


class SelfLoop(GraphError):
    pass


class DuplicateEdge(GraphError):
    pass


class DanglingEdge(GraphError):
    pass


class CycleDetected(GraphError):
    pass


class NotConnected(GraphError):
    pass


# --- generation calculus ----------------------------------------------------

class GenerationError(CapsForgeError):
    pass


class EmptySubset(GenerationError):
    pass


class OverlappingNetworks(GenerationError):
    pass


class UnknownNode(GenerationError):
    pass


class MultipleComponentsRemain(GenerationError):
    pass


class MissingInput(GenerationError):
    pass


# --- capsule model ----------------------------------------------------------

class InputShapeMismatch(CapsForgeError):
    pass


class Unsupported(CapsForgeError):
    pass


class Degenerate(CapsForgeError):
    pass


# --- symbol catalog ---------------------------------------------------------

class UnknownSymbolKind(CapsForgeError):
    pass


class IncompatibleBackEnd(CapsForgeError):
    pass


# --- backprop / training ----------------------------------------------------

class MissingTarget(CapsForgeError):
    pass


class StaleCache(CapsForgeError):
    pass


class DomainError(CapsForgeError):
    pass


# --- persistence ------------------------------------------------------------

class DocumentSyntaxError(CapsForgeError):
    pass


class UnresolvedReference(CapsForgeError):
    pass


class FormatError(CapsForgeError):
    pass


class HashMismatch(CapsForgeError):
    pass


class ShapeErrors(CapsForgeError):
    """Aggregated shape-validation failures for a whole network.

    Carries the full issue list so callers never see just the first problem.
    """

    def __init__(self, issues):
        self.issues = list(issues)
        super().__init__("; ".join(str(i) for i in self.issues))


@dataclass(frozen=True)
class Issue:
    """One structural violation, locatable by vertex or edge.

    code: machine-readable tag, e.g. "shape_mismatch", "bias_mismatch",
          "stride_mismatch", "window_mismatch", "incompatible_back_end",
          "data_type_mismatch", "unresolved_reference".
    where: ("vertex", id) or ("edge", (tail, head)) or ("field", path).
    """

    code: str
    where: tuple
    message: str

    def __str__(self) -> str:
        kind, loc = self.where
        if kind == "edge":
            loc = f"{loc[0]}->{loc[1]}"
        return f"{self.code} at {kind} {loc}: {self.message}"

    def to_json(self) -> dict:
        kind, loc = self.where
        if kind == "edge":
            loc = list(loc)
        return {"code": self.code, "kind": kind, "at": loc, "message": self.message}
