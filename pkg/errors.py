"""
Exception hierarchy for Girder Kit.
Every error knows the CLI exit code it maps to and, when it comes from a file,
which file and field were at fault.
"""
from typing import Any, Dict, Optional


class GirderKitError(Exception):
    """Base class for all errors raised by Girder Kit."""

    exit_code = 1

    def __init__(self, message: str, file: Optional[str] = None, field: Optional[str] = None):
        super().__init__(message)
        self.message = message
        self.file = file
        self.field = field

    def located(self, file: Optional[str] = None, field: Optional[str] = None) -> "GirderKitError":
        """Attach file/field context (keeps whatever is already set)."""
        self.file = self.file or file
        self.field = self.field or field
        return self

    def __str__(self) -> str:
        where = []
        if self.file:
            where.append(f"file={self.file}")
        if self.field:
            where.append(f"field={self.field}")
        if where:
            return f"{self.message} ({', '.join(where)})"
        return self.message


# Input / contract errors (exit 2)

class ContractError(GirderKitError, ValueError):
    """Inputs violate a shape, format or consistency contract."""

    exit_code = 2


class DomainError(GirderKitError, ValueError):
    """An argument lies outside the domain of an operation."""

    exit_code = 2


class SceneConfigurationError(DomainError):
    """A synthetic scene cannot be rendered (e.g. a point behind a camera)."""

    def __init__(self, message: str, frame_index: Optional[int] = None, **kwargs):
        super().__init__(message, **kwargs)
        self.frame_index = frame_index


# Numeric / degeneracy errors (exit 3)

class NumericError(GirderKitError, ArithmeticError):
    """An iterative computation failed to converge."""

    exit_code = 3

    def __init__(self, message: str, residual: Optional[float] = None, **kwargs):
        super().__init__(message, **kwargs)
        self.residual = residual


class DegenerateGeometryError(NumericError):
    """Geometry is degenerate: coincident centers, parallel rays, point at infinity."""

    def __init__(self, message: str, parameters: Optional[Dict[str, Any]] = None, **kwargs):
        super().__init__(message, **kwargs)
        self.parameters = parameters or {}


class DegenerateRigError(DegenerateGeometryError):
    """The stereo rig has no usable baseline."""


class PointAtInfinityError(DegenerateGeometryError):
    """Homogeneous triangulation produced a vanishing fourth coordinate."""


class NoMotionError(NumericError):
    """No structural motion onset was found in an acceleration record."""


class StagnationError(NumericError):
    """The refinement could not decrease its objective at any damping.

    The best-so-far result travels with the exception so callers can still use it.
    """

    def __init__(self, message: str, result: Any = None, diagnostics: Optional[Dict[str, Any]] = None, **kwargs):
        super().__init__(message, **kwargs)
        self.result = result
        self.diagnostics = diagnostics or {}
