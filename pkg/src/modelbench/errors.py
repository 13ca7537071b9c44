"""Exception hierarchy shared across the kernel."""

from __future__ import annotations


class KernelError(Exception):
    """Base class for every error the kernel raises deliberately."""


class NotFoundError(KernelError):
    pass


class AmbiguousNameError(KernelError):
    pass


class NameClashError(KernelError):
    pass


class NotInstantiableError(KernelError):
    pass


class TypeMismatchError(KernelError):
    pass


class BoundsError(KernelError):
    pass


class EditRejectedError(KernelError):
    """A mutation or co-evolution edit that would break a structural invariant."""


class ConformanceError(KernelError):
    pass


class StaleRevisionError(KernelError):
    pass


class FixtureMismatchError(KernelError):
    pass


class QueryError(KernelError):
    """Expression-language error carrying position and navigation path.

    Rendered as ``line:col message path`` so console users can locate the
    offending segment.
    """

    def __init__(self, message, line=None, col=None, path=None):
        super().__init__(message)
        self.message = message
        self.line = line
        self.col = col
        self.path = path

    def __str__(self):
        pos = f"{self.line}:{self.col} " if self.line is not None else ""
        tail = f" {self.path}" if self.path else ""
        return f"{pos}{self.message}{tail}"


class ExprSyntaxError(QueryError):
    pass


class NavigationError(QueryError):
    pass


class NullAccessError(QueryError):
    pass


class EvalTypeError(QueryError):
    pass


class PredicateTypeError(QueryError):
    pass


class CascadeDivergenceError(KernelError):
    """Raised when an update cascade exceeds the configured depth cap."""

    def __init__(self, message, elements=()):
        super().__init__(message)
        self.elements = list(elements)
