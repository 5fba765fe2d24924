"""Exception hierarchy shared by the whole package.

Every error that can be attributed to a place in a source file carries a
``span`` (see :mod:`masgraph.lang.ast`); runtime faults raised while stepping a
model carry enough context to reconstruct a diagnostic trace.
"""

from __future__ import annotations


class MasgraphError(Exception):
    """Base class for all errors raised by this package."""


class ModelSyntaxError(MasgraphError):
    """Raised by the parsers on malformed input.

    Attributes:
        line / column: 1-based position of the offending token.
    """

    def __init__(self, message, line=None, column=None, filename=None):
        self.line = line
        self.column = column
        self.filename = filename
        where = ""
        if line is not None:
            where = f"{filename or '<input>'}:{line}:{column}: "
        super().__init__(f"{where}{message}")


class ModelTypeError(MasgraphError):
    """Static (elaboration-time) error: bad types, unknown names, duplicate
    declarations, non-constant initializers, and the like."""

    def __init__(self, message, span=None):
        self.span = span
        if span is not None:
            message = f"{span}: {message}"
        super().__init__(message)


class SideEffectInGuard(ModelTypeError):
    """A guard (directly or through a called function) would write a variable."""


class UnknownChannel(ModelTypeError):
    """A sync annotation names a channel that was never declared."""


class EvaluationFault(MasgraphError):
    """Runtime fault while evaluating an expression: division or modulo by
    zero, or an array index outside its declared index type."""

    def __init__(self, message, span=None, context=None):
        self.span = span
        self.context = context
        if span is not None:
            message = f"{span}: {message}"
        super().__init__(message)


class RangeFault(MasgraphError):
    """An update tried to store a value outside the target's declared range.

    This aborts verification: the checker attaches the diagnostic trace that
    reaches the faulting transition instead of silently dropping the edge.
    """

    def __init__(self, message, span=None, trace=None):
        self.span = span
        self.trace = trace
        if span is not None:
            message = f"{span}: {message}"
        super().__init__(message)


class InitialConditionViolated(MasgraphError):
    """The conjunction of the agents' initial conditions is false in the
    declared-default initial valuation."""


class BoundExceeded(MasgraphError):
    """unwrap() hit its state bound; carries the partial model (unusable for
    oracle checking, but inspectable)."""

    def __init__(self, message, partial=None):
        self.partial = partial
        super().__init__(message)


class TruncatedModel(MasgraphError):
    """oracle_check() was handed a truncated explicit model."""


class ScopeBoundaryFault(MasgraphError):
    """A scoped removal cannot be resolved: either a scope clause names an
    agent none of whose variables are removed, or control can leave the scope
    without the removed variable being definitely rewritten first."""


class IndexOutOfRange(MasgraphError):
    """A corpus parameter (voter, candidate, office id) is outside the range
    the configuration declares."""


class MemOut(MasgraphError):
    """The search exceeded its stored-state budget.  Usually not raised:
    checkers convert the condition into a MemOut verdict."""


class ModelPrintError(MasgraphError):
    """A closed network contains a construct the text emitter cannot express
    (non-contiguous binder domain, undecodable channel index, ...)."""
