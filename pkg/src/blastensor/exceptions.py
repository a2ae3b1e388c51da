"""Exception hierarchy shared by all modules."""


class ContractionError(ValueError):
    """Base class for every error raised by blastensor."""


class TensorError(ContractionError):
    """Bad extents, variance, coordinates, or tensor file contents."""


class ExpressionSyntaxError(ContractionError):
    """A contraction expression does not match the grammar.

    ``position`` is the 0-based character offset where parsing failed.
    """

    def __init__(self, message, position, text=""):
        self.position = position
        self.text = text
        detail = f"{message} at position {position}"
        if text:
            detail += f"\n  {text}\n  {' ' * position}^"
        super().__init__(detail)


class EinsteinError(ContractionError):
    """The expression parses but breaks the index pairing rules."""


class ValidationError(ContractionError):
    """Operands do not fit the parsed expression."""


class SlicingError(ContractionError):
    """A slicing pair is malformed or slices a contracted label on one side only."""


class KernelUnreachableError(ContractionError):
    """No slicing of the contraction maps onto the requested kernel."""

    def __init__(self, kernel, requirement, reason, state="violated"):
        self.kernel = kernel
        self.requirement = requirement
        self.reason = reason
        super().__init__(f"kernel unreachable: {requirement} {state} ({kernel}: {reason})")


class WorkCapExceeded(ContractionError):
    """Requested computation exceeds the configured work or memory cap."""


class SingularMetricError(ContractionError):
    """Metric is asymmetric, singular, or badly conditioned."""


class ExecutionError(ContractionError):
    """A kernel call failed while executing a plan."""
