"""Exception hierarchy shared across the package.

Validation problems (bad shapes, malformed streams, inconsistent labels)
raise ``ValidationError`` or one of its subclasses. Numeric degeneracy
(descriptors or optimizer rows collapsing to zero under normalization)
raises the dedicated degeneracy errors so callers can distinguish "your
input was malformed" from "the computation broke down".
"""


class ValidationError(ValueError):
    """Input violates a documented precondition or invariant."""


class FormatError(ValidationError):
    """A byte stream does not start with the expected magic/version."""


class TruncationError(FormatError):
    """A byte stream ended before the declared payload was complete."""

    def __init__(self, expected_bytes: int, actual_bytes: int, what: str = "payload"):
        self.expected_bytes = expected_bytes
        self.actual_bytes = actual_bytes
        super().__init__(
            f"truncated {what}: expected {expected_bytes} bytes, got {actual_bytes}"
        )


class WriteError(OSError):
    """A sink failed mid-write; records how many bytes made it out."""

    def __init__(self, bytes_written: int, cause: str):
        self.bytes_written = bytes_written
        super().__init__(f"write failed after {bytes_written} bytes: {cause}")


class DegenerateDescriptorError(ValueError):
    """A fused descriptor became the zero vector and cannot be normalized."""


class DegenerateRowError(ValueError):
    """An optimizer row collapsed below the projectable norm threshold."""

    def __init__(self, row_index: int, norm: float):
        self.row_index = row_index
        self.norm = norm
        super().__init__(
            f"query row {row_index} has norm {norm:.3e}, too small to project"
        )


class EvaluationError(ValueError):
    """No query had any relevant target; nothing to evaluate."""
