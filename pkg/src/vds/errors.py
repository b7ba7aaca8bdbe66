"""Error types shared across the toolkit.

Exceptions are grouped by how the command line maps them to exit codes:
usage errors exit 1, data/validation errors exit 2, numerical failures exit 3.
"""


class VdsError(Exception):
    """Base class for all toolkit errors."""


class UsageError(VdsError):
    """Bad flags or arguments (exit code 1)."""


class DataError(VdsError):
    """Invalid or unreadable input data (exit code 2)."""


class NumericalError(VdsError):
    """Numerical failure such as divergence or SVD breakdown (exit code 3)."""


# file format problems

class BadMagic(DataError):
    pass


class UnsupportedVersion(DataError):
    pass


class Truncated(DataError):
    pass


class ShapeMismatch(DataError):
    pass


class NonFinite(DataError):
    pass


class BundleInvalid(DataError):
    """A bundle failed semantic validation; carries the violation codes."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("bundle failed validation: " + ", ".join(self.violations))


# computation problems

class ZeroVector(DataError):
    """A cosine similarity was requested against a zero-norm vector."""


class InvalidMode(DataError):
    """A logits mode was used where it is not defined (e.g. sim-gt at prediction)."""


class DivergedAtStep(NumericalError):
    """Training produced a non-finite loss or parameter."""

    def __init__(self, step, detail=""):
        self.step = step
        super().__init__(f"training diverged at step {step}" + (f": {detail}" if detail else ""))
