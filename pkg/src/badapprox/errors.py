"""Exception hierarchy shared by every module."""


class BadApproxError(Exception):
    """Base class for all library errors."""


class PrecisionExhausted(BadApproxError):
    """A floor operation was ambiguous at the working precision.

    Raise ``precision_bits`` and retry.
    """


class DegenerateInput(BadApproxError):
    """Inputs for which the requested quantity is vacuous or undefined."""


class SearchBoundTooSmall(BadApproxError):
    """A lattice enumeration box could not be certified within the bound."""

    def __init__(self, needed, bound):
        self.needed = needed
        self.bound = bound
        super().__init__(
            f"certified enumeration needs coefficient bound {needed}, "
            f"but search_bound is {bound}; increase search_bound"
        )


class SimplexViolation(BadApproxError):
    """Rationals that should lie in one hyperplane do not."""


class NoLegalMove(BadApproxError):
    """A Bob strategy produced an illegal ball."""
