"""Exception types shared across the package."""


class StructuralError(ValueError):
    """Array dimensions or field types of an MDP specification are inconsistent."""


class ValidationFailure(Exception):
    """One or more MDP invariants failed; carries the full validation report."""

    def __init__(self, report):
        self.report = report
        failed = ", ".join(c.name for c in report.checks if not c.passed)
        super().__init__(f"invariant violations: {failed}")


class NonConvergence(RuntimeError):
    """Value iteration exceeded its contraction-derived iteration cap."""


class DimensionMismatch(ValueError):
    """Two tables that must share a shape do not."""


class ConfigError(ValueError):
    """An environment or experiment configuration violates its invariants."""


class DomainError(ValueError):
    """A numeric argument is outside its required domain."""


class EmptyInput(ValueError):
    """An operation requiring a nonempty collection received an empty one."""


class InsufficientData(ValueError):
    """Not enough data points to perform a fit."""
