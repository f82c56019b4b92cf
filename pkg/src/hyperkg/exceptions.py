"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes, so new error classes should
subclass one of the existing categories rather than raising bare built-ins.
"""


class HyperKGError(Exception):
    """Base class for all package errors."""


class ConfigError(HyperKGError, ValueError):
    """Invalid or inconsistent run configuration (CLI exit code 2)."""


class DataError(HyperKGError, ValueError):
    """Malformed input files, unknown symbols, bad triple arrays (exit code 3)."""


class NumericError(HyperKGError, ArithmeticError):
    """Non-finite values where finite ones are required (exit code 4)."""


class CheckpointMismatch(HyperKGError, ValueError):
    """Checkpoint does not match the vocabulary it is evaluated against (exit code 5)."""


class DimensionMismatch(HyperKGError, ValueError):
    """Operands disagree on vector dimension."""


class DomainError(HyperKGError, ValueError):
    """Input outside the mathematical domain of an operation (e.g. norm >= 1)."""


class CoincidentPoints(DomainError):
    """Distance gradient requested at (numerically) coincident points."""


class GenerationError(HyperKGError, RuntimeError):
    """Synthetic dataset generation cannot satisfy the requested sizes."""
