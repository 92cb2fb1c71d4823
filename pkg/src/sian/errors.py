"""Exception types shared across the package.

Every error raised deliberately by this library derives from :class:`SianError`,
so callers can catch one base class.  Subclasses also inherit from the closest
builtin (ValueError/RuntimeError/LookupError) to stay idiomatic.
"""

from __future__ import annotations

__all__ = [
    "SianError",
    "ShapeMismatchError",
    "FormatError",
    "StaleCacheError",
    "ArchitectureError",
    "FamilyLookupError",
    "MeasureError",
    "DomainError",
    "DegenerateDirectionError",
    "DetectionImpossibleError",
    "ResourceLimitError",
    "TrainingDivergedError",
    "DataError",
    "ConfigError",
    "UndefinedMetricError",
]


class SianError(Exception):
    """Base class for all library errors."""


class ShapeMismatchError(SianError, ValueError):
    """Operands have incompatible dimensions."""


class FormatError(SianError, ValueError):
    """Stored data violates its format contract (CSR pattern, model file, ...)."""


class StaleCacheError(SianError, RuntimeError):
    """Backward pass invoked without a matching cached forward pass."""


class ArchitectureError(SianError, ValueError):
    """Invalid interaction family or architecture (duplicates, bad indices)."""


class FamilyLookupError(SianError, KeyError):
    """Requested interaction set is not part of the model's family."""


class MeasureError(SianError, ValueError):
    """Probability weights do not form a valid product measure."""


class DomainError(SianError, ValueError):
    """Argument outside the operation's mathematical domain (empty batch, k < 1, ...)."""


class DegenerateDirectionError(SianError, ArithmeticError):
    """Target and baseline coincide in some requested coordinate (h_i = 0)."""


class DetectionImpossibleError(SianError, RuntimeError):
    """Every validation sample was degenerate for the requested subset."""


class ResourceLimitError(SianError, ValueError):
    """An exhaustive-enumeration operation was asked to exceed its size cap."""


class TrainingDivergedError(SianError, RuntimeError):
    """Loss became non-finite during training."""


class DataError(SianError, ValueError):
    """Malformed input data; message carries the offending line when known."""


class ConfigError(SianError, ValueError):
    """Invalid or incomplete experiment configuration."""


class UndefinedMetricError(SianError, ValueError):
    """Requested metric is undefined for the given targets (e.g. one class)."""
