"""Exception types shared across the package.

The command-line interface maps these onto distinct exit codes, so library
code should raise the most specific one that applies.
"""

from __future__ import annotations


class ConfigError(ValueError):
    """A configuration file or parameter block is malformed or inconsistent."""


class DataFormatError(ValueError):
    """A data file (dataset CSV, samples table) is malformed or inconsistent."""


class FitError(RuntimeError):
    """A model fit failed to converge or produced an unusable result."""


class AssumptionError(ValueError):
    """A channel violates the structural assumptions of an analysis.

    Carries the list of offending couplings as ``violations``:
    ``(description, magnitude)`` pairs.
    """

    def __init__(self, message: str, violations=()):
        super().__init__(message)
        self.violations = tuple(violations)
