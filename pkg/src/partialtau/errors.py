"""Exception hierarchy.

Three roots map onto the CLI exit codes: ``ConfigError`` (2),
``DataError`` (3) and ``NumericalError`` (4).
"""

from __future__ import annotations


class PartialTauError(Exception):
    """Base class for every error raised by this package."""

    exit_code = 1


class ConfigError(PartialTauError, ValueError):
    exit_code = 2


class DataError(PartialTauError, ValueError):
    exit_code = 3


class NumericalError(PartialTauError, ArithmeticError):
    exit_code = 4


# configuration / argument errors
class InvalidConfig(ConfigError):
    pass


class InvalidAlpha(ConfigError):
    pass


class TooFewReplicates(ConfigError):
    pass


class DomainError(ConfigError):
    pass


# data errors
class MissingColumn(DataError):
    pass


class NonNumericCell(DataError):
    pass


class EmptyAfterFiltering(DataError):
    pass


class EmptyData(DataError):
    pass


class MissingValue(DataError):
    pass


class EmptyCategory(DataError):
    """An ordinal or binary outcome has a category with no observations."""


class OutOfSupport(DataError):
    pass


class LengthMismatch(DataError):
    pass


class ShapeMismatch(DataError):
    pass


class TooFewObservations(DataError):
    pass


# numerical failures
class ModelFitError(NumericalError):
    """Any failure of a single model fit; bootstrap refits retry on these."""


class NonConvergence(ModelFitError):
    pass


class SeparationDetected(ModelFitError):
    pass


class RankDeficientDesign(ModelFitError):
    pass


class NonFiniteLikelihood(NumericalError):
    pass


class TooManyFailures(NumericalError):
    pass


class UndefinedModeration(NumericalError):
    pass


class DegenerateWindow(NumericalError):
    pass
