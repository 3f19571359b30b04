"""
Exceptions raised by the interval tuner.

Every error is a ``ValueError`` so callers that only know about the standard
library still catch bad input the usual way.
"""


class IntervalTunerError(ValueError):
    """Base class for all interval tuner errors."""


class ConfigError(IntervalTunerError):
    """An ingestion, forest or technique setting is invalid."""


class MissingColumn(IntervalTunerError):
    """A column named in the ingestion config is absent from the CSV header."""


class NonNumeric(IntervalTunerError):
    """A numeric cell could not be parsed as a finite real number."""


class EmptyDataset(IntervalTunerError):
    """The CSV has a header but no data rows."""


class MissingValue(IntervalTunerError):
    """A cell is empty."""


class DegenerateSplit(IntervalTunerError):
    """A split primitive would produce an empty train or test side."""


class EmptyOutOfBag(IntervalTunerError):
    """Every bootstrap draw in the retry budget covered all indices."""


class BadFoldCount(IntervalTunerError):
    """The number of folds is outside [2, m]."""


class DimensionMismatch(IntervalTunerError):
    """A feature vector does not match the forest's feature count."""


class ImpureLeaf(IntervalTunerError):
    """A reached leaf holds differing responses and the policy is 'error'."""


class EmptyValues(IntervalTunerError):
    """A quantile was requested from an empty sample."""


class DomainError(IntervalTunerError):
    """A numeric argument lies outside the function's domain."""


class ShapeError(IntervalTunerError):
    """A blocks x treatments matrix has the wrong shape."""


class TooFewRows(IntervalTunerError):
    """
    A partition is too small for a technique.

    Parameters
    ----------
    message : str
        Human readable description.
    layer : str, optional
        Which partition failed: 'outer', 'meta' or 'technique'.
    """

    def __init__(self, message, layer='technique'):
        super().__init__(f"[{layer}] {message}")
        self.layer = layer
        self.detail = message


class IsolationViolation(IntervalTunerError):
    """An index outside a layer's visible range was used."""
