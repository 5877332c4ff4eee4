"""Exception hierarchy.

Input problems derive from :class:`PanelValueError` (a ``ValueError``);
numerical breakdowns derive from :class:`PanelNumericError`. The CLI maps the
first family to exit code 2 and the second to exit code 3.
"""

from __future__ import annotations


class PanelValueError(ValueError):
    """Invalid input, schema or parameter."""


class PanelNumericError(ArithmeticError):
    """A numerical step could not be carried out."""


# -- data ingestion ---------------------------------------------------------


class SchemaMismatch(PanelValueError):
    pass


class MissingCell(PanelValueError):
    pass


class NonFiniteValue(PanelValueError):
    pass


class DuplicateConflict(PanelValueError):
    pass


class DimensionMismatch(PanelValueError):
    pass


# -- estimator preconditions ------------------------------------------------


class TSmallerThanG(PanelValueError):
    pass


class TooFewPeriods(PanelValueError):
    pass


class EmptyGroup(PanelValueError):
    pass


class DegenerateSplit(PanelValueError):
    pass


# -- numerics ---------------------------------------------------------------


class NonSymmetric(PanelNumericError):
    pass


class DegenerateSketch(PanelNumericError):
    pass


class SingularSigma(PanelNumericError):
    """The reconstructed quadratic form is not invertible."""

    def __init__(self, message: str, eigenvalues=None, rcond: float | None = None):
        super().__init__(message)
        self.eigenvalues = eigenvalues
        self.rcond = rcond


class SingularGram(PanelNumericError):
    pass


class NotConditioned(PanelNumericError):
    pass


class MaxIterExceeded(PanelNumericError):
    """Coordinate descent hit its sweep budget; ``solution`` holds the best iterate."""

    def __init__(self, message: str, solution=None):
        super().__init__(message)
        self.solution = solution
