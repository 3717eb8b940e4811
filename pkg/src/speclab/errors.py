"""Exception hierarchy shared by every speclab module."""


class SpecLabError(Exception):
    """Base class for all speclab errors."""


class InvalidParameter(SpecLabError, ValueError):
    """A constructor or operation received parameters outside its domain."""


class GeometryError(SpecLabError):
    """A boundary curve is not a valid simple polygon (or became invalid).

    Attributes
    ----------
    vertex : int or None
        Index (in the concatenated boundary numbering) of an offending vertex.
    """

    def __init__(self, message, vertex=None):
        super().__init__(message)
        self.vertex = vertex


class MeshTooCoarse(SpecLabError):
    """The mesh has no interior degrees of freedom."""


class QualityWarning(UserWarning):
    """Mesh quality target could not be met near sharp input corners."""

    def __init__(self, message, worst_angle=None):
        super().__init__(message)
        self.worst_angle = worst_angle


class NumericError(SpecLabError, ArithmeticError):
    """Factorization breakdown, bracket failure or similar numerical failure.

    Attributes
    ----------
    pivot : tuple or None
        ``(step, value)`` of the failing pivot, when the failure is a
        factorization.
    """

    def __init__(self, message, pivot=None):
        super().__init__(message)
        self.pivot = pivot


class InvalidInput(SpecLabError, ValueError):
    """Input data violate an operation's precondition (zero vector, bad label...)."""


class ClusteredEigenvalue(SpecLabError):
    """A simple-eigenvalue formula was applied to a repeated eigenvalue."""


class CrossingError(SpecLabError):
    """An eigenvalue branch crossed another inside a finite-difference stencil."""


class InvalidConstraints(SpecLabError, ValueError):
    """Requested perturbation constraints cannot be satisfied."""
