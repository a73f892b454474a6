"""Exception hierarchy."""


class RiemannDepError(ValueError):
    """Base class for every error raised by this package."""


class BaseMismatchError(RiemannDepError):
    """A tangent vector was used at a point other than its base point."""


class ManifoldMismatchError(RiemannDepError):
    """Points from different manifolds were combined."""


class InvalidPointError(RiemannDepError):
    """Coordinates do not describe a point of the manifold."""


class CutLocusError(RiemannDepError):
    """The logarithm map was requested at (or too close to) the cut locus.

    ``index`` is the position of the offending point when the call was
    vectorised over a sample, otherwise ``None``.
    """

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class DomainError(RiemannDepError):
    """A sample point lies outside the geodesic ball of the reference point."""

    def __init__(self, message, margin=None, index=None):
        super().__init__(message)
        self.margin = margin
        self.index = index


class EmptySampleError(RiemannDepError):
    pass


class SampleSizeError(RiemannDepError):
    pass


class NonUniqueMeanError(RiemannDepError):
    """The Fréchet mean has no unique minimiser (e.g. two antipodal points)."""


class UndefinedCorrelationError(RiemannDepError):
    """A marginal variance is zero, so the correlation is 0/0."""


class DataFormatError(RiemannDepError):
    """Malformed input file. ``row`` is the 1-based line number, if known."""

    def __init__(self, message, row=None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row


class ConfigError(RiemannDepError):
    pass
