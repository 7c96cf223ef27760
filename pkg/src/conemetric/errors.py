"""Exception hierarchy shared by all conemetric modules."""


class ConeMetricError(Exception):
    """Base class for every error raised by the package."""


class DomainError(ConeMetricError, ValueError):
    """An argument lies outside the domain of an operation."""


class IndeterminateError(ConeMetricError):
    """The inputs do not determine the answer (e.g. order -1 without an area hint)."""


class ValidationError(ConeMetricError, ValueError):
    """A declarative input contradicts itself."""


class ImpossibleCoverError(ConeMetricError):
    """Branch data cannot come from a cover between closed orientable surfaces."""


class HypothesisError(ConeMetricError):
    """A theorem hypothesis required by the requested operation fails."""


class ConfigurationError(ConeMetricError):
    """Grid, cutoff or point placement violates a solver precondition."""


class NoSolutionError(HypothesisError):
    """The Poisson compatibility condition fails, so no periodic solution exists."""


class InvalidMeshError(ConeMetricError, ValueError):
    """A polyhedral surface is not a valid closed Euclidean triangle complex."""


class NumericalFailure(ConeMetricError):
    """An iterative or adaptive method failed to reach its tolerance."""


class QuadratureError(NumericalFailure):
    """Adaptive quadrature hit its subdivision cap before the tolerance."""


class ShapeError(ConeMetricError, ValueError):
    """Fields live on different grids."""
