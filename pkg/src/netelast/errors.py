"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Raised when user-supplied parameters are malformed or inconsistent."""


class DomainError(ValueError):
    """Raised when geometry (boxes, grids, probe cubes) is invalid."""


class SolverError(RuntimeError):
    """Raised when an iterative solve fails to reach its tolerance."""


class ProbeError(ValueError):
    """Raised when a measurement probe does not fit the sampled system."""
