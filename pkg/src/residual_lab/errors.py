class ResidualLabError(Exception):
    pass


class MapError(ResidualLabError):
    """Malformed map data or a point that no piece claims."""


class ConfigError(ResidualLabError):
    """Unreadable or invalid configuration / map file."""


class BitBudgetError(ResidualLabError):
    """Exact rational orbit outgrew its denominator budget."""


class ResourceError(ResidualLabError):
    """A computation would exceed a memory or iteration guard."""


class EstimationError(ResidualLabError):
    """An estimator's preconditions failed (window too short, no signal, ...)."""
