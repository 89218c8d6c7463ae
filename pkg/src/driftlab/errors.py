"""Exception types shared across the package."""


class DriftlabError(Exception):
    """Base class for all driftlab errors."""


class ConfigurationError(DriftlabError, ValueError):
    """Invalid configuration value (bad family, negative regularity, ...)."""


class ShapeError(DriftlabError, ValueError):
    """Mismatched dimensions, coordinate systems or basis specs."""


class SimulationError(DriftlabError, RuntimeError):
    """Path simulation failed (non-finite state); message names the step."""


class NumericalError(DriftlabError, RuntimeError):
    """A linear solve or factorization broke down."""


class ResolutionError(NumericalError):
    """Spectral resolution too low for the requested solve."""


class StatisticsError(DriftlabError, ValueError):
    """Not enough samples/replications for the requested statistic."""


class ArtifactError(DriftlabError, ValueError):
    """Malformed or truncated binary artifact."""
