"""Exception types shared across the package."""


class WarnlabError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(WarnlabError):
    """Raised when a configuration file or model description is invalid.

    The message names the offending field using a dotted path, e.g.
    ``model.noise_matrix``.
    """


class NumericalError(WarnlabError):
    """Raised when a computation cannot proceed (unstable spectrum at the
    requested parameter, singular linear system, degenerate eigenvalue pair,
    insufficient grid resolution, ...)."""
