"""Exception hierarchy shared by the analysis modules and the CLI."""


class SramFlipError(Exception):
    """Base class for every error raised by this package."""


class DomainError(SramFlipError, ValueError):
    """An input lies outside the domain of a model or formula."""


class ModelError(SramFlipError):
    """Device parameters produce a nonphysical circuit (e.g. no VTC root)."""


class PreconditionError(SramFlipError):
    """An operation was called on an object it is not defined for."""


class NumericalError(SramFlipError):
    """A numerical procedure failed to converge or blew up.

    Attributes:
        diagnostics: free-form details for the failure report.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class CensoringError(SramFlipError):
    """Too many Monte-Carlo experiments reached the horizon without a flip."""

    def __init__(self, censored_fraction, limit):
        self.censored_fraction = censored_fraction
        self.limit = limit
        super().__init__(
            f"horizon too short: {censored_fraction:.1%} of the experiments were "
            f"censored (limit {limit:.0%}); raise t_max"
        )


class ConfigError(SramFlipError):
    """Configuration file could not be parsed or validated."""
