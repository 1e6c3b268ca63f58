"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration or distribution parameters (CLI exit code 1)."""


class SimulationError(RuntimeError):
    """A run could not be completed (CLI exit code 2)."""


class NoRootInBracket(RuntimeError):
    """The estimated G stays negative across the whole lambda bracket."""
