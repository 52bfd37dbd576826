"""Exception types shared across the package."""


class ConfigError(Exception):
    """Invalid or inconsistent configuration (bad file, bad parameter set)."""


class CheckFailure(Exception):
    """An experiment was run with --check and a directional assertion failed."""
