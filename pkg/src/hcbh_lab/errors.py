"""Exception types shared across the package."""


class ConfigError(ValueError):
    """A device or run configuration file is malformed or inconsistent."""


class EvolutionError(RuntimeError):
    """Time integration violated its norm-drift contract (likely unstable step)."""


class ConvergenceError(RuntimeError):
    """An iterative solver failed to converge within its iteration budget."""
