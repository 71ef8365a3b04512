"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration: unknown ids, out-of-range parameters, bad config files."""


class FitError(RuntimeError):
    """A model or validation fit could not be carried out."""


class ExperimentError(RuntimeError):
    """An experiment produced no usable replications."""
