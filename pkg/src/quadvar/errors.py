"""Exception types shared across the package."""


class ConfigError(ValueError):
    """A configuration (schema, name resolution, parameter) problem."""


class UnsupportedModelError(RuntimeError):
    """The requested operation needs model metadata the model does not carry."""


class ResourceLimitError(RuntimeError):
    """A size/level request exceeds the documented desk-scale limits."""
