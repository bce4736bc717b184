"""Exception types shared across the solver."""


class ParseError(ValueError):
    """Instance document is not well-formed JSON or misses required keys."""


class DimensionError(ValueError):
    """Array shapes disagree with the declared problem dimensions."""


class TooLarge(ValueError):
    """An enumeration guard was exceeded."""


class InfeasibleConstraint(ValueError):
    """A linear constraint cannot hold anywhere on the binary box."""


class NumericalError(ArithmeticError):
    """The simplex method failed to make progress within its safeguards."""


class ConfigError(ValueError):
    """Invalid solver or sampler configuration."""
