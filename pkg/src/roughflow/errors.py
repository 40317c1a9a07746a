"""Exception hierarchy shared across the package."""


class RoughflowError(Exception):
    """Base class for all roughflow errors."""


class ParameterError(RoughflowError, ValueError):
    """A parameter lies outside its valid domain."""


class GeometryError(RoughflowError):
    """The rasterized geometry cannot support a simulation."""


class InstabilityError(RoughflowError):
    """A non-finite value appeared during time stepping."""

    def __init__(self, timestep, node, max_abs_f):
        self.timestep = timestep
        self.node = node
        self.max_abs_f = max_abs_f
        super().__init__(
            f"non-finite population at t={timestep}, node={node}, "
            f"max |f| = {max_abs_f:.6g}"
        )


class UnsupportedActivationError(RoughflowError):
    """The requested derivative order is not defined for this activation."""


class SingularDensityError(RoughflowError):
    """Predicted density fell below the positivity floor."""


class UndefinedMetricError(RoughflowError):
    """The metric is undefined for the given reference (e.g. zero norm)."""


class FormatError(RoughflowError):
    """A binary or text artifact does not conform to its format."""

    def __init__(self, message, offset=None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)


class ConfigError(RoughflowError):
    """A run configuration is malformed or violates an invariant."""
