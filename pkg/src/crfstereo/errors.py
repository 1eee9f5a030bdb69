"""Exception types shared across the package.

The CLI maps these onto exit codes: bad command-line usage exits 1,
errors raised while reading or generating data exit 2.
"""


class StereoCrfError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(StereoCrfError, ValueError):
    """An argument value is outside its documented domain."""


class ShapeError(StereoCrfError, ValueError):
    """Array arguments have inconsistent or unsupported shapes."""


class UnsupportedDimensionError(ParameterError):
    """Feature dimensionality outside the supported range."""


class NumericError(StereoCrfError, ArithmeticError):
    """A non-finite value appeared where finite math was required."""


class TapeError(StereoCrfError, RuntimeError):
    """A gradient tape was reused, empty, or does not match its inputs."""


class EmptyMaskError(StereoCrfError, ValueError):
    """A loss was requested over a mask with no valid pixels."""


class FormatError(StereoCrfError, ValueError):
    """A file on disk does not conform to its expected format."""


class GenerationError(StereoCrfError, ValueError):
    """Synthetic data generation was asked for infeasible geometry."""
