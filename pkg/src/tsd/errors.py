"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ``NumericalError`` exits 3, everything
else derived from ``TSDError`` exits 2.
"""


class TSDError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(TSDError, ValueError):
    """Tensor extents do not line up for an operation."""


class ParameterError(TSDError, ValueError):
    """An operation hyperparameter is outside its admissible range."""


class UsageError(TSDError, RuntimeError):
    """An API was called in a state where it cannot work."""


class DepthError(TSDError, ValueError):
    """The sequence is too short for the requested number of blocks."""


class ConsistencyError(TSDError, RuntimeError):
    """Internal bookkeeping disagrees with itself."""


class ConfigurationError(TSDError, ValueError):
    """A config, split, or window request cannot be satisfied."""


class SchemaError(TSDError, ValueError):
    """Input file layout does not match the expected schema."""


class ParseError(TSDError, ValueError):
    """A cell in an input file could not be parsed."""


class CheckpointError(TSDError, ValueError):
    """A checkpoint file is corrupted or does not match its config."""


class NumericalError(TSDError, ArithmeticError):
    """Training produced a non-finite value."""
