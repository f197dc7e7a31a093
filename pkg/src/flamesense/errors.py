"""Exception hierarchy shared across the package.

Every error carries an ``exit_code`` so the CLI can map failures onto its
stable exit-code contract: 2 for argument/config errors, 3 for data errors,
4 for numerical failures.
"""


class FlameSenseError(Exception):
    """Base class for all package errors."""

    exit_code = 3


class ConfigError(FlameSenseError):
    """Invalid configuration value or unknown configuration key."""

    exit_code = 2


class ConfigInvalid(ConfigError):
    """A configuration value violates its constraints."""


class IllegalChannel(ConfigError):
    """A channel is not allowed for the requested operation (e.g. gray in Naive Bayes)."""


class WeightMismatch(ConfigError):
    """Mixture weights do not match the requested channel set."""


class DataError(FlameSenseError):
    """Malformed, missing, or out-of-contract input data."""

    exit_code = 3


class DecodeError(DataError):
    """Image bytes could not be decoded."""


class UnsupportedFormat(DataError):
    """Image container format is not recognized."""


class GridMismatch(DataError):
    """Grid does not divide the plane dimensions exactly."""


class DimensionMismatch(DataError):
    """Array or plane dimensions are inconsistent."""


class EmptyReference(DataError):
    """Too few reference frames to fit the ideal-combustion model."""


class LambdaOutOfBand(DataError):
    """A reference excess-air value lies outside the ideal band."""


class VersionMismatch(DataError):
    """Persisted file has an unsupported format version."""


class CorruptModel(DataError):
    """Persisted file failed its checksum or structure check."""


class DataFormatError(DataError):
    """A text data file (log, index, manifest, table) is malformed."""


class OutOfRange(DataError):
    """Query timestamp lies outside the interpolation span."""


class TooFewPoints(DataError):
    """Not enough samples for the requested interpolation."""


class TooSmall(DataError):
    """Plane is too small for the requested neighborhood operation."""


class InsufficientData(DataError):
    """Training data has too little variation for the requested fit."""


class LengthMismatch(DataError):
    """Paired sequences have different lengths."""


class EmptyInput(DataError):
    """An operation received an empty sequence."""


class NumericalError(FlameSenseError):
    """Numerical failure during evaluation or training."""

    exit_code = 4


class DegenerateModel(NumericalError):
    """A channel's standard deviation is too small for density evaluation."""


class SingularCovariance(NumericalError):
    """Covariance matrix is not invertible for multivariate density evaluation."""


class DampingExhausted(NumericalError):
    """Levenberg-Marquardt damping exceeded its maximum without an acceptable step."""


class GradientVanished(NumericalError):
    """Cost gradient is numerically zero; no descent direction exists."""


class DegenerateVariance(NumericalError):
    """Correlation is undefined because a sequence is constant."""
