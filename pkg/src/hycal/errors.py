"""Exception hierarchy shared by all hycal modules."""


class HycalError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(HycalError):
    """Base for errors caused by invalid inputs or configuration."""


class DimensionError(ValidationError):
    """Vector or matrix dimensions do not match."""


class ZeroVectorError(ValidationError):
    """A zero-norm vector was passed where a direction is required."""


class ConfigError(ValidationError):
    """A configuration value is out of its legal range or malformed."""


class ProtocolError(ValidationError):
    """An operation violates the incremental-learning protocol."""


class DataError(ValidationError):
    """A dataset cannot satisfy the requested sampling."""


class SingularCovarianceError(ValidationError):
    """The regularized covariance is not positive definite."""


class FileIOError(HycalError):
    """Base for binary file format errors (maps to CLI exit code 2)."""


class FormatError(FileIOError):
    """File contents do not follow the declared format."""


class TruncatedError(FileIOError):
    """File ended before the declared content was complete."""


class IntegrityError(FileIOError):
    """File is structurally valid but internally inconsistent."""
