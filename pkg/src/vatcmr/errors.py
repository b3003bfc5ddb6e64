"""Exception types shared across the package."""


class VatcmrError(Exception):
    """Base class for all package-specific errors."""


class InvalidArgumentError(VatcmrError, ValueError):
    """An argument violates an operation's preconditions."""


class ConfigurationError(VatcmrError, ValueError):
    """A configuration value is inconsistent or unknown."""


class DataFormatError(VatcmrError):
    """A file (tensor container, dataset file, metrics log) is missing or corrupt."""


class CompatibilityError(VatcmrError):
    """Stored data disagrees with its manifest or was written by an unsupported version."""


class UndefinedAveragePrecisionError(VatcmrError, ValueError):
    """Average precision is undefined: the index contains no relevant item."""


class TrainingDivergedError(VatcmrError, RuntimeError):
    """Training produced a non-finite loss or parameter."""


class SingleClassBatchError(VatcmrError):
    """A triplet batch contains only one class, so no negative exists."""
