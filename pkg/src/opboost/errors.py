"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: configuration problems exit 2, data
problems exit 3, protocol/transport problems exit 4.
"""


class OpBoostError(Exception):
    """Base class for all package errors."""


class ConfigError(OpBoostError, ValueError):
    """Invalid parameters or mechanism configuration."""


class DataError(OpBoostError, ValueError):
    """Input data violates a declared contract (bounds, lengths, emptiness)."""


class DomainRangeError(DataError):
    """A value falls outside its declared domain."""


class UndefinedMetricError(DataError):
    """A metric is undefined for the given input (e.g. constant sequences)."""


class SizeError(DataError):
    """Input too large for an exact computation."""


class TrainingError(DataError):
    """Dataset unusable for training."""


class StateError(OpBoostError, RuntimeError):
    """Object used in the wrong lifecycle state."""


class ProtocolError(OpBoostError):
    """Malformed, unexpected or inconsistent protocol message."""


class TransportError(ProtocolError):
    """The underlying byte stream failed."""
