class SemRobustError(Exception):
    """Base class for errors raised by this package."""


class ConstraintViolationError(SemRobustError):
    """A parameter or input violates its documented bounds."""


class UndefinedMetricError(SemRobustError):
    """Metric is undefined for the given input (e.g. single-class labels)."""


class DatasetError(SemRobustError):
    """Dataset layout problem that cannot be skipped."""


class TransportError(SemRobustError):
    """Remote detector connection failed after retries."""

    def __init__(self, message, retries=0):
        super().__init__(message)
        self.retries = retries


class ProtocolViolationError(SemRobustError):
    """Remote detector returned data violating the wire contract."""
