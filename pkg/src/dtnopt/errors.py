"""Exception hierarchy shared across the toolkit."""


class DTNError(Exception):
    """Base class for all toolkit errors."""


class TraceError(DTNError, ValueError):
    """Problem with a mobility trace; ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class MalformedHeader(TraceError):
    pass


class MalformedSample(TraceError):
    pass


class TimeRegression(TraceError):
    pass


class EmptyTrace(TraceError):
    pass


class EmptyAfterFilter(TraceError):
    pass


class DegenerateGeoBounds(TraceError):
    pass


class InvalidRange(DTNError, ValueError):
    pass


class ConfigError(DTNError, ValueError):
    pass


class UnknownNodeInTrace(DTNError, KeyError):
    pass


class MessageLargerThanBuffer(DTNError):
    pass


class SelfMeeting(DTNError, ValueError):
    pass


class NoMessagesSent(DTNError, ZeroDivisionError):
    pass


class NoDeliveries(DTNError, ValueError):
    pass


class InconsistentCounts(DTNError, ValueError):
    pass


class EmptyInput(DTNError, ValueError):
    pass


class TooFewRows(DTNError, ValueError):
    pass


class EmptyTrainingSet(DTNError, ValueError):
    pass


class UnfittedModel(DTNError, RuntimeError):
    pass


class InvalidSubsample(DTNError, ValueError):
    pass


class LengthMismatch(DTNError, ValueError):
    pass


class ZeroVarianceTarget(DTNError, ValueError):
    pass


class InvalidFraction(DTNError, ValueError):
    pass


class KTooLarge(DTNError, ValueError):
    pass


class DatasetError(DTNError, ValueError):
    pass


class OutOfBounds(DTNError, ValueError):
    pass


class DegenerateBox(DTNError, ValueError):
    pass
