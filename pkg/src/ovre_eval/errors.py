"""Exception hierarchy shared by every module."""


class OvreError(Exception):
    """Base class for all errors raised by this package."""


class SchemaError(OvreError):
    """Input does not follow the expected record or sequence layout."""


class DelimiterCollision(SchemaError):
    pass


class MalformedSegment(SchemaError):
    def __init__(self, index: int, reason: str):
        super().__init__(f"segment {index}: {reason}")
        self.index = index
        self.reason = reason

    def __reduce__(self):
        return (type(self), (self.index, self.reason))


class InvalidTriplet(SchemaError):
    pass


class ProviderError(OvreError):
    """Any failure originating from an embedding provider."""


class ProviderUnavailable(ProviderError):
    def __init__(self, message: str, attempts: int = 0):
        super().__init__(message)
        self.attempts = attempts

    def __reduce__(self):
        return (type(self), (str(self), self.attempts))


class MissingEmbedding(ProviderError):
    pass


class DimensionMismatch(ProviderError):
    pass


class NonFiniteEntry(OvreError, ValueError):
    pass


class InstanceTooLarge(OvreError, ValueError):
    pass


class EmptyCorpus(OvreError, ValueError):
    pass


class VideoIdMismatch(SchemaError):
    pass


class EmptyGroundTruth(SchemaError):
    pass


class DuplicateVideoId(SchemaError):
    pass


class FileUnreadable(OvreError, OSError):
    pass
