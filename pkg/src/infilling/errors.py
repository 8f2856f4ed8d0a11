"""Exception types shared across the toolkit."""


class InfillingError(Exception):
    """Base class for all toolkit errors."""


class EmptyDocument(InfillingError):
    pass


class MalformedRecord(InfillingError):
    def __init__(self, index, reason):
        super().__init__(f"record {index}: {reason}")
        self.index = index
        self.reason = reason


class CorpusTooSmall(InfillingError):
    pass


class UnknownSpecialInText(InfillingError):
    pass


class MisalignedSpan(InfillingError):
    pass


class OverlappingSpans(InfillingError):
    pass


class EmptyCorpus(InfillingError):
    pass


class SequenceTooLong(InfillingError):
    def __init__(self, length, limit):
        super().__init__(f"sequence of {length} tokens exceeds limit {limit}")
        self.length = length
        self.limit = limit


class FingerprintMismatch(InfillingError):
    pass


class ShapeMismatch(InfillingError):
    pass


class NonFiniteLoss(InfillingError):
    pass


class ContextOverflow(InfillingError):
    pass


class FillCountMismatch(InfillingError):
    pass


class EmptyTargets(InfillingError):
    pass


class MarkerSyntaxError(InfillingError):
    pass


class ConfigInvalid(InfillingError):
    pass
