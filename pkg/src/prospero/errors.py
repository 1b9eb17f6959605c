"""Exception hierarchy shared across the engine."""


class ProsperoError(Exception):
    """Base class for all engine errors."""


class NonCanonicalResidue(ProsperoError):
    def __init__(self, position: int, char: str):
        self.position = position  # 1-based
        self.char = char
        super().__init__(f"non-canonical residue {char!r} at position {position}")


class EmptySequence(ProsperoError):
    pass


class LengthMismatch(ProsperoError):
    pass


class PositionOutOfRange(ProsperoError):
    pass


class PositionNotMasked(ProsperoError):
    pass


class InsufficientData(ProsperoError):
    pass


class DegenerateTargets(ProsperoError):
    pass


class EmptyCorpus(ProsperoError):
    pass


class MixedLengths(ProsperoError):
    pass


class ZeroMaskCount(ProsperoError):
    pass


class ExternalPriorUnavailable(ProsperoError):
    pass


class ProtocolError(ProsperoError):
    """Malformed or out-of-contract message from an external prior."""


class InvalidK(ProsperoError):
    pass


class ParseError(ProsperoError):
    pass


class UnknownSequence(ProsperoError):
    def __init__(self, seq: str):
        self.seq = seq
        super().__init__(f"sequence not present in table landscape: {seq}")


class NegativeVariance(ProsperoError):
    pass


class ExhaustedSpace(ProsperoError):
    pass


class EnumerationTooLarge(ProsperoError):
    pass


class EmptyDataset(ProsperoError):
    pass


class EmptyReference(ProsperoError):
    pass


class LengthTooShort(ProsperoError):
    pass


class BudgetExceeded(ProsperoError):
    pass


class ConfigError(ProsperoError):
    pass
