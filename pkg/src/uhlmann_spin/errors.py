"""Exception types raised by the library."""


class UhlmannError(ValueError):
    """Base class for all input and convergence errors."""


class NonHermitianInput(UhlmannError):
    pass


class IndexOutOfRange(UhlmannError):
    pass


class InvalidFrequency(UhlmannError):
    pass


class NonPositiveTemperature(UhlmannError):
    pass


class NonUnitaryPhase(UhlmannError):
    pass


class RankDeficient(UhlmannError):
    pass


class NotConverged(UhlmannError):
    pass


class GridTooCoarse(UhlmannError):
    pass


class RegisterTooLarge(UhlmannError):
    pass


class EmbeddingMismatch(UhlmannError):
    pass
