"""Exception types raised across the package."""


class KnockError(Exception):
    """Base class for all package errors."""


class WavFormatError(KnockError, ValueError):
    """The file is not a well-formed RIFF/WAVE container."""


class UnsupportedCodecError(KnockError, ValueError):
    """The WAVE encoding is neither PCM16 nor IEEE float32."""


class EmptySignalError(KnockError, ValueError):
    pass


class RateMismatchError(KnockError, ValueError):
    pass


class ShapeError(KnockError, ValueError):
    pass


class PlanningError(KnockError, ValueError):
    pass


class StratificationError(KnockError, ValueError):
    pass


class CheckpointError(KnockError, ValueError):
    pass
