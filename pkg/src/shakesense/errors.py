"""Exception hierarchy shared by all modules."""


class ShakeSenseError(Exception):
    """Base class for every error raised by this package."""


class MalformedWav(ShakeSenseError):
    pass


class UnsupportedEncoding(ShakeSenseError):
    pass


class IoFailure(ShakeSenseError):
    pass


class SilentClip(ShakeSenseError):
    pass


class RateMismatch(ShakeSenseError):
    pass


class ChannelMismatch(ShakeSenseError):
    pass


class NegativeFrequency(ShakeSenseError, ValueError):
    pass


class TooManyFilters(ShakeSenseError, ValueError):
    pass


class ClipTooShort(ShakeSenseError, ValueError):
    pass


class ConfigDigestMismatch(ShakeSenseError):
    """A feature cache was produced with a different MFCC configuration."""


class InvalidSpec(ShakeSenseError, ValueError):
    pass


class ShapeMismatch(ShakeSenseError, ValueError):
    pass


class EmptySequence(ShakeSenseError, ValueError):
    pass


class EmptyDataset(ShakeSenseError, ValueError):
    pass


class LossKindMismatch(ShakeSenseError, ValueError):
    pass


class VersionMismatch(ShakeSenseError):
    pass


class CorruptCheckpoint(ShakeSenseError):
    pass


class TooFewSamples(ShakeSenseError, ValueError):
    pass


class NoNoiseClips(ShakeSenseError, ValueError):
    pass


class EmptySpace(ShakeSenseError, ValueError):
    pass


class BadConfig(ShakeSenseError, ValueError):
    pass
