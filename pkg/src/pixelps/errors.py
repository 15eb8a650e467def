"""Exception types shared across the toolkit."""


class PixelPSError(Exception):
    """Base class for all toolkit errors."""


class DimensionMismatch(PixelPSError):
    pass


class TruncatedFile(PixelPSError):
    pass


class BadMagic(PixelPSError):
    pass


class VersionUnsupported(PixelPSError):
    pass


class UnknownMaterial(PixelPSError):
    pass


class EmptyInput(PixelPSError):
    pass


class ConfigInvalid(PixelPSError):
    pass


class LineCountMismatch(PixelPSError):
    pass


class ParseError(PixelPSError):
    pass


class CountMismatch(PixelPSError):
    pass


class DecodeError(PixelPSError):
    pass


class OutsideMask(PixelPSError):
    pass


class RankDeficientLights(PixelPSError):
    pass


class EmptyIntersection(PixelPSError):
    pass


class PredictorFailure(PixelPSError):
    pass
