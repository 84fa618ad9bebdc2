"""Exception hierarchy. Every error raised on purpose derives from FloodFuseError."""


class FloodFuseError(Exception):
    """Base class for all floodfuse errors."""


class RasterFileNotFound(FloodFuseError, FileNotFoundError):
    pass


class UnsupportedFormatError(FloodFuseError):
    pass


class BandIndexError(FloodFuseError, IndexError):
    pass


class GeoreferenceError(FloodFuseError):
    """The file carries no usable geotransform."""


class RasterIOError(FloodFuseError, OSError):
    pass


class GridMismatchError(FloodFuseError, ValueError):
    pass


class CRSMismatchError(FloodFuseError, ValueError):
    pass


class ParameterError(FloodFuseError, ValueError):
    pass


class SceneError(FloodFuseError, ValueError):
    """Invalid scene lists: empty epochs, missing bands, mixed polarizations."""


class GeometryError(FloodFuseError, ValueError):
    pass


class ZoneMismatchError(FloodFuseError, ValueError):
    pass


class TemplateError(FloodFuseError, ValueError):
    pass


class ConfigError(FloodFuseError):
    """Config validation failed; ``problems`` holds (field, message) pairs."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(f"{field}: {msg}" for field, msg in self.problems))
