"""Exception hierarchy shared by all beecount modules."""


class BeeCountError(Exception):
    """Base class for every error raised by the package."""


class ConfigError(BeeCountError, ValueError):
    """Invalid configuration value or configuration file."""


class GeometryError(BeeCountError, ValueError):
    """A region or grid does not fit the frame it is applied to."""


class DataError(BeeCountError):
    """Input data (frames, annotations, event files) cannot be used."""


class FrameError(DataError):
    """A frame file is missing, unreadable or the sequence is empty."""


class AnnotationError(DataError):
    """A YOLO annotation file violates the expected grammar or ranges."""
