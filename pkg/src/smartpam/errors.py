"""Exception hierarchy shared by the library and the CLI.

Every domain failure raises a subclass of :class:`SmartPamError` so the CLI can
turn it into a one-line diagnostic instead of a traceback.
"""


class SmartPamError(ValueError):
    """Base class for user-facing domain errors."""


class ChannelMismatch(SmartPamError):
    pass


class WindowTooShort(SmartPamError):
    pass


class FeatureCountMismatch(SmartPamError):
    pass


class InvalidModel(SmartPamError):
    pass


class InvalidSliceCount(SmartPamError):
    pass


class StalePlan(SmartPamError):
    pass


class PlanConsistencyError(SmartPamError):
    """A receptive range escaped the window; signals a planner bug, not bad input."""


class EmptyWindow(SmartPamError):
    pass


class ConfigError(SmartPamError):
    pass


class ModelFileError(SmartPamError):
    pass


class CorruptModel(ModelFileError):
    pass


class MalformedModel(ModelFileError):
    pass


class UnsupportedVersion(ModelFileError):
    pass


class WavError(SmartPamError):
    pass
