"""Exception hierarchy shared by every layer."""


class StegoError(Exception):
    """Base class for all errors raised by stegochain."""


class ParameterError(StegoError, ValueError):
    """An argument is outside its permitted range."""


class CapacityError(StegoError, ValueError):
    """The frame does not fit the cover under the current parameters."""


class StateError(StegoError, RuntimeError):
    """Operation not allowed in the session's current phase."""


class FormatError(StegoError, ValueError):
    """Input image is not in a lossless format we can embed into."""


class DecodeError(StegoError, ValueError):
    """Input looked like PNG but could not be decoded."""


class ConfigurationError(StegoError, ValueError):
    """Malformed scenario script, fault plan, or CLI configuration."""
