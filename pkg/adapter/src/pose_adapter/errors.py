"""Exception types raised by the adapter."""


class AdapterError(Exception):
    """Base class for everything this package raises on purpose."""


class ModelUnavailable(AdapterError):
    """The requested pose-model backend cannot run on this machine."""


class UnreadableImage(AdapterError):
    """An input path is missing, not an image, or not decodable."""


class InvalidRequest(AdapterError):
    """A parameter is outside the supported range (size flag, threshold, backend)."""
