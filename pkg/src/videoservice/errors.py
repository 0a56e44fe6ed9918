"""Exception hierarchy shared across the service."""


class VideoServiceError(Exception):
    """Base class for all service errors."""


class ConfigurationError(VideoServiceError):
    """Invalid configuration value (geometry, quality, boundary, ...)."""


class StartupError(VideoServiceError):
    """The service could not start (port in use, bad listen address)."""


class PoolExhaustedError(VideoServiceError):
    """No free buffer in the pool; the caller should skip this tick."""


class LeaseLifetimeError(VideoServiceError):
    """A buffer lease was used after release or across a reuse generation."""


class BackpressureError(VideoServiceError):
    """An encoder backend cannot accept more in-flight work."""


class UnavailableError(VideoServiceError):
    """A requested backend kind is not available on this machine."""


class ContractError(VideoServiceError):
    """A caller violated an operation precondition (e.g. geometry mismatch)."""
