"""Exception hierarchy shared across the package."""


class LatentProbeError(Exception):
    """Base class for all package-specific errors."""


class InvalidArgument(LatentProbeError, ValueError):
    """An argument violates an operation precondition."""


class BackendError(LatentProbeError, RuntimeError):
    """A generator or classifier backend failed."""


class BackendLoadError(BackendError):
    """Model files are missing, unreadable, or the runtime is unavailable."""


class BackendContractError(BackendError):
    """A backend produced or received tensors of an undeclared shape."""
