"""Exception types shared across the package."""


class PhotonCountError(Exception):
    """Base class for all package errors."""


class TargetUnreachable(PhotonCountError, ValueError):
    """A requested QBER cannot be reached inside the search bracket."""


class DegenerateChannel(PhotonCountError, ValueError):
    """The channel carries no information (or a parameter is outside its open domain)."""


class LengthMismatch(PhotonCountError, ValueError):
    pass


class ConstructionFailed(PhotonCountError, RuntimeError):
    """Random code construction gave up after its retry budget."""
