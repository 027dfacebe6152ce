"""Exception types shared across the package."""


class RoughDriftError(Exception):
    """Base class for package-specific failures."""


class SingularityError(RoughDriftError):
    """A field evaluation produced non-finite values and no cap/mollification
    policy was configured to absorb them."""

    def __init__(self, message, *, path=None, step=None):
        super().__init__(message)
        self.path = path
        self.step = step


class ResolutionError(RoughDriftError):
    """The spatial grid is too coarse to resolve the smoothing kernel over a
    meaningful part of the time horizon."""

    def __init__(self, message, *, cutoff=None, horizon=None):
        super().__init__(message)
        self.cutoff = cutoff
        self.horizon = horizon


class BoxMismatchError(RoughDriftError):
    """Two objects that must share a space-time box do not."""
