"""Exception types shared across the package."""


class SpdSeqError(Exception):
    """Base class for all package-specific errors."""


class NotPositiveDefinite(SpdSeqError):
    """A matrix expected to be SPD failed its Cholesky factorization."""


class NoConvergence(SpdSeqError):
    """An iterative routine hit its iteration cap.

    The last iterate, when available, is attached as ``last_iterate``.
    """

    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class LogUndefined(SpdSeqError):
    """The principal matrix logarithm does not exist (eigenvalue at -1)."""


class SingularTriangular(SpdSeqError):
    """A triangular solve met a zero diagonal entry."""


class DomainError(SpdSeqError):
    """A sphere inner product left the positive orthant."""


class ArchitectureMismatch(SpdSeqError):
    """Two models compared for distance do not share an architecture."""


class Diverged(SpdSeqError):
    """Training loss became non-finite.

    ``last_good_state`` holds the parameter state dict from the last
    finite-loss epoch.
    """

    def __init__(self, message, last_good_state=None):
        super().__init__(message)
        self.last_good_state = last_good_state
