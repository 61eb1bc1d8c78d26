"""Exception types shared across modules."""


class WrgError(Exception):
    """Base class for library errors."""


class InvalidParameter(WrgError, ValueError):
    pass


class DomainError(WrgError, ValueError):
    pass


class NonConvergence(WrgError, ArithmeticError):
    pass


class EtaTooLarge(WrgError, ValueError):
    pass


class PreconditionViolated(WrgError, ValueError):
    pass


class UnsupportedClass(WrgError, ValueError):
    pass


class ResourceGuard(WrgError, ValueError):
    """Requested work exceeds a configured size guard."""


class WindowOverlap(WrgError, ValueError):
    pass


class EmptySample(WrgError, ValueError):
    pass


class InsufficientReplicas(WrgError, ValueError):
    pass


GuardExceeded = ResourceGuard
