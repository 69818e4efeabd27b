"""Exception hierarchy shared by all modules."""


class Cr3dError(Exception):
    """Base class for every error raised by the package."""


# mesh
class NonConforming(Cr3dError):
    pass


class Degenerate(Cr3dError):
    pass


class IndexOutOfRange(Cr3dError):
    pass


class UnknownEntity(Cr3dError):
    pass


class InvalidParameter(Cr3dError):
    pass


# polylib / quadrature
class SingularSystemError(Cr3dError):
    pass


class ExactnessVerificationFailed(Cr3dError):
    pass


# fespace / assembly
class UnsupportedDegree(Cr3dError):
    pass


class DimensionMismatch(Cr3dError):
    pass


# stability
class NotSPD(Cr3dError):
    pass


class NoConvergence(Cr3dError):
    pass


class DisconnectedMacro(Cr3dError):
    pass


class NotCritical(Cr3dError):
    pass


class ApexNotOnEdge(Cr3dError):
    pass


class PreconditionUnmet(Cr3dError):
    pass
