"""Exception types raised across the package."""


class SddvsError(Exception):
    """Base class for all errors raised by :mod:`sddvs`."""


class SpaceMismatch(SddvsError):
    pass


class DegenerateDenominator(SddvsError, ZeroDivisionError):
    """A guarded quotient met a denominator indistinguishable from zero.

    Attributes
    ----------
    node_id : int
        Identifier of the offending ``Quotient`` node.
    sample : int or None
        Row of the sample batch at which it happened (batch evaluation only).
    step : int or None
        Greedy step that built the quotient, when raised from ``solve_vs``.
    """

    def __init__(self, msg, node_id=None, sample=None, step=None):
        super().__init__(msg)
        self.node_id = node_id
        self.sample = sample
        self.step = step


class ShapeMismatch(SddvsError, ValueError):
    pass


class SingularMatrix(SddvsError, ArithmeticError):
    def __init__(self, msg, pivot=None):
        super().__init__(msg)
        self.pivot = pivot


class SingularSnapshot(SingularMatrix):
    pass


class BadMeshSpec(SddvsError, ValueError):
    pass


class NonProductCoefficient(SddvsError, TypeError):
    pass


class BoundaryConflict(SddvsError, ValueError):
    pass


class EigSolveFailure(SddvsError):
    pass


class NegativeEigenvalueUsed(SddvsError, ValueError):
    pass


class RegionOverlap(SddvsError, ValueError):
    pass


class RegionGap(SddvsError, ValueError):
    pass


class IndexOutOfRange(SddvsError, IndexError):
    pass


class NoInterface(SddvsError, ValueError):
    pass


class NotSingleTerm(SddvsError, ValueError):
    pass


class ZeroReference(SddvsError, ZeroDivisionError):
    pass


class EmptyInput(SddvsError, ValueError):
    pass


class BinMismatch(SddvsError, ValueError):
    pass


class ConfigError(SddvsError, ValueError):
    pass
