"""
Exception hierarchy shared by the numerical services and the CLI.
"""


class CsGravError(Exception):
    """Base class for every error raised by csgrav."""


class DimensionMismatchError(CsGravError, ValueError):
    pass


class SingularMatrixError(CsGravError, ValueError):
    """A matrix that must be invertible (coframe, group element) is not."""


class DegreeOverflowError(CsGravError, ValueError):
    pass


class JetExhaustedError(CsGravError, RuntimeError):
    """A derivative beyond the carried jet order was requested."""


class ChartKindError(CsGravError, ValueError):
    pass


class SpaceMismatchError(CsGravError, ValueError):
    pass


class SeriesDivergenceError(CsGravError, RuntimeError):
    pass


class InadmissibleSectionError(CsGravError, ValueError):
    """The connection has a transvection part above tolerance."""

    def __init__(self, message: str, p_norm: float):
        super().__init__(message)
        self.p_norm = p_norm


class PairingNormalizationError(CsGravError, AssertionError):
    pass


class LatticeError(CsGravError, ValueError):
    pass
