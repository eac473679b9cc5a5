"""Exception hierarchy for varbw.

Everything raised on purpose derives from :class:`VarBWError`.  Input
validation errors additionally derive from :class:`ValueError` so callers
that only care about "bad input" can catch that.
"""


class VarBWError(Exception):
    """Base class for all varbw errors."""


class InputError(VarBWError, ValueError):
    """Invalid user-supplied data (profiles, grids, files)."""


class NumericalError(VarBWError, ArithmeticError):
    """A computation could not be carried out to the requested accuracy."""


# profile
class NonIncreasingBreakpoints(InputError):
    pass


class NonPositiveValue(InputError):
    pass


class LengthMismatch(InputError):
    pass


class IndexOutOfRange(VarBWError, IndexError):
    pass


class NonPositiveSpectralParameter(InputError):
    pass


# spectral
class NonPositiveLambda(InputError):
    pass


class VanishingDenominator(NumericalError):
    pass


class GridCutoffMismatch(InputError):
    pass


class OutOfBand(InputError):
    pass


class NearSingularSystem(NumericalError):
    pass


class WindowTooNarrow(NumericalError):
    pass


class DegenerateGrid(InputError):
    pass


# kernels
class NonPositiveScale(InputError):
    pass


class AsymmetricWindow(InputError):
    pass


class ToyRequiresSingleJump(InputError):
    pass


# signret
class NegativeMagnitude(InputError):
    pass


class AmbiguousCrossing(NumericalError):
    pass


class NoClearWinner(NumericalError):
    pass


class ZeroFunction(VarBWError):
    """The magnitude data carries no signal; only the zero function fits."""
