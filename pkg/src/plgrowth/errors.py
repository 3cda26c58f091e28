"""Exception hierarchy shared by all modules."""


class GrowthError(Exception):
    """Base class for every error raised by plgrowth."""


class ParamError(GrowthError, ValueError):
    """A parameter lies outside the range an operation accepts."""


class BadEllipticity(ParamError):
    """Ellipticity constants violate 0 < lam <= Lam."""


class DomainError(ParamError):
    """An ODE right-hand side was asked for a negative state."""


class OutOfRange(ParamError):
    """Requested abscissa lies outside a stored curve."""


class OutsideDomain(ParamError):
    """A point lies outside the spherical segment D(R)."""


class PoleAtZero(ParamError):
    """Ei(0) is not defined."""


class Unavailable(GrowthError):
    """No closed form exists for the requested parameter regime."""


class UnknownFamily(GrowthError):
    """Operation needs a catalogued growth family but got a custom one."""


class NonfiniteIntegrand(GrowthError):
    """1/Phi is infinite on a set inside the Osgood integration range."""

    def __init__(self, s, message=None):
        self.s = s
        super().__init__(message or f"Phi vanishes at s={s!r} inside the Osgood range")


class SolverError(GrowthError):
    """Base class for integrator failures."""


class StiffnessAbort(SolverError):
    """Step size collapsed below the machine-scaled floor."""

    def __init__(self, t, message=None):
        self.t = t
        super().__init__(message or f"step size collapsed at t={t!r}")


class NonconvergedStep(SolverError):
    """The integrator could not meet the requested tolerance."""


class ZeroGradient(ParamError):
    """Operator undefined because the gradient vanishes."""


class ZeroDp(ParamError):
    """Angle between Dp and Du undefined because Dp vanishes."""


class SamplePlanEmpty(GrowthError):
    """A sample plan produced no admissible points."""
