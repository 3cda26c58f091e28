"""Lower growth envelopes for subsolutions of fully nonlinear elliptic
equations in halfspaces.

The package solves the envelope ODE, evaluates its closed-form solutions,
classifies the resulting growth, certifies the barrier supersolution on
sampled domains and checks sharp solutions of the variable exponent
Laplacian.
"""

from .errors import (
    GrowthError,
    NonconvergedStep,
    OutsideDomain,
    ParamError,
    SamplePlanEmpty,
    SolverError,
    StiffnessAbort,
    Unavailable,
    UnknownFamily,
)
from .profiles import Ellipticity, Geometry, GrowthProfile, Osgood, osgood_check
from .ode_engine import OdeProblem, SolutionCurve, StepControl, closed_form, solve
from .growth import GrowthReport, classify, limit_ratio, select_gamma
from .barrier import (
    BarrierField,
    CertificateReport,
    OperatorUnderTest,
    SamplePlan,
    barrier_derivatives,
    verify_supersolution,
    xi,
)
from .pxlaplace import Exponent, ResidualReport, px_operator, verify_1d_solution

__version__ = "0.1.0"

__all__ = [
    "GrowthError", "NonconvergedStep", "OutsideDomain", "ParamError", "SamplePlanEmpty",
    "SolverError", "StiffnessAbort", "Unavailable", "UnknownFamily",
    "Ellipticity", "Geometry", "GrowthProfile", "Osgood", "osgood_check",
    "OdeProblem", "SolutionCurve", "StepControl", "closed_form", "solve",
    "GrowthReport", "classify", "limit_ratio", "select_gamma",
    "BarrierField", "CertificateReport", "OperatorUnderTest", "SamplePlan",
    "barrier_derivatives", "verify_supersolution", "xi",
    "Exponent", "ResidualReport", "px_operator", "verify_1d_solution",
]
