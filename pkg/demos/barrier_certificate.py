"""Certify a barrier supersolution on a sampled halfspace domain.

The barrier ``V(x) = int_0^{Xi(x)} f_{nu,R}`` lives on the truncated
domain ``D(R) = {x_n > 0, |(x', x_n + gamma)| - gamma < R}``.  We check
that the Pucci operator with a quadratic gradient term is positive at
every point of a 10^4-point quasi-random sample, then shrink ``gamma``
far enough that the geometric margin ``K - (n-1)/rho`` turns negative and
watch the certificate fail.

Run with ``python3 demos/barrier_certificate.py``.
"""
import numpy as np

from plgrowth import (
    BarrierField,
    Ellipticity,
    Geometry,
    GrowthProfile,
    OperatorUnderTest,
    SamplePlan,
    verify_supersolution,
)

R = 10.0
phi = GrowthProfile.power(2.0)
field = BarrierField.build(phi, Ellipticity(), Geometry(2, lambda R: R), R, nu=1.0)
report = verify_supersolution(field, OperatorUnderTest.pucci_sublinear(), SamplePlan(n_points=10_000))
print("gamma = R")
print(f"  points sampled     {report.n_points}")
print(f"  min F(D^2V, DV)    {report.min_value:.4g} at {np.round(report.argmin, 4).tolist()}")
print(f"  certificate        {'pass' if report.passed else 'fail'}")

# gamma = R/4 and kappa = 0.5 give K = kappa/gamma = 2, while the
# tangential curvature (n-1)/rho reaches 1/gamma = 4 on the axis
small = BarrierField.build(GrowthProfile.zero(), Ellipticity(),
                           Geometry(2, lambda R: 0.25 * R, kappa=0.5), 1.0, nu=1.0)
bad = verify_supersolution(small, OperatorUnderTest.extremal(GrowthProfile.zero(), Ellipticity()))
m = bad.margins_summary
print("gamma = R/4, flat profile")
print(f"  nonpositive margins {m['n_nonpositive']} of {bad.n_points}, worst {m['min']:.3g} at {m['argmin']}")
print(f"  certificate        {'pass' if bad.passed else 'fail'}")
