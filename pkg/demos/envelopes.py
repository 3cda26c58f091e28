"""Envelope curves and the growth they force.

For each power profile ``Phi(s) = s^k`` we integrate the envelope ODE
``f' = -Phi(f)/lam``, starting from ``f(0) = 5``, compare the numerical
curve with its closed form and then ask the classifier what the
primitive ``u = int f`` does at infinity.  Profiles with ``k < 2`` give
a bounded primitive, ``k = 2`` grows like ``log`` and ``k > 2`` like a
power.

Run with ``python3 demos/envelopes.py``.
"""
import numpy as np

from plgrowth import Ellipticity, GrowthProfile, OdeProblem, classify, closed_form, solve

NU = 5.0
ell = Ellipticity()
t = np.linspace(0.0, 10.0, 11)

print(f"{'k':>6} {'f(10) numeric':>16} {'f(10) closed':>16} {'max rel dev':>12}  boundedness  law")
for k in (1.0, 1.5, 2.0, 3.0, 10.0):
    problem = OdeProblem(GrowthProfile.power(k), ell, None, NU, 10.0)
    curve = solve(problem)
    exact = np.array([closed_form(problem, s) for s in t])
    dev = np.max(np.abs(curve(t) / exact - 1.0))
    rep = classify(GrowthProfile.power(k), ell, NU)
    print(f"{k:6g} {curve(10.0):16.10g} {exact[-1]:16.10g} {dev:12.2e}  "
          f"{rep.boundedness:<11}  {rep.growth_law.tag} on {rep.growth_law.target}")

# The full report for the borderline case, including the sampled evidence
print()
print(classify(GrowthProfile.power(2.0), ell, NU).to_table())
