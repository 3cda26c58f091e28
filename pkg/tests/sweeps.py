"""Parameter sweeps shared by the module tests and the acceptance suite."""

import math
import time

import numpy as np

from plgrowth.ode_engine import AS_WRITTEN, SEPARABLE, OdeProblem, StepControl, closed_form_log, solve
from plgrowth.profiles import Ellipticity, GrowthProfile

#: largest |log f| compared; beyond it f is not representable to full precision
LOG_RANGE = math.log(1e250)
T_END = 10.0


def oracle_problems():
    """Closed-form problems over k, nu, A and K for all four families.

    ``A = C/lam`` for power and logpos (``C = 1``), ``A = 1/Lam`` for
    logneg and ``Lam/lam = 2A`` for the zero profile.
    """
    out = []
    for nu in (0.2, 1.0, 5.0):
        for A in (0.5, 1.0):
            for K in (0.0, 0.1):
                inv = 1.0 / A
                for k in (1.0, 1.5, 2.0, 3.0, 10.0):
                    out.append(OdeProblem(GrowthProfile.power(k), Ellipticity(inv, inv), None,
                                          nu, T_END, SEPARABLE, K))
                out.append(OdeProblem(GrowthProfile.logpos(), Ellipticity(inv, inv), None,
                                      nu, T_END, SEPARABLE, K))
                out.append(OdeProblem(GrowthProfile.logneg(), Ellipticity(1.0, inv), None,
                                      nu, T_END, SEPARABLE, K))
                out.append(OdeProblem(GrowthProfile.zero(), Ellipticity(1.0, 2.0 * A), None,
                                      nu, T_END, AS_WRITTEN, K))
    return out


def representable_horizon(problem, t_end=T_END):
    """Largest ``T <= t_end`` with ``|log f| <= LOG_RANGE`` on ``[0, T]``."""
    t = np.linspace(0.0, t_end, 4001)
    g = np.abs(np.asarray(closed_form_log(problem, t), dtype=float))
    bad = np.flatnonzero(~(g <= LOG_RANGE))
    return t_end if bad.size == 0 else float(t[max(bad[0] - 1, 1)])


def oracle_deviation(problem, control=StepControl(rtol=1e-11)):
    """Max relative deviation between the integrator and the closed form."""
    T = representable_horizon(problem)
    p = OdeProblem(problem.phi, problem.ell, problem.geom, problem.nu, T, problem.variant,
                   problem.K, problem.khat_rule)
    curve = solve(p, control)
    t = np.linspace(0.0, T, 2001)
    num = np.log(np.asarray(curve(t), dtype=float))
    ref = np.asarray(closed_form_log(p, t), dtype=float)
    # relative deviation of f is |exp(num - ref) - 1|
    return float(np.max(np.abs(np.expm1(num - ref)))), T


def run_oracle_sweep():
    start = time.perf_counter()
    worst, rows = 0.0, []
    for problem in oracle_problems():
        dev, T = oracle_deviation(problem)
        rows.append((problem, dev, T))
        worst = max(worst, dev)
    return worst, rows, time.perf_counter() - start
