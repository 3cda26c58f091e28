"""Acceptance criteria, one test each, at the published tolerances.

Every test records a one-line verdict; the lines are printed in the
terminal summary (and by running this file directly).
"""
import math
import tempfile
import time
from pathlib import Path

import mpmath
import numpy as np
import pytest
from scipy import integrate

from plgrowth import cli
from plgrowth import closed_forms as cf
from plgrowth._numerics import loglog_slope
from plgrowth.barrier import BarrierField, OperatorUnderTest, SamplePlan, verify_supersolution
from plgrowth.growth import BOUNDED, UNBOUNDED, classify, limit_ratio
from plgrowth.ode_engine import closed_form
from plgrowth.profiles import Ellipticity, Geometry, GrowthProfile
from plgrowth.pxlaplace import Exponent, divergence_residual, px_operator, verify_1d_solution
from sweeps import run_oracle_sweep
from test_barrier import fd_hessian, interior_points
from test_closed_forms import _problems, closed_form_residual

RESULTS = {}


def record(number, title, ok, detail):
    RESULTS[number] = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    assert ok, RESULTS[number]


def test_criterion_01_oracle_equivalence():
    worst, rows, elapsed = run_oracle_sweep()
    ok = len(rows) >= 60 and worst <= 1e-6 and elapsed < 30.0
    record(1, "oracle equivalence", ok,
           f"{len(rows)} combinations, max rel deviation {worst:.2e} (<= 1e-6), {elapsed:.1f} s (< 30 s)")


def test_criterion_02_closed_form_residual():
    worst, count = 0.0, 0
    for problem in _problems():
        horizon = 3.0 if problem.phi.family == "logneg" and problem.nu > 1 else 10.0
        for t in np.linspace(0.05, horizon - 0.05, 60):
            if not 1e-300 < closed_form(problem, t) < 1e300:
                continue
            worst = max(worst, closed_form_residual(problem, t)[0])
            count += 1
    families = {p.phi.family for p in _problems()}
    ok = worst <= 1e-8 and families == {"zero", "power", "logpos", "logneg"}
    record(2, "closed-form ODE residual", ok,
           f"{count} points over {len(families)} families, max relative residual {worst:.2e} (<= 1e-8)")


def test_criterion_03_exponential_integral():
    worst = 0.0
    for x in (-20.0, -5.0, -1.0, -0.5, 0.5, 1.0, 5.0, 20.0):
        series = float(mpmath.ei(mpmath.mpf(x)))
        if x < 0:
            # Ei(x) = -int_{-x}^oo e^{-s}/s ds
            quad = -integrate.quad(lambda s: math.exp(-s) / s, -x, np.inf, epsabs=0, epsrel=1e-13)[0]
            assert abs(quad - series) <= 1e-12 * abs(series)
        worst = max(worst, abs(float(cf.expint_ei(x)) - series) / abs(series))
    record(3, "exponential integral", worst <= 1e-10, f"max rel error at 8 points {worst:.2e} (<= 1e-10)")


def _barrier_scenarios():
    flat = GrowthProfile.zero()
    p15 = GrowthProfile.power(1.5)
    yield ("flat n=2", BarrierField.build(flat, Ellipticity(), Geometry(2, lambda R: 2 * R), 1.0, 1.0),
           OperatorUnderTest.extremal(flat, Ellipticity()))
    yield ("power 1.5 n=1", BarrierField.build(p15, Ellipticity(), Geometry(1, lambda R: R), 5.0, 2.0),
           OperatorUnderTest.extremal(p15, Ellipticity()))
    yield ("Pucci k=2 n=2", BarrierField.build(GrowthProfile.power(2.0), Ellipticity(),
                                               Geometry(2, lambda R: R), 10.0, 1.0),
           OperatorUnderTest.pucci_sublinear())


def test_criterion_04_barrier_certificate():
    parts, ok = [], True
    for name, field, op in _barrier_scenarios():
        start = time.perf_counter()
        rep = verify_supersolution(field, op, SamplePlan(n_points=10_000))
        elapsed = time.perf_counter() - start
        good = rep.passed and rep.min_value > 0 and rep.n_points >= 10_000 and elapsed < 10.0
        ok &= good
        parts.append(f"{name} min {rep.min_value:.3g} in {elapsed:.2f} s")
    n, R = 2, 1.0
    small = BarrierField.build(GrowthProfile.zero(), Ellipticity(), Geometry(n, lambda R: 0.25 * R, kappa=0.5),
                               R, 1.0)
    neg = verify_supersolution(small, OperatorUnderTest.extremal(GrowthProfile.zero(), Ellipticity()))
    ok &= (not neg.passed) and neg.margins_summary["min"] <= 0
    parts.append(f"undersized gamma margin {neg.margins_summary['min']:.3g}")
    record(4, "barrier certificate", ok, "; ".join(parts))


def test_criterion_05_barrier_calculus():
    worst_grad = worst_trace = worst_eig = 0.0
    families = (GrowthProfile.zero(), GrowthProfile.power(1.5), GrowthProfile.logpos(), GrowthProfile.logneg())
    for n in (1, 2, 3, 5):
        for phi in families:
            field = BarrierField.build(phi, Ellipticity(), Geometry(n, lambda R: R), 2.0, 0.7)
            x = interior_points(field, 200, seed=n)
            g = np.linalg.norm(field.grad(x), axis=1)
            worst_grad = max(worst_grad, float(np.max(np.abs(g - field.f(field.xi(x))) / field.f(field.xi(x)))))
            tp, tm = field.trace_split(x[:25])
            for p, a, b in zip(x[:25], tp, tm):
                H = fd_hessian(field, p)
                worst_trace = max(worst_trace, abs(np.trace(H) - (a - b)) / max(abs(a - b), 1e-300))
                t = field.xi(p)
                expected = np.sort([field.fprime(t)] + [field.f(t) / (t + field.gamma)] * (n - 1))
                ev = np.sort(np.linalg.eigvalsh(H))
                worst_eig = max(worst_eig, float(np.max(np.abs(ev - expected)) / np.max(np.abs(expected))))
    ok = worst_grad <= 1e-10 and worst_trace <= 1e-6 and worst_eig <= 1e-6
    record(5, "barrier calculus", ok,
           f"n in (1,2,3,5): |grad V| vs f {worst_grad:.1e}, trace {worst_trace:.1e}, eigen {worst_eig:.1e}")


def test_criterion_06_growth_classifier():
    expected = {1.0: BOUNDED, 1.5: BOUNDED, 2.0 - 1e-2: BOUNDED, 2.0: UNBOUNDED, 3.0: UNBOUNDED, 10.0: UNBOUNDED}
    flags, laws, ok = [], [], True
    for k, flag in expected.items():
        rep = classify(GrowthProfile.power(k), Ellipticity(), 5.0)
        law = rep.growth_law
        flags.append("B" if rep.boundedness == BOUNDED else "U")
        laws.append(law.tag)
        ok &= rep.boundedness == flag
        if k == 1.0:
            ok &= law.tag == "SubExponentialDecayRate"
        elif k < 2.0:
            ok &= law.tag == "Power" and law.target == "M'"
        elif k == 2.0:
            ok &= law.tag == "Log"
        else:
            ok &= law.tag == "Power" and law.target == "M" and abs(law.exponent - (2 - k) / (1 - k)) < 1e-12
    x = np.geomspace(1e2, 1e4, 25)
    s2 = loglog_slope(x, np.exp(cf.u_power(x, 2.0, 1.0, 5.0)))
    s10 = loglog_slope(x, cf.u_power(x, 10.0, 1.0, 5.0))
    ok &= abs(s2 - 1.0) <= 0.05 and abs(s10 - 8.0 / 9.0) <= 0.05
    record(6, "growth classifier", ok,
           f"flags {''.join(flags)}, laws {laws}, slope exp(u) k=2 {s2:.4f}, slope u k=10 {s10:.4f}")


def test_criterion_07_limit_values():
    worst = 0.0
    for n in (1, 2, 3, 5):
        res = limit_ratio(GrowthProfile.zero(), Ellipticity(), Geometry(n, lambda R: n * R), 1.0)
        worst = max(worst, float(np.max(np.abs(res.ratio - math.exp(-1.0)))))
    record(7, "limit values", worst <= 1e-10, f"max |ratio - 1/e| over sweep, n in (1,2,3,5): {worst:.1e}")


def test_criterion_08_px_sharpness():
    max_analytic = max_fd = 0.0
    for c in (1.0, 2.0, 5.0):
        for M0 in (1.5, 3.0):
            for Mi in (0.0, 1.0):
                expo = Exponent.quadratic(M0, [Mi, Mi])
                rng = np.random.default_rng(int(100 * c + 10 * M0 + Mi))
                x = rng.uniform(-1, 1, (8, 3))
                x[:, -1] = rng.uniform(0.1, 2.0, 8)
                grad = np.zeros_like(x)
                grad[:, -1] = c
                max_analytic = max(max_analytic, float(np.max(np.abs(
                    px_operator(expo, x, grad, np.zeros((8, 3, 3)))))))
                max_fd = max(max_fd, max(abs(divergence_residual(expo, lambda y: c * y[-1], xi)) for xi in x))
    ok = max_analytic == 0.0 and max_fd <= 1e-8
    record(8, "p(x) sharpness", ok, f"12 parameter sets, analytic {max_analytic:g}, finite differences {max_fd:.1e}")


def test_criterion_09_one_dimensional_suite():
    worst, ok = 0.0, True
    for nu in (0.3, 0.5, 0.9, 1.0, 2.0):
        family = "Sista2" if nu > 1 else "LogPosCheck"
        rep = verify_1d_solution(family, {"nu": nu, "M": 0.5, "A": 1.0})
        worst = max(worst, rep.max_scaled_residual)
        ok &= rep.passed
    lam_worst = 0.0
    for M in (0.1, 0.5, 1.0):
        rep = verify_1d_solution("Sista1", {"nu": 0.5, "M": M, "A": 1.0})
        lam_worst = max(lam_worst, rep.lambda_equality_error)
    ok &= worst <= 1e-7 and lam_worst <= 1e-10
    record(9, "one-dimensional pairs", ok, f"max scaled residual {worst:.1e} (<= 1e-7), "
           f"lambda equality {lam_worst:.1e} (<= 1e-10)")


def _columns(path):
    head, cols = cli.read_columns(path)
    return head, np.array(cols, dtype=float)


def test_criterion_10_figures():
    checks = []
    with tempfile.TemporaryDirectory() as tmp:
        out = Path(tmp)
        for fig in ("fig2", "fig3", "fig4"):
            checks.append(cli.run(["figures", "--scenario", fig, "--out", tmp]) == 0)
        head, f = _columns(out / "fig2_f.csv")
        _, u = _columns(out / "fig2_u.csv")
        checks.append(np.all(f[1:, 0] == 5.0))
        checks.append(np.all(np.diff(f[1:], axis=1) < 0))
        checks.append(np.all(np.diff(u[1:], axis=1) > 0))
        above = np.all(f[1:] >= 1.0, axis=0)
        checks.append(np.all(np.diff(f[1:, above], axis=0) <= 0))
        for panel in ("fig3_logpos_u", "fig3_logneg_u", "fig4_sista1_u", "fig4_sista2_u"):
            _, v = _columns(out / f"{panel}.csv")
            checks.append(np.all(np.diff(v[1:], axis=1) > 0))
            checks.append(np.all(np.diff(v[1:, 1:], axis=0) > 0))
        for panel in ("fig3_logpos_f", "fig3_logneg_f"):
            _, v = _columns(out / f"{panel}.csv")
            checks.append(np.all(np.diff(v[1:], axis=0) > 0))
        doc = cli.load_scenario("fig3")
        checks.append(doc["ellipticity"] == {"lam": 1.0, "Lam": 1.0})
    ok = all(bool(c) for c in checks)
    record(10, "figure curves", ok, f"{sum(bool(c) for c in checks)}/{len(checks)} monotonicity and ordering checks")


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q"]))
