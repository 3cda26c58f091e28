"""Sharp solutions of the variable exponent Laplacian.

Two families are checked.  The linear function ``u = c x_n`` is a solution
for every exponent ``p(x) = M0 + sum M_i x_i^2`` that does not depend on
``x_n``.  We confirm this analytically and with a finite-difference
divergence-form residual.  The one-dimensional pairs ``(u, p)`` with
``p = 1 + M exp(+-A x)`` are then verified on a grid, and the
sign conditions under which the growth estimate applies are evaluated
along them.

Run with ``python3 demos/variable_exponent.py``.
"""
import numpy as np

from plgrowth import Exponent, px_operator, verify_1d_solution
from plgrowth.pxlaplace import cor34_gate, divergence_residual, sharp_pair

rng = np.random.default_rng(0)
for c, M0, M in ((1.0, 1.5, [0.0, 0.0]), (2.0, 3.0, [1.0, 1.0]), (5.0, 3.0, [1.0, 0.0])):
    expo = Exponent.quadratic(M0, M)
    x = np.append(rng.uniform(-1, 1, 2), rng.uniform(0.1, 2.0))
    grad = np.array([0.0, 0.0, c])
    analytic = px_operator(expo, x, grad, np.zeros((3, 3)))
    fd = divergence_residual(expo, lambda y: c * y[-1], x)
    print(f"u = {c:g} x_3, p = {M0:g} + {M[0]:g} x_1^2 + {M[1]:g} x_2^2: "
          f"operator {analytic:g}, divergence residual {fd:.2e}")

print()
for family in ("Sista1", "Sista2"):
    for nu in (0.5, 1.0, 2.0):
        rep = verify_1d_solution(family, {"nu": nu, "M": 0.5, "A": 1.0})
        lam = "" if rep.lambda_equality_error is None else f", lambda equality {rep.lambda_equality_error:.1e}"
        print(f"{family} nu={nu:g}: residual {rep.max_scaled_residual:.1e}, "
              f"u' in [{rep.du_range[0]:.3g}, {rep.du_range[1]:.3g}]{lam}")

print()
for family, nu in (("Sista2", 0.5), ("Sista1", 2.0), ("Sista2", 2.0)):
    u, rate = sharp_pair(family, nu)
    expo = Exponent.exponential_1d(0.5, rate)
    gate = cor34_gate(expo, lambda s: float(u(s[0])), np.array([1.0]))
    verdict = "applies" if gate.applicable else f"does not apply ({gate.reason})"
    print(f"{family} nu={nu:g}: cos theta {gate.cos_theta:+.0f}, log|u'| {gate.log_grad:+.3f}, gate {verdict}")
