"""Explicit solutions of the envelope ODEs and their antiderivatives.

Every family with a closed form is covered here:

* ``zero``   -- f = nu exp(-K int Lam/lam)
* ``power``  -- Phi = C s**k, solved through the Bernoulli substitution
* ``logpos`` -- Phi = C s |log s|, linear in ``log f`` on each side of f = 1
* ``logneg`` -- Phi = -s |log s|, same structure with the sign flipped

The log families are evaluated in log space (``log_f_*``) so ratios of
envelopes stay finite long after ``f`` itself under- or overflows.

Coefficient integrals are passed as callables ``intA(t) = int_0^t A``;
plain numbers are read as a constant ``A`` (so ``intA(t) = A t``).
"""
import math

import numpy as np

from ._numerics import ScalarFunction, as_function, integral_from_zero
from .errors import ParamError, PoleAtZero, Unavailable

EULER_GAMMA = 0.57721566490153286061

#: below this the k > 1 power formula switches to its K -> 0 limit
KTILDE_ZERO = 1e-12


# --------------------------------------------------------------------------
# exponential integral
# --------------------------------------------------------------------------

def _ei_series(x):
    # Ei(x) = gamma + log|x| + sum_{k>=1} x^k / (k k!)
    term = 1.0
    total = 0.0
    k = 0
    while True:
        k += 1
        term *= x / k
        contrib = term / k
        total += contrib
        if abs(contrib) < 1e-17 * abs(total) or k > 500:
            break
    return EULER_GAMMA + math.log(abs(x)) + total


def _ei_asymptotic(x):
    # Ei(x) ~ e^x / x * sum k!/x^k, truncated at the smallest term
    total = 1.0
    term = 1.0
    k = 0
    while True:
        k += 1
        nxt = term * k / x
        if abs(nxt) >= abs(term) or abs(nxt) < 1e-17 * total:
            if abs(nxt) < abs(term):
                total += nxt
            break
        term = nxt
        total += term
    return math.exp(x) / x * total


def _e1_continued_fraction(z):
    # E1(z) = e^-z / (z + 1 - 1/(z + 3 - 4/(z + 5 - ...))), modified Lentz
    tiny = 1e-300
    b = z + 1.0
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 500):
        a = -float(i * i)
        b += 2.0
        d = 1.0 / (a * d + b)
        c = b + a / c
        delta = c * d
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return h * math.exp(-z)


def _ei_scalar(x):
    x = float(x)
    if x == 0.0:
        raise PoleAtZero("Ei has a logarithmic pole at 0")
    if math.isnan(x):
        return math.nan
    if x > 709.0:
        return math.inf
    if x < -745.0:
        return -0.0
    if x > 40.0:
        return _ei_asymptotic(x)
    if x >= -2.0:
        return _ei_series(x)
    # the alternating series cancels catastrophically here
    return -_e1_continued_fraction(-x)


def expint_ei(x):
    """Exponential integral ``Ei(x)`` (Cauchy principal value), ``x != 0``.

    Power series near the origin and for positive arguments up to 40, the
    divergent asymptotic series beyond 40, and the continued fraction of
    ``E1(-x)`` for ``x < -2`` where the series would cancel.
    """
    if np.ndim(x):
        return np.vectorize(_ei_scalar, otypes=[float])(x)
    return _ei_scalar(x)


# --------------------------------------------------------------------------
# helpers
# --------------------------------------------------------------------------

def _int_fn(intA):
    """Normalise ``intA`` to a callable ``t -> int_0^t A``."""
    if isinstance(intA, ScalarFunction):
        if intA.is_constant:
            a = intA.value
            return lambda t: a * np.asarray(t, dtype=float)
        return intA.func
    if callable(intA):
        return intA
    a = float(intA)
    return lambda t: a * np.asarray(t, dtype=float)


def integral_of_coefficient(A):
    """``t -> int_0^t A`` for a coefficient function (constant fast path)."""
    A = as_function(A)
    if A.is_constant:
        return A.value
    return lambda t: integral_from_zero(A, t)


def _scalar_or_array(v):
    v = np.asarray(v, dtype=float)
    return v if v.ndim else float(v)


def _k_term(K, x):
    """``K * x`` with ``0 * inf`` read as 0 (the term is absent when K = 0)."""
    return K * x if K != 0.0 else np.zeros_like(x)


def _check_nu(nu):
    if not nu > 0:
        raise ParamError(f"nu must be positive, got {nu}")


# --------------------------------------------------------------------------
# envelope solutions f(t)
# --------------------------------------------------------------------------

def f_zero(t, intRatio, nu, K=0.0):
    """Phi = 0: ``nu exp(-K int_0^t Lam/lam)``."""
    T = np.asarray(_int_fn(intRatio)(t), dtype=float)
    return _scalar_or_array(nu * np.exp(-K * T))


def f_power(t, k, intA, nu, Ktilde=0.0):
    """Solution of ``f' = -A (f**k + Ktilde f)``, ``f(0) = nu``."""
    if not k >= 1:
        raise ParamError(f"k must be >= 1, got {k}")
    _check_nu(nu)
    if Ktilde < 0:
        raise ParamError("Ktilde must be nonnegative")
    T = np.asarray(_int_fn(intA)(t), dtype=float)
    if k == 1:
        return _scalar_or_array(nu * np.exp(-(1.0 + Ktilde) * T))
    km1 = k - 1.0
    if Ktilde < KTILDE_ZERO:
        # ((k-1) T + nu^(1-k))^(1/(1-k)), written to avoid overflow of nu^(1-k)
        return _scalar_or_array(nu * (km1 * T * nu ** km1 + 1.0) ** (-1.0 / km1))
    # Ktilde^(1/(k-1)) (exp((k-1) Ktilde T)(Ktilde/nu^(k-1) + 1) - 1)^(1/(1-k))
    base = np.expm1(km1 * Ktilde * T) * (Ktilde / nu ** km1 + 1.0) + Ktilde / nu ** km1
    return _scalar_or_array(Ktilde ** (1.0 / km1) * base ** (-1.0 / km1))


def log_f_logpos(t, intA, nu, Ktilde=0.0):
    """``log f`` for ``f' = -A (f|log f| + Ktilde f)``, ``f(0) = nu``.

    Above 1 the solution decays towards 1 and, when ``Ktilde > 0`` and
    ``(Ktilde + log nu) e^{-T} = Ktilde`` has a root, crosses 1 there and
    continues on the lower branch.
    """
    _check_nu(nu)
    T = np.asarray(_int_fn(intA)(t), dtype=float)
    g0 = math.log(nu)
    if g0 <= 0.0:
        g = _k_term(Ktilde, -np.expm1(T)) + g0 * np.exp(T)
        return _scalar_or_array(g)
    upper = Ktilde * np.expm1(-T) + g0 * np.exp(-T)
    if Ktilde <= 0.0:
        return _scalar_or_array(upper)
    T_cross = math.log1p(g0 / Ktilde)
    lower = Ktilde * (-np.expm1(T - T_cross))
    return _scalar_or_array(np.where(T < T_cross, upper, lower))


def f_logpos(t, intA, nu, Ktilde=0.0):
    return _scalar_or_array(np.exp(log_f_logpos(t, intA, nu, Ktilde)))


def log_f_logneg(t, intLinv, nu, Khat=0.0):
    """``log f`` for ``f' = (f|log f| - Khat f)/Lam``, ``f(0) = nu``.

    ``intLinv(t) = int_0^t 1/Lam``. The solution stays above 1 while
    ``(log nu - Khat) e^T > -Khat``; otherwise it crosses 1 and continues
    on the lower branch, decreasing towards ``exp(-Khat)``.
    """
    _check_nu(nu)
    T = np.asarray(_int_fn(intLinv)(t), dtype=float)
    g0 = math.log(nu)
    if g0 <= 0.0:
        g = _k_term(-Khat, -np.expm1(-T)) + g0 * np.exp(-T)
        return _scalar_or_array(g)
    upper = _k_term(-Khat, np.expm1(T)) + g0 * np.exp(T)
    if g0 >= Khat:
        return _scalar_or_array(upper)
    T_cross = math.log(Khat / (Khat - g0))
    lower = -Khat * (-np.expm1(-(T - T_cross)))
    return _scalar_or_array(np.where(T < T_cross, upper, lower))


def f_logneg(t, intLinv, nu, Khat=0.0):
    with np.errstate(over="ignore"):
        return _scalar_or_array(np.exp(log_f_logneg(t, intLinv, nu, Khat)))


def stays_above_one_logneg(nu, Khat, T):
    """Branch criterion ``(log nu - Khat) e^T > -Khat`` at ``T = int 1/Lam``."""
    return (math.log(nu) - Khat) * math.exp(T) > -Khat


# --------------------------------------------------------------------------
# antiderivatives u(x_n) = int_0^{x_n} f_nu
# --------------------------------------------------------------------------

def _require_constant(value, name):
    if isinstance(value, ScalarFunction):
        if not value.is_constant:
            raise Unavailable(f"closed antiderivative needs constant {name}; use ode_engine.integral_of")
        return value.value
    if callable(value):
        raise Unavailable(f"closed antiderivative needs constant {name}; use ode_engine.integral_of")
    return float(value)


def u_power(x, k, A, nu):
    A = _require_constant(A, "A")
    _check_nu(nu)
    x = np.asarray(x, dtype=float)
    if k == 1:
        u = nu * -np.expm1(-A * x) / A
    elif k == 2:
        u = np.log1p(A * x * nu) / A
    else:
        e = (2.0 - k) / (1.0 - k)
        w = (k - 1.0) * A * x * nu ** (k - 1.0)
        u = nu ** (2.0 - k) / (2.0 - k) * -np.expm1(e * np.log1p(w)) / A
    return _scalar_or_array(u)


def _ei_difference(a, b):
    """``Ei(b) - Ei(a)`` with ``Ei`` evaluated elementwise."""
    return expint_ei(b) - expint_ei(a)


def u_logpos(x, A, nu):
    A = _require_constant(A, "A")
    _check_nu(nu)
    x = np.asarray(x, dtype=float)
    if nu == 1.0:
        return _scalar_or_array(x)
    L = math.log(nu)
    with np.errstate(over="ignore"):
        if nu < 1.0:
            u = _ei_difference(L, np.exp(A * x) * L) / A
        else:
            u = -_ei_difference(L, np.exp(-A * x) * L) / A
    return _scalar_or_array(np.where(x == 0, 0.0, u))


def u_logneg(x, Lam, nu):
    Lam = _require_constant(Lam, "Lam")
    _check_nu(nu)
    x = np.asarray(x, dtype=float)
    if nu == 1.0:
        return _scalar_or_array(x)
    L = math.log(nu)
    with np.errstate(over="ignore"):
        if nu < 1.0:
            u = -Lam * _ei_difference(L, np.exp(-x / Lam) * L)
        else:
            u = Lam * _ei_difference(L, np.exp(x / Lam) * L)
    return _scalar_or_array(np.where(x == 0, 0.0, u))


def u_sista1(x, A, nu):
    """Solution for the decreasing exponent ``p = 1 + M e^{-A x}``."""
    if nu == 1.0:
        return _scalar_or_array(np.asarray(x, dtype=float))
    if nu < 1.0:
        return u_logpos(x, A, nu)
    return u_logneg(x, 1.0 / A, nu)


def u_sista2(x, A, nu):
    """Solution for the increasing exponent ``p = 1 + M e^{A x}``."""
    if nu == 1.0:
        return _scalar_or_array(np.asarray(x, dtype=float))
    if nu < 1.0:
        return u_logneg(x, 1.0 / A, nu)
    return u_logpos(x, A, nu)


def u_antiderivative(family, params, x_n):
    """Closed form of ``int_0^{x_n} f_nu`` for the catalogued families.

    ``params`` is a mapping with ``nu`` and, by family, ``k`` and ``A``
    (power), ``A`` (logpos, sista1, sista2), ``Lam`` (logneg) or ``ratio``
    (zero; the constant ``Lam/lam``, unused since ``f_nu = nu``).
    """
    nu = params["nu"]
    if family == "zero":
        if nu < 0:
            raise ParamError(f"nu must be nonnegative, got {nu}")
        return _scalar_or_array(nu * np.asarray(x_n, dtype=float))
    if family == "power":
        return u_power(x_n, params["k"], params["A"], nu)
    if family == "logpos":
        return u_logpos(x_n, params["A"], nu)
    if family == "logneg":
        return u_logneg(x_n, params["Lam"], nu)
    if family == "sista1":
        return u_sista1(x_n, params["A"], nu)
    if family == "sista2":
        return u_sista2(x_n, params["A"], nu)
    raise Unavailable(f"no closed antiderivative for family {family!r}")
