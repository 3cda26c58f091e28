"""Structure functions bounding a fully nonlinear operator.

A degenerate elliptic operator ``F(x, u, p, X)`` enters the growth theory
only through the one-sided bound

    -F(x, 0, p, X) <= Phi(|x|, |p|) + Lam(x_n) Tr(X+) - lam(x_n) Tr(X-)

so this module stores ``Phi`` (:class:`GrowthProfile`), the pair
``lam``/``Lam`` (:class:`Ellipticity`) and the halfspace geometry
(:class:`Geometry`), together with pointwise tools for checking a concrete
operator against them.
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from ._numerics import ScalarFunction, as_function, is_monotone, log_grid
from .errors import BadEllipticity, NonfiniteIntegrand, ParamError, UnknownFamily

#: smallest argument passed to ``log`` in the log families
LOG_FLOOR = 1e-300

FAMILIES = ("zero", "power", "logpos", "logneg", "custom")


def _s_abs_log_s(s):
    s = np.asarray(s, dtype=float)
    safe = np.maximum(s, LOG_FLOOR)
    out = np.where(s > 0, s * np.abs(np.log(safe)), 0.0)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class GrowthProfile:
    """The nonlinearity ``Phi(t, s)``.

    Use the constructors :meth:`zero`, :meth:`power`, :meth:`logpos`,
    :meth:`logneg` and :meth:`custom` rather than the raw initializer.
    ``C`` is the (nonincreasing) coefficient of the power and log-positive
    families; it may be a float or a callable of ``t``.
    """

    family: str
    sign: str = "nonnegative"
    k: Optional[float] = None
    C: Optional[ScalarFunction] = None
    custom_eval: Optional[Callable] = field(default=None, compare=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ParamError(f"unknown family {self.family!r}")
        if self.sign not in ("nonnegative", "nonpositive"):
            raise ParamError(f"sign must be 'nonnegative' or 'nonpositive', got {self.sign!r}")

    @classmethod
    def zero(cls):
        return cls("zero")

    @classmethod
    def power(cls, k, C=1.0):
        if not k >= 1:
            raise ParamError(f"power family needs k >= 1, got {k}")
        return cls("power", k=float(k), C=as_function(C))

    @classmethod
    def logpos(cls, C=1.0):
        return cls("logpos", C=as_function(C))

    @classmethod
    def logneg(cls):
        return cls("logneg", sign="nonpositive")

    @classmethod
    def custom(cls, func, sign="nonnegative"):
        return cls("custom", sign=sign, custom_eval=func)

    @property
    def has_closed_form(self):
        return self.family != "custom"

    def __call__(self, t, s):
        return self.eval(t, s)

    def eval(self, t, s):
        fam = self.family
        if fam == "zero":
            return np.zeros(np.broadcast(t, s).shape) if np.ndim(t) or np.ndim(s) else 0.0
        if fam == "power":
            return self.C(t) * np.power(s, self.k)
        if fam == "logpos":
            return self.C(t) * _s_abs_log_s(s)
        if fam == "logneg":
            if np.ndim(t):
                s = np.broadcast_to(s, np.broadcast(t, s).shape)
            return -_s_abs_log_s(s)
        return self.custom_eval(t, s)

    def magnitude(self, t, s):
        """``|Phi(t, s)|``; the quantity the Osgood condition is about."""
        return np.abs(self.eval(t, s))

    def validate(self, t_range=(1e-3, 1e3), s_range=(1e-6, 1e3), per_decade=64):
        """Spot-check the invariants of ``Phi`` on a log-spaced grid.

        Returns a dict of booleans; nothing is raised so callers can decide
        how strict to be.
        """
        ts = log_grid(*t_range, per_decade)
        ss = log_grid(*s_range, per_decade)
        T, S = np.meshgrid(ts, ss, indexing="ij")
        vals = np.asarray(self.eval(T, S), dtype=float)
        zero_at_origin = np.allclose(np.asarray(self.eval(ts, np.zeros_like(ts)), dtype=float), 0.0)
        signed = bool(np.all(vals >= 0)) if self.sign == "nonnegative" else bool(np.all(vals <= 0))
        monotone_t = all(is_monotone(vals[:, j], increasing=False) for j in range(len(ss)))
        return {"zero_at_origin": zero_at_origin, "sign": signed, "nonincreasing_in_t": monotone_t}


@dataclass(frozen=True)
class Ellipticity:
    """Ellipticity bounds ``lam`` (nonincreasing) and ``Lam`` (nondecreasing)."""

    lam: ScalarFunction
    Lam: ScalarFunction

    def __init__(self, lam=1.0, Lam=1.0):
        object.__setattr__(self, "lam", as_function(lam))
        object.__setattr__(self, "Lam", as_function(Lam))
        if self.lam.is_constant and self.Lam.is_constant:
            if not 0 < self.lam.value <= self.Lam.value:
                raise BadEllipticity(f"need 0 < lam <= Lam, got lam={self.lam.value}, Lam={self.Lam.value}")

    @property
    def is_constant(self):
        return self.lam.is_constant and self.Lam.is_constant

    def ratio(self):
        """``Lam/lam`` as a :class:`ScalarFunction`."""
        if self.is_constant:
            return ScalarFunction(self.Lam.value / self.lam.value)
        return ScalarFunction(lambda t: self.Lam(t) / self.lam(t))

    def A(self, C):
        """``A = C/lam`` for a coefficient ``C``."""
        C = as_function(C)
        if C.is_constant and self.lam.is_constant:
            return ScalarFunction(C.value / self.lam.value)
        return ScalarFunction(lambda t: C(t) / self.lam(t))

    def Lam_inverse(self):
        if self.Lam.is_constant:
            return ScalarFunction(1.0 / self.Lam.value)
        return ScalarFunction(lambda t: 1.0 / self.Lam(t))

    def validate(self, t_range=(1e-3, 1e3), per_decade=64):
        ts = log_grid(*t_range, per_decade)
        lam = np.asarray(self.lam(ts), dtype=float)
        Lam = np.asarray(self.Lam(ts), dtype=float)
        return {
            "positive": bool(np.all(lam > 0) and np.all(Lam > 0)),
            "ordered": bool(np.all(lam <= Lam * (1 + 1e-12))),
            "lam_nonincreasing": is_monotone(lam, increasing=False),
            "Lam_nondecreasing": is_monotone(Lam, increasing=True),
            "ratio_nonincreasing": is_monotone(lam / Lam, increasing=False),
        }


@dataclass(frozen=True)
class Geometry:
    """Halfspace dimension ``n`` and the segment shift ``gamma(R)``.

    ``K(R) = kappa / gamma(R)`` with ``kappa = n`` unless overridden; the
    barrier argument only needs ``kappa > n - 1``.
    """

    n: int
    gamma: ScalarFunction
    kappa: Optional[float] = None

    def __init__(self, n, gamma, kappa=None):
        if int(n) != n or n < 1:
            raise ParamError(f"dimension must be a positive integer, got {n}")
        object.__setattr__(self, "n", int(n))
        object.__setattr__(self, "gamma", as_function(gamma))
        object.__setattr__(self, "kappa", None if kappa is None else float(kappa))

    def gamma_at(self, R):
        g = float(self.gamma(R))
        if not g > 0:
            raise ParamError(f"gamma(R) must be positive, got {g} at R={R}")
        return g

    def K(self, R):
        return (self.n if self.kappa is None else self.kappa) / self.gamma_at(R)


@dataclass(frozen=True)
class PointEval:
    """A candidate function's jet at one point of the halfspace."""

    x: np.ndarray
    u: float
    grad: np.ndarray
    hess_plus_trace: float
    hess_minus_trace: float

    def __post_init__(self):
        if self.hess_plus_trace < 0 or self.hess_minus_trace < 0:
            raise ParamError("trace parts of X+ and X- must be nonnegative")

    @classmethod
    def from_hessian(cls, x, u, grad, hess):
        eig = np.linalg.eigvalsh(np.asarray(hess, dtype=float))
        return cls(np.asarray(x, float), float(u), np.asarray(grad, float),
                   float(eig[eig > 0].sum()), float(-eig[eig < 0].sum()))


def pucci_minus(eigvals, lam, Lam):
    """``P-(X) = -Lam * sum(e >= 0) - lam * sum(e < 0)`` from eigenvalues."""
    if not 0 < lam <= Lam:
        raise BadEllipticity(f"need 0 < lam <= Lam, got lam={lam}, Lam={Lam}")
    e = np.asarray(eigvals, dtype=float)
    return float(-Lam * e[e >= 0].sum() - lam * e[e < 0].sum())


def pucci_plus(eigvals, lam, Lam):
    if not 0 < lam <= Lam:
        raise BadEllipticity(f"need 0 < lam <= Lam, got lam={lam}, Lam={Lam}")
    e = np.asarray(eigvals, dtype=float)
    return float(-lam * e[e >= 0].sum() - Lam * e[e < 0].sum())


def structure_bound(phi, ell, pt):
    """Right-hand side of the growth assumption at ``pt``."""
    x = np.asarray(pt.x, dtype=float)
    xn = float(x[-1])
    return float(phi(np.linalg.norm(x), np.linalg.norm(pt.grad))
                 + ell.Lam(xn) * pt.hess_plus_trace
                 - ell.lam(xn) * pt.hess_minus_trace)


class Osgood(Enum):
    HOLDS = "Holds"
    FAILS = "Fails"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class OsgoodTolerance:
    """Decision procedure for :func:`osgood_check`.

    The range ``(0, eps]`` is cut at ``eps * 2**-i`` for ``i = 1..halvings``
    and the integral of ``1/|Phi|`` over each dyadic block is computed.
    Over the last ``window`` blocks:

    * block ratios all above ``flat_ratio``: increments do not decay, Holds;
    * ratios constant to ``stable_spread`` and below ``flat_ratio``:
      geometric decay, so the integral converges, Fails;
    * otherwise fit ``block_i ~ i**-q``: ``q <= q_divergent`` Holds,
      ``q >= q_convergent`` Fails, anything between is Inconclusive.

    A running total above ``total_cap`` is also accepted as divergence.
    """

    halvings: int = 40
    window: int = 10
    flat_ratio: float = 1 - 1e-9
    stable_spread: float = 1e-4
    q_divergent: float = 1.1
    q_convergent: float = 1.5
    total_cap: float = 1e6


def osgood_blocks(phi, t, eps, halvings=40):
    """Integrals of ``1/|Phi(t, .)|`` over the dyadic blocks of ``(0, eps]``.

    Block ``i`` covers ``[eps 2**-(i+1), eps 2**-i]``.
    """
    if not eps > 0:
        raise ParamError("eps must be positive")
    g = lambda s: abs(float(phi(t, s)))  # noqa: E731
    probe = log_grid(eps * 2.0 ** -halvings, eps, 64)
    vals = np.array([g(s) for s in probe])
    if np.any(vals == 0):
        raise NonfiniteIntegrand(float(probe[np.argmax(vals == 0)]))

    # substitute s = exp(y): ds/|Phi| = exp(y)/|Phi(exp y)| dy
    integrand = lambda y: np.exp(y) / g(np.exp(y))  # noqa: E731
    edges = np.log(eps) - np.log(2.0) * np.arange(halvings + 1)
    blocks = []
    for hi, lo in zip(edges[:-1], edges[1:]):
        val, _ = integrate.quad(integrand, lo, hi, epsabs=0.0, epsrel=1e-12, limit=200)
        blocks.append(val)
    return np.array(blocks)


def osgood_check(phi, t, eps, tol=OsgoodTolerance()):
    """Heuristic test of ``int_0^eps ds / |Phi(t, s)| = infinity``.

    Returns an :class:`Osgood` verdict; this is a numerical certificate,
    not a proof. Raises :class:`NonfiniteIntegrand` when ``Phi`` vanishes
    somewhere inside the range.
    """
    blocks = osgood_blocks(phi, t, eps, tol.halvings)
    total = float(blocks.sum())
    tail = blocks[-(tol.window + 1):]
    ratios = tail[1:] / tail[:-1]

    if total > tol.total_cap or np.all(ratios > tol.flat_ratio):
        verdict = Osgood.HOLDS
    elif np.ptp(ratios) < tol.stable_spread:
        verdict = Osgood.FAILS
    else:
        i = np.arange(tol.halvings - tol.window, tol.halvings + 1, dtype=float)
        q = -np.polyfit(np.log(i), np.log(tail), 1)[0]
        if q <= tol.q_divergent:
            verdict = Osgood.HOLDS
        elif q >= tol.q_convergent:
            verdict = Osgood.FAILS
        else:
            verdict = Osgood.INCONCLUSIVE
    return verdict


def preset(name):
    """Named (profile, ellipticity) pairs used by scenarios."""
    if name == "pucci-sublinear":
        return GrowthProfile.power(2.0, C=1.0), Ellipticity(1.0, 1.0)
    if name == "px-laplace":
        return GrowthProfile.logpos(C=1.0), Ellipticity(1.0, 1.0)
    raise UnknownFamily(f"no profile preset named {name!r}")
