"""Initial value problems for the envelope functions ``f_{nu,R}`` and ``f_nu``.

For ``Phi >= 0`` the envelope solves

    f' = -Phi(t, f)/lam(t) - K Lam(t)/lam(t) f,    f(0) = nu,

with ``K = n/gamma(R)`` for ``f_{nu,R}`` and ``K = 0`` for ``f_nu``; for
``Phi <= 0`` the first term is divided by ``Lam`` instead. The separable
majorants (constant ``A`` after freezing ``Lam`` and ``C`` at ``R``) are
available as the ``"separable"`` variant.

Integration uses the Dormand-Prince 5(4) pair from :mod:`scipy.integrate`.
The numerical curves serve as an independent check of
:mod:`plgrowth.closed_forms`.
"""
import csv
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline, PchipInterpolator

from . import closed_forms as cf
from ._numerics import as_function
from .errors import DomainError, NonconvergedStep, OutOfRange, ParamError, StiffnessAbort
from .profiles import LOG_FLOOR, Ellipticity, Geometry, GrowthProfile

AS_WRITTEN = "as_written"
SEPARABLE = "separable"
VARIANTS = (AS_WRITTEN, SEPARABLE)

#: solutions above this are treated as blow-up
OVERFLOW = 1e300

#: refinement stops growing the grid beyond this many nodes
MAX_NODES = 200_000

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


@dataclass(frozen=True)
class StepControl:
    rtol: float = 1e-9
    atol: float = 1e-12
    max_step: float = np.inf
    #: budget for cubic Hermite interpolation between stored nodes
    interp_tol: float = 1e-9


@dataclass(frozen=True)
class OdeProblem:
    """One envelope IVP.

    ``geom=None`` selects ``K = 0`` (the ``f_nu`` problem) unless ``K`` is
    given explicitly. ``khat_rule`` picks the log-negative majorant
    coefficient: ``"sharp"`` uses ``K Lam(R)`` and ``"lam"`` uses
    ``K Lam(R)**2/lam(R)``.
    """

    phi: GrowthProfile
    ell: Ellipticity = field(default_factory=Ellipticity)
    geom: Optional[Geometry] = None
    nu: float = 1.0
    R: float = 1.0
    variant: str = AS_WRITTEN
    K: Optional[float] = None
    khat_rule: str = "sharp"

    def __post_init__(self):
        if not self.nu >= 0:
            raise ParamError(f"nu must be nonnegative, got {self.nu}")
        if not self.R > 0:
            raise ParamError(f"R must be positive, got {self.R}")
        if self.variant not in VARIANTS:
            raise ParamError(f"variant must be one of {VARIANTS}")
        if self.variant == SEPARABLE and self.phi.family not in ("power", "logpos", "logneg"):
            raise ParamError(f"no separable majorant for family {self.phi.family!r}")
        if self.khat_rule not in ("sharp", "lam"):
            raise ParamError("khat_rule must be 'sharp' or 'lam'")
        if self.K is not None and self.K < 0:
            raise ParamError("K must be nonnegative")

    @property
    def K_used(self):
        if self.K is not None:
            return float(self.K)
        return 0.0 if self.geom is None else self.geom.K(self.R)

    def coefficient(self):
        """``A = C/lam`` (power, logpos) or ``1/Lam`` (logneg)."""
        fam = self.phi.family
        if fam in ("power", "logpos"):
            return self.ell.A(self.phi.C)
        if fam == "logneg":
            return self.ell.Lam_inverse()
        if fam == "zero":
            return self.ell.ratio()
        raise ParamError(f"family {fam!r} has no coefficient function")

    def separable_constant(self):
        """``Ktilde = K Lam(R)/C(R)`` or ``Khat`` for the log-negative family."""
        K, R = self.K_used, self.R
        fam = self.phi.family
        if fam in ("power", "logpos"):
            C = float(self.phi.C(R))
            if C <= 0:
                raise ParamError("C(R) must be positive for the separable majorant")
            return K * float(self.ell.Lam(R)) / C
        if fam == "logneg":
            Lam = float(self.ell.Lam(R))
            if self.khat_rule == "sharp":
                return K * Lam
            return K * Lam ** 2 / float(self.ell.lam(R))
        raise ParamError(f"family {fam!r} has no separable majorant")


def _abs_log(f):
    return abs(math.log(max(f, LOG_FLOOR)))


def rhs(problem, t, f):
    """Right-hand side of the envelope ODE at ``(t, f)``, ``f >= 0``."""
    if f < 0:
        raise DomainError(f"envelope ODE is posed for f >= 0, got f={f}")
    fam = problem.phi.family
    K = problem.K_used
    if problem.variant == SEPARABLE:
        Kc = problem.separable_constant()
        a = float(problem.coefficient()(t))
        if fam == "power":
            return -a * (f ** problem.phi.k + Kc * f)
        if fam == "logpos":
            return -a * (f * _abs_log(f) + Kc * f)
        return a * (f * _abs_log(f) - Kc * f)
    lam = float(problem.ell.lam(t))
    Lam = float(problem.ell.Lam(t))
    phi = float(problem.phi(t, f))
    first = phi / lam if problem.phi.sign == "nonnegative" else phi / Lam
    return -first - K * Lam / lam * f


@dataclass(frozen=True, eq=False)
class SolutionCurve:
    """Sampled envelope ``{(t_i, f_i)}`` with derivative values for Hermite
    interpolation. Curves read back from CSV have no derivatives and fall
    back to monotone (PCHIP) interpolation."""

    t_grid: np.ndarray
    f_values: np.ndarray
    nu: float
    K_used: float
    method: str = "Numeric"
    df_values: Optional[np.ndarray] = None
    events: tuple = ()
    degenerate: bool = False

    def __post_init__(self):
        t = np.asarray(self.t_grid, dtype=float)
        if t.ndim != 1 or t.size < 2 or np.any(np.diff(t) <= 0):
            raise ParamError("t_grid must be strictly increasing with at least two points")
        if np.any(np.asarray(self.f_values) < 0):
            raise ParamError("envelope values must be nonnegative")

    @property
    def t_max(self):
        return float(self.t_grid[-1])

    @cached_property
    def _log_mode(self):
        return bool(np.all(self.f_values > 0))

    @cached_property
    def _spline(self):
        """Interpolant of ``log f`` for positive curves, of ``f`` otherwise.

        Envelopes can decay or grow double-exponentially; a cubic in
        ``log f`` keeps the relative error uniform where a cubic in ``f``
        would need an enormous grid.
        """
        y = np.log(self.f_values) if self._log_mode else self.f_values
        if self.df_values is None:
            return PchipInterpolator(self.t_grid, y)
        dy = self.df_values / self.f_values if self._log_mode else self.df_values
        return CubicHermiteSpline(self.t_grid, y, dy)

    def __call__(self, t):
        v = self._spline(t)
        if self._log_mode:
            with np.errstate(over="ignore"):
                v = np.exp(v)
        return v if np.ndim(v) else float(v)

    def derivative(self, t):
        v = self._spline.derivative()(t)
        if self._log_mode:
            v = v * np.exp(self._spline(t))
        return v if np.ndim(v) else float(v)

    @cached_property
    def _cumulative(self):
        t = self.t_grid
        return np.concatenate([[0.0], np.cumsum(self._gauss(t[:-1], t[1:]))])

    def _gauss(self, a, b):
        if not self._log_mode:
            anti = self._spline.antiderivative()
            return anti(b) - anti(a)
        half, mid = 0.5 * (b - a), 0.5 * (b + a)
        s = mid[..., None] + half[..., None] * _GL_NODES
        return half * (self(s) @ _GL_WEIGHTS)

    def primitive(self, t):
        """``int_{t_0}^t f`` without range checks; see :func:`integral_of`.

        Piecewise: exact node-to-node sums plus one partial interval, each
        piece integrated with 8-point Gauss-Legendre (exactly, when the
        interpolant is a cubic in ``f``).
        """
        tt = np.atleast_1d(np.asarray(t, dtype=float))
        idx = np.clip(np.searchsorted(self.t_grid, tt, side="right") - 1, 0, self.t_grid.size - 2)
        v = self._cumulative[idx] + self._gauss(self.t_grid[idx], tt)
        return v.reshape(np.shape(t)) if np.ndim(t) else float(v[0])

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "f", "method", "nu", "K"])
            nu, K = f"{self.nu:.17g}", f"{self.K_used:.17g}"
            for t, f in zip(self.t_grid, self.f_values):
                w.writerow([f"{t:.17g}", f"{f:.17g}", self.method, nu, K])

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        if not rows:
            raise ParamError(f"{path}: no data rows")
        return cls(
            t_grid=np.array([float(r["t"]) for r in rows]),
            f_values=np.array([float(r["f"]) for r in rows]),
            nu=float(rows[0]["nu"]),
            K_used=float(rows[0]["K"]),
            method=rows[0]["method"],
        )


def log_rhs(problem, t, g):
    """Right-hand side for ``g = log f``, i.e. ``rhs(t, f)/f`` at ``f = e^g``.

    Available for every family except ``custom``; the quotient
    ``Phi(t, s)/s`` is formed analytically so that neither tiny nor huge
    ``f`` is ever materialized.
    """
    fam = problem.phi.family
    if fam == "custom":
        raise ParamError("log-space right-hand side needs a catalogued family")
    if problem.variant == SEPARABLE:
        Kc = problem.separable_constant()
        a = float(problem.coefficient()(t))
        if fam == "power":
            return -a * (math.exp((problem.phi.k - 1.0) * g) + Kc)
        if fam == "logpos":
            return -a * (abs(g) + Kc)
        return a * (abs(g) - Kc)
    lam = float(problem.ell.lam(t))
    Lam = float(problem.ell.Lam(t))
    if fam == "zero":
        q = 0.0
    elif fam == "power":
        q = float(problem.phi.C(t)) * math.exp((problem.phi.k - 1.0) * g)
    elif fam == "logpos":
        q = float(problem.phi.C(t)) * abs(g)
    else:
        q = -abs(g)
    first = q / lam if problem.phi.sign == "nonnegative" else q / Lam
    return -first - problem.K_used * Lam / lam


def solve(problem, control=StepControl()):
    """Integrate the envelope ODE on ``[0, R]``.

    For the catalogued families with ``nu > 0`` the solver works with
    ``g = log f``. Positivity is then automatic (these families satisfy
    the Osgood condition), relative accuracy in ``f`` is uniform even
    when ``f`` decays or grows double-exponentially, and crossings of
    ``f = 1`` are the zeros of ``g``. Custom profiles are integrated in
    ``f`` directly with stage values clamped at 0; when the solution
    reaches 0 (possible without Osgood) it stays there, provided
    ``Phi(t, 0) = 0``.
    """
    fam = problem.phi.family
    K = problem.K_used
    if problem.nu == 0:
        t = np.array([0.0, problem.R])
        return SolutionCurve(t, np.zeros(2), 0.0, K, "Numeric", np.zeros(2))

    log_space = fam != "custom"
    if log_space:
        def fun(t, y):
            return [log_rhs(problem, t, y[0])]

        y0, ceiling = math.log(problem.nu), math.log(OVERFLOW)
    else:
        def fun(t, y):
            return [rhs(problem, t, max(y[0], 0.0))]

        y0, ceiling = float(problem.nu), OVERFLOW

    def blow_up(t, y):
        return y[0] - ceiling

    def extinct(t, y):
        return y[0]

    blow_up.terminal = True
    extinct.terminal = True
    extinct.direction = -1
    events = [blow_up]
    if fam in ("logpos", "logneg"):
        events.append(lambda t, y: y[0])
    elif not log_space:
        # Without Osgood, f can reach 0 in finite time; 0 is absorbing.
        events.append(extinct)

    sol = solve_ivp(fun, (0.0, problem.R), [y0], method="RK45",
                    rtol=control.rtol, atol=control.atol, max_step=control.max_step,
                    dense_output=True, events=events)
    if sol.status == -1:
        if "step size" in sol.message:
            raise StiffnessAbort(float(sol.t[-1]), sol.message)
        raise NonconvergedStep(sol.message)
    if sol.status == 1 and sol.t_events[0].size:
        raise NonconvergedStep(f"solution exceeded {OVERFLOW:g} at t={sol.t_events[0][0]:.6g}")

    t = np.asarray(sol.t, dtype=float)
    y = np.asarray(sol.y[0], dtype=float)
    if log_space:
        def dense(s):
            return np.exp(sol.sol(s)[0])

        def deriv(ti, fi):
            return fi * log_rhs(problem, ti, math.log(fi)) if fi > 0 else 0.0

        degenerate = bool(np.any(y < math.log(LOG_FLOOR))) and fam in ("logpos", "logneg")
        f = np.exp(y)
    else:
        def dense(s):
            return np.maximum(sol.sol(s)[0], 0.0)

        def deriv(ti, fi):
            return rhs(problem, ti, fi)

        if np.any(y < -control.atol):
            raise NonconvergedStep(f"solution undershot zero by {-y.min():.3g} at t={t[np.argmin(y)]:.6g}")
        degenerate = False
        f = np.maximum(y, 0.0)
    t, f, df = _refine(dense, deriv, t, f, control)
    crossings = ()
    if fam in ("logpos", "logneg"):
        crossings = tuple(float(x) for x in sol.t_events[1])
    elif not log_space and sol.status == 1:
        if float(problem.phi(t[-1], 0.0)) != 0.0:
            raise NonconvergedStep(f"solution reached 0 at t={t[-1]:.6g} but Phi(t, 0) != 0")
        crossings = (float(t[-1]),)
        f[-1], df[-1] = 0.0, 0.0
        tail = np.linspace(t[-1], problem.R, 3)[1:]
        t = np.concatenate([t, tail])
        f = np.concatenate([f, np.zeros(2)])
        df = np.concatenate([df, np.zeros(2)])
    return SolutionCurve(t, f, float(problem.nu), K, "Numeric", df, crossings, degenerate)


def _refine(dense, deriv, t, f, control, max_rounds=20):
    """Insert nodes until the interpolant tracks the dense output."""
    for _ in range(max_rounds):
        df = np.array([deriv(ti, fi) for ti, fi in zip(t, f)])
        curve = SolutionCurve(t, f, 0.0, 0.0, df_values=df)
        mid = 0.5 * (t[1:] + t[:-1])
        ref = dense(mid)
        err = np.abs(curve(mid) - ref)
        bad = err > np.maximum(control.interp_tol * np.abs(ref), control.atol)
        if not bad.any() or t.size > MAX_NODES:
            break
        t = np.concatenate([t, mid[bad]])
        f = np.concatenate([f, ref[bad]])
        order = np.argsort(t)
        t, f = t[order], f[order]
    else:
        df = np.array([deriv(ti, fi) for ti, fi in zip(t, f)])
    return t, f, df


def integral_of(curve, upto):
    """``int_0^upto f`` by exact integration of the Hermite interpolant."""
    upto_arr = np.asarray(upto, dtype=float)
    lo, hi = float(curve.t_grid[0]), curve.t_max
    slack = 1e-12 * max(1.0, hi)
    if np.any(upto_arr < lo - slack) or np.any(upto_arr > hi + slack):
        raise OutOfRange(f"upto must lie in [{lo}, {hi}], got {upto}")
    return curve.primitive(np.clip(upto_arr, lo, hi)) if upto_arr.ndim else curve.primitive(min(max(float(upto), lo), hi))


def closed_form_log(problem, t):
    """``log f`` from the closed-form catalogue, when one applies.

    The separable variant always has one; the as-written problem has one
    for ``Phi = 0`` and, with constant coefficients, for the other
    families (where it coincides with a separable majorant).
    """
    fam = problem.phi.family
    t = np.asarray(t, dtype=float)
    nu, K = problem.nu, problem.K_used
    if fam == "custom":
        raise ParamError("custom profiles have no closed form")
    if fam == "zero":
        ratio = problem.ell.ratio()
        T = cf._int_fn(cf.integral_of_coefficient(ratio))(t)
        return math.log(nu) - K * np.asarray(T, dtype=float)

    if problem.variant == AS_WRITTEN:
        coeffs = [problem.ell.lam, problem.ell.Lam] + ([problem.phi.C] if fam != "logneg" else [])
        if not all(c.is_constant for c in coeffs):
            raise ParamError("as-written problem has a closed form only for constant coefficients")
        lam, Lam = problem.ell.lam.value, problem.ell.Lam.value
        if fam == "logneg":
            Kc = K * Lam ** 2 / lam
        else:
            Kc = K * Lam / problem.phi.C.value
    else:
        Kc = problem.separable_constant()

    intA = cf.integral_of_coefficient(problem.coefficient())
    if fam == "power":
        with np.errstate(divide="ignore"):
            return np.log(cf.f_power(t, problem.phi.k, intA, nu, Kc))
    if fam == "logpos":
        return cf.log_f_logpos(t, intA, nu, Kc)
    return cf.log_f_logneg(t, intA, nu, Kc)


def closed_form(problem, t):
    with np.errstate(over="ignore"):
        v = np.exp(closed_form_log(problem, t))
    return v if np.ndim(v) else float(v)


def closed_form_curve(problem, t_grid):
    t = np.asarray(t_grid, dtype=float)
    f = np.asarray(closed_form(problem, t), dtype=float)
    df = np.array([rhs(problem, ti, fi) for ti, fi in zip(t, f)])
    return SolutionCurve(t, f, float(problem.nu), problem.K_used, "ClosedForm", df)
