"""Variable-exponent p(x)-Laplacian: operator, majorant and sharp solutions.

In non-divergence form

    Delta_{p(x)} u = Delta u + (p(x) - 2) Delta_oo u + log|Du| <Dp(x), Du>,

with ``Delta_oo u = <D^2u g, g>`` and ``g = Du/|Du|``. Any p(x)-subharmonic
function satisfies, in the viscosity sense, the Pucci-type inequality

    Lam(x) Tr(D^2u^+) - lam(x) Tr(D^2u^-) + |Dp| |Du| |log|Du|| >= 0,

``lam = min(1, p - 1)``, ``Lam = max(1, p - 1)``, which places the equation
in the ``Phi(t, s) = C(t) s|log s|`` family. The one-dimensional sharp
solutions pair an Ei-based profile with an exponential exponent.
"""
import json
import math
import threading
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import minimize
from scipy.stats import qmc

from . import closed_forms as cf
from ._numerics import central_diff, richardson
from .errors import ParamError, ZeroDp, ZeroGradient
from .profiles import Ellipticity, GrowthProfile

NORM_VARIANTS = ("tail", "slice")
DEFAULT_RADIUS = 1e3


class SupremumWarning(UserWarning):
    """A supremum or infimum over an unbounded set was only sampled."""


def _pos_neg_traces(hess):
    eig = np.linalg.eigvalsh(hess)
    return np.sum(np.clip(eig, 0, None), axis=-1), -np.sum(np.clip(eig, None, 0), axis=-1)


@dataclass(frozen=True, eq=False)
class Exponent:
    """A C^1 exponent ``p: R^n -> (1, oo)`` with its analytic gradient.

    Parameters
    ----------
    n : int
        Dimension; points are arrays of shape ``(n,)``.
    p, Dp : callable
        The exponent and its gradient.
    norm_variant : {"tail", "slice"}
        ``||Dp||_{oo,t}`` as the supremum over ``|y| >= t`` ("tail") or over
        the slice ``y_n = t`` ("slice").
    lam_bound, Lam_bound, norm_bound : callable, optional
        User-declared closed forms for ``p_lam``, ``p_Lam`` and the norm.
        Without them these are found by sampling a region of radius
        ``radius`` and a :class:`SupremumWarning` is issued.
    """

    n: int
    p: Callable
    Dp: Callable
    norm_variant: str = "tail"
    lam_bound: Optional[Callable] = None
    Lam_bound: Optional[Callable] = None
    norm_bound: Optional[Callable] = None
    radius: float = DEFAULT_RADIUS
    n_samples: int = 4096
    _cache: dict = field(default_factory=dict, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def __post_init__(self):
        if self.norm_variant not in NORM_VARIANTS:
            raise ParamError(f"norm_variant must be one of {NORM_VARIANTS}")
        if int(self.n) != self.n or self.n < 1:
            raise ParamError("n must be a positive integer")

    @classmethod
    def quadratic(cls, M0, M, n=None):
        """``p(x) = M0 + sum_{i<n} M_i x_i^2``, independent of ``x_n``."""
        M = np.asarray(M, dtype=float)
        n = M.size + 1 if n is None else n
        if M.size != n - 1:
            raise ParamError("need n - 1 coefficients M_i")
        if not M0 > 1 or np.any(M < 0):
            raise ParamError("need M0 > 1 and M_i >= 0 so that p > 1")
        coef = np.concatenate([M, [0.0]])
        lo = M0 - 1.0
        return cls(n, lambda x: M0 + np.asarray(x)[..., :-1] @ M if n > 1 else np.full(np.shape(x)[:-1], M0),
                   lambda x: 2.0 * coef * np.asarray(x),
                   lam_bound=lambda t: min(1.0, lo),
                   Lam_bound=(lambda t: max(1.0, lo)) if not np.any(M > 0) else (lambda t: math.inf))

    @classmethod
    def exponential_1d(cls, M, rate):
        """``p(x) = 1 + M exp(rate * x_n)`` in one dimension."""
        if not M > 0:
            raise ParamError("need M > 0 so that p > 1")
        return cls(1, lambda x: 1.0 + M * np.exp(rate * np.asarray(x)[..., -1]),
                   lambda x: (rate * M * np.exp(rate * np.asarray(x)[..., -1]))[..., None])

    def __call__(self, x):
        return self.p(np.asarray(x, dtype=float))

    def grad(self, x):
        return np.asarray(self.Dp(np.asarray(x, dtype=float)), dtype=float)

    def local_ellipticity(self, x):
        pm1 = np.asarray(self(x), dtype=float) - 1.0
        return np.minimum(1.0, pm1), np.maximum(1.0, pm1)

    # -- derived one-variable functions -----------------------------------
    def _memo(self, key, compute):
        with self._lock:
            if key not in self._cache:
                self._cache[key] = compute()
            return self._cache[key]

    def _sample_region(self, t, where):
        """Quasi-random points in the truncated region used for sup/inf."""
        r = self.radius
        sob = qmc.Sobol(self.n, scramble=True, seed=12345)
        u = sob.random(self.n_samples)
        y = np.empty_like(u)
        y[:, :-1] = (2 * u[:, :-1] - 1) * r
        if where == "slice":          # y_n = t
            y[:, -1] = t
        else:                           # |y| >= t, y_n >= 0
            y[:, -1] = u[:, -1] * r
            norms = np.linalg.norm(y, axis=1)
            y = y[norms >= t]
        return y

    def _warn(self, what):
        warnings.warn(f"{what} sampled over a region of radius {self.radius:g}; "
                      "the true extremum over the unbounded set is not certified",
                      SupremumWarning, stacklevel=3)

    def _level_extrema(self):
        """Per-level ``min``/``max`` of ``p - 1`` over fixed ``x'`` samples.

        Levels ``y_n`` form a fixed grid of ``[0, radius]``; a query at ``t``
        takes the running extremum up to the first level ``>= t``, so the
        sampled bounds are monotone in ``t`` by construction and err on the
        conservative side.
        """
        def compute():
            levels = np.concatenate([[0.0], np.geomspace(1e-6, self.radius, 511)])
            if self.n > 1:
                sob = qmc.Sobol(self.n - 1, scramble=True, seed=12345)
                xp = (2 * sob.random(max(8, self.n_samples // 16)) - 1) * self.radius
            else:
                xp = np.zeros((1, 0))
            y = np.empty((levels.size, len(xp), self.n))
            y[..., :-1] = xp[None]
            y[..., -1] = levels[:, None]
            vals = np.asarray(self(y), dtype=float) - 1.0
            lo = np.minimum.accumulate(np.minimum(1.0, vals.min(axis=1)))
            hi = np.maximum.accumulate(np.maximum(1.0, vals.max(axis=1)))
            return levels, lo, hi
        return self._memo(("levels",), compute)

    def _level_index(self, levels, t):
        return min(int(np.searchsorted(levels, max(float(t), 0.0), side="left")), levels.size - 1)

    def p_lam(self, t):
        """``inf_{y_n <= t} min(1, p(y) - 1)``."""
        if self.lam_bound is not None:
            return float(self.lam_bound(t))
        self._warn("p_lam")
        levels, lo, _ = self._level_extrema()
        return float(lo[self._level_index(levels, t)])

    def p_Lam(self, t):
        """``sup_{y_n <= t} max(1, p(y) - 1)``."""
        if self.Lam_bound is not None:
            return float(self.Lam_bound(t))
        self._warn("p_Lam")
        levels, _, hi = self._level_extrema()
        return float(hi[self._level_index(levels, t)])

    def norm(self, t):
        """``||Dp||_{oo,t}`` in the configured variant."""
        if self.norm_bound is not None:
            return float(self.norm_bound(t))

        def compute():
            self._warn("||Dp||")
            where = "slice" if self.norm_variant == "slice" else "tail"
            y = self._sample_region(float(t), where)
            if y.size == 0:
                return 0.0
            vals = np.linalg.norm(self.grad(y), axis=-1)
            best = y[np.argmax(vals)]
            # polish the best sample locally; the region constraint is kept
            # by optimising over x' only in the slice variant
            if where == "slice" and self.n > 1:
                res = minimize(lambda z: -np.linalg.norm(self.grad(np.append(z, t))),
                               best[:-1], method="L-BFGS-B",
                               bounds=[(-self.radius, self.radius)] * (self.n - 1))
                return float(max(vals.max(), -res.fun))
            return float(vals.max())
        return self._memo(("norm", self.norm_variant, float(t)), compute)

    def structure(self):
        """``(Phi, ellipticity)`` placing the p(x)-Laplacian in the log family."""
        return GrowthProfile.logpos(C=self.norm), Ellipticity(self.p_lam, self.p_Lam)


def _unit(grad):
    g = np.asarray(grad, dtype=float)
    norm = np.linalg.norm(g, axis=-1)
    if np.any(norm == 0):
        raise ZeroGradient("the operator is undefined where Du = 0")
    return g, norm


def px_operator(expo, x, grad, hess):
    """``Delta u + (p - 2) Delta_oo u + log|Du| <Dp, Du>`` (vectorised)."""
    g, norm = _unit(grad)
    H = np.asarray(hess, dtype=float)
    ghat = g / norm[..., None]
    lap = np.trace(H, axis1=-2, axis2=-1)
    inf_lap = np.einsum("...i,...ij,...j->...", ghat, H, ghat)
    drift = np.log(norm) * np.einsum("...i,...i->...", expo.grad(x), g)
    return lap + (expo(x) - 2.0) * inf_lap + drift


def viscosity_majorant(expo, x, grad, hess):
    """``Lam Tr(H^+) - lam Tr(H^-) + |Dp| |Du| |log|Du||`` (vectorised)."""
    g, norm = _unit(grad)
    lam, Lam = expo.local_ellipticity(x)
    tp, tm = _pos_neg_traces(np.asarray(hess, dtype=float))
    dp = np.linalg.norm(expo.grad(x), axis=-1)
    return Lam * tp - lam * tm + dp * norm * np.abs(np.log(norm))


def divergence_residual(expo, u, x, h=None):
    """``div(|Du|^{p-2} Du)`` at ``x`` by nested five-point differences.

    ``Du`` is itself differenced from ``u``, so the result is a fully
    numerical evaluation of the divergence-form operator.
    """
    x = np.asarray(x, dtype=float)
    # fluxes reach |Du|^{p-1} ~ 1e4 for moderate data; a wider step keeps
    # roundoff below the O(h^4) truncation error
    h = 1e-2 * (1.0 + np.linalg.norm(x)) if h is None else h
    n = x.size
    eye = np.eye(n)

    def Du(y):
        return np.array([central_diff(lambda s: u(y + s * eye[i]), 0.0, h) for i in range(n)])

    def flux(y):
        d = Du(y)
        return np.linalg.norm(d) ** (float(expo(y)) - 2.0) * d

    return float(sum(central_diff(lambda s: flux(x + s * eye[i])[i], 0.0, h) for i in range(n)))


# --------------------------------------------------------------------------
# one-dimensional sharp solutions
# --------------------------------------------------------------------------

ONE_D_FAMILIES = ("LogPosCheck", "LogNegCheck", "Sista1", "Sista2")


@dataclass
class ResidualReport:
    family: str
    params: dict
    max_residual: float
    #: max of |residual|/(1 + |(p-1)u''| + |p'u' log u'|); decides ``passed``
    max_scaled_residual: float
    grid: dict
    passed: bool
    lambda_equality_error: Optional[float] = None
    du_range: tuple = ()

    def to_dict(self):
        return {"family": self.family, "params": self.params,
                "max_residual": self.max_residual,
                "max_scaled_residual": self.max_scaled_residual, "grid": self.grid,
                "pass": self.passed, "lambda_equality_error": self.lambda_equality_error,
                "du_range": list(self.du_range)}

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def sharp_pair(family, nu, M=0.5, A=1.0, Lam=None):
    """The paired ``(u, rate)`` with exponent ``p = 1 + M exp(rate * x)``.

    ``rate < 0`` is a decreasing exponent, ``rate > 0`` an increasing one.
    """
    if not nu > 0:
        raise ParamError(f"nu must be positive, got {nu}")
    if family == "LogPosCheck":
        rate = -A if nu <= 1 else A
        return (lambda x: cf.u_logpos(x, A, nu)), rate
    if family == "LogNegCheck":
        Lam = 1.0 / A if Lam is None else Lam
        rate = 1.0 / Lam if nu < 1 else -1.0 / Lam
        return (lambda x: cf.u_logneg(x, Lam, nu)), rate
    if family == "Sista1":
        return (lambda x: cf.u_sista1(x, A, nu)), -A
    if family == "Sista2":
        return (lambda x: cf.u_sista2(x, A, nu)), A
    raise ParamError(f"unknown one-dimensional family {family!r}; expected one of {ONE_D_FAMILIES}")


def _s_log_s(s):
    """``s log|s|`` extended continuously by 0 at ``s = 0``."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    nz = s != 0
    out[nz] = s[nz] * np.log(np.abs(s[nz]))
    return out


def residual_1d(u, p, dp, x, h=None):
    """``(p - 1) u'' + log|u'| p' u'`` with Richardson-extrapolated
    five-point differences of ``u``.

    Returns ``(residual, scale, u')`` where ``scale`` is the sum of the
    magnitudes of the two terms, for a size-independent comparison.
    """
    x = np.asarray(x, dtype=float)
    if h is None:
        h = 1e-3 * (1.0 + np.abs(x))
        # second pass: resolve the local scale of u' when it varies fast
        du = richardson(u, x, h, order=1)
        d2u = richardson(u, x, h, order=2)
        with np.errstate(divide="ignore", invalid="ignore"):
            rate = np.abs(d2u / du)
        rate = np.where(np.isfinite(rate), rate, 0.0)
        h = np.minimum(h, 1e-2 / np.maximum(rate, 1e-300))
    du = richardson(u, x, h, order=1)
    d2u = richardson(u, x, h, order=2)
    diffusion = (p(x) - 1.0) * d2u
    drift = dp(x) * _s_log_s(du)
    return diffusion + drift, np.abs(diffusion) + np.abs(drift), du


def verify_1d_solution(family, params, grid=(0.01, 5.0, 200), tol=1e-7):
    """Residual of a sharp one-dimensional pair on a grid.

    ``params`` holds ``nu`` and optionally ``M`` (default 0.5), ``A``
    (default 1) and ``Lam`` (log-negative family). For decreasing
    exponents the identity ``min(1, p - 1)/|p'| = lam`` with
    ``lam = 1/|rate|`` is also checked; it needs ``M in (0, 1]``.
    """
    nu = float(params["nu"])
    M = float(params.get("M", 0.5))
    A = float(params.get("A", 1.0))
    Lam = params.get("Lam")
    u, rate = sharp_pair(family, nu, M, A, Lam)
    lo, hi, npts = grid
    x = np.linspace(lo, hi, int(npts))

    def p(s):
        return 1.0 + M * np.exp(rate * s)

    def dp(s):
        return rate * M * np.exp(rate * s)

    res, scale, du = residual_1d(u, p, dp, x)
    lam_err = None
    if rate < 0:
        if not 0 < M <= 1:
            raise ParamError(f"the lambda-bound equality needs M in (0, 1], got {M}")
        lam_err = float(np.max(np.abs(np.minimum(1.0, p(x) - 1.0) / np.abs(dp(x)) - 1.0 / abs(rate))))
    max_res = float(np.max(np.abs(res)))
    rel_res = float(np.max(np.abs(res) / (1.0 + scale)))
    ok = rel_res <= tol and (lam_err is None or lam_err <= 1e-10)
    out_params = {"nu": nu, "M": M, "A": A, "rate": rate}
    if Lam is not None:
        out_params["Lam"] = float(Lam)
    return ResidualReport(family, out_params, max_res, rel_res,
                          {"lo": float(lo), "hi": float(hi), "n": int(npts)}, bool(ok),
                          lam_err, (float(du.min()), float(du.max())))


# --------------------------------------------------------------------------
# sign conditions for the log-negative structure
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class GateResult:
    applicable: bool
    reason: str
    theta: float
    cos_theta: float
    log_grad: float


def cor34_gate(expo, u_field, x, h=None):
    """Check ``|Dp||cos theta| > 0`` and ``cos theta log|Du| <= 0`` at ``x``.

    ``u_field`` is either a callable ``u`` (gradient by differences) or an
    object with a ``grad`` method.
    """
    x = np.asarray(x, dtype=float)
    if hasattr(u_field, "grad"):
        du = np.asarray(u_field.grad(x), dtype=float)
    else:
        h = 1e-4 * (1.0 + np.linalg.norm(x)) if h is None else h
        eye = np.eye(x.size)
        du = np.array([richardson(lambda s: u_field(x + s * eye[i]), 0.0, h) for i in range(x.size)])
    ndu = np.linalg.norm(du)
    if ndu == 0:
        raise ZeroGradient(f"Du = 0 at {x.tolist()}")
    dp = expo.grad(x)
    ndp = np.linalg.norm(dp)
    if ndp == 0:
        raise ZeroDp(f"Dp = 0 at {x.tolist()}")
    cos = float(np.clip(dp @ du / (ndp * ndu), -1.0, 1.0))
    theta = math.acos(cos)
    log_grad = math.log(ndu)
    if abs(cos) <= 1e-12:
        return GateResult(False, "|Dp||cos theta| = 0: Dp is orthogonal to Du", theta, cos, log_grad)
    if cos * log_grad > 0:
        return GateResult(False, "cos theta log|Du| > 0", theta, cos, log_grad)
    return GateResult(True, "", theta, cos, log_grad)
