"""Barrier supersolutions on truncated halfspace domains.

The barrier is the radial profile

    V(x) = int_0^{Xi(x)} f(t) dt,    Xi(x) = |(x', x_n + gamma)| - gamma,

where ``f`` solves the envelope ODE on ``[0, R]`` with ``K = kappa/gamma``.
With ``rho = |(x', x_n + gamma)|`` and ``e = (x', x_n + gamma)/rho`` the
derivatives are

    DV = f(Xi) e,    D^2 V = f'(Xi) e e^T + (f(Xi)/rho) (I - e e^T),

so the Hessian has one radial eigenvalue ``f'(Xi)`` and ``n - 1``
tangential eigenvalues ``f(Xi)/rho``. The domain is
``D(R) = {x_n > 0, Xi(x) < R}``.

A certificate samples ``D(R)`` and evaluates a concrete operator on the
jet of ``V``; it passes when the sampled minimum is positive.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.stats import qmc

from .errors import OutsideDomain, ParamError, SamplePlanEmpty
from .ode_engine import AS_WRITTEN, SEPARABLE, OdeProblem, SolutionCurve, StepControl, rhs, solve
from .profiles import Ellipticity, Geometry, GrowthProfile

__all__ = [
    "BarrierField",
    "OperatorUnderTest",
    "SamplePlan",
    "CertificateReport",
    "xi",
    "barrier_derivatives",
    "verify_supersolution",
    "OPERATOR_TAGS",
]

OPERATOR_TAGS = ("PucciSublinear", "Extremal", "PLaplaceLower", "PxLaplace")

# relative slack when testing membership of the closed domain
_DOMAIN_SLACK = 1e-12


def _shifted(x, gamma):
    """``rho = |(x', x_n + gamma)|`` and the unit vector ``e``."""
    x = np.asarray(x, dtype=float)
    y = x.copy()
    y[..., -1] += gamma
    rho = np.linalg.norm(y, axis=-1)
    return rho, y / rho[..., None]


def xi(geom, R, x):
    """``Xi(x) = |(x', x_n + gamma(R))| - gamma(R)``.

    Accepts a single point (shape ``(n,)``) or a stack ``(m, n)``. On the
    axis ``x' = 0`` the value is ``x_n``; on the curved boundary of
    ``D(R)`` it equals ``R``.
    """
    gamma = geom.gamma_at(R)
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != geom.n:
        raise ParamError(f"expected points of dimension {geom.n}, got shape {x.shape}")
    if math.isinf(gamma):
        # limit gamma -> oo: the segment flattens to the slab {0 < x_n < R}
        v = x[..., -1]
        return v if np.ndim(v) else float(v)
    rho, _ = _shifted(x, gamma)
    # rho - gamma written to avoid cancellation when gamma >> |x|
    y2 = np.sum(x[..., :-1] ** 2, axis=-1) + x[..., -1] * (x[..., -1] + 2.0 * gamma)
    v = y2 / (rho + gamma)
    return v if np.ndim(v) else float(v)


@dataclass(frozen=True, eq=False)
class BarrierField:
    """The barrier ``V_R`` for one envelope problem.

    Parameters
    ----------
    problem : OdeProblem
        Envelope problem; ``problem.geom`` must be set since ``gamma``
        enters the shifted coordinates.
    curve : SolutionCurve
        Solution of ``problem`` on ``[0, R]``.

    Use :meth:`build` to solve and wrap in one step.
    """

    problem: OdeProblem
    curve: SolutionCurve

    def __post_init__(self):
        if self.problem.geom is None:
            raise ParamError("a barrier needs a geometry (dimension and gamma)")
        if self.curve.t_max < self.problem.R * (1 - 1e-12):
            raise ParamError("solution curve does not reach R")

    @classmethod
    def build(cls, phi: GrowthProfile, ell: Ellipticity, geom: Geometry, R: float,
              nu: float = 1.0, variant: str = AS_WRITTEN, K: Optional[float] = None,
              khat_rule: str = "sharp", control: StepControl = StepControl()):
        problem = OdeProblem(phi, ell, geom, nu, R, variant, K, khat_rule)
        return cls(problem, solve(problem, control))

    @property
    def geom(self):
        return self.problem.geom

    @property
    def n(self):
        return self.problem.geom.n

    @property
    def R(self):
        return self.problem.R

    @property
    def nu(self):
        return self.problem.nu

    @property
    def gamma(self):
        return self.geom.gamma_at(self.R)

    @property
    def K(self):
        return self.problem.K_used

    def xi(self, x):
        return xi(self.geom, self.R, x)

    def _check(self, x, strict):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.n:
            raise ParamError(f"expected points of dimension {self.n}, got shape {x.shape}")
        xn = x[..., -1]
        t = np.atleast_1d(self.xi(x))
        bad_n = np.atleast_1d(xn <= 0 if strict else xn < 0)
        bad_r = t > self.R * (1 + _DOMAIN_SLACK)
        if np.any(bad_n) or np.any(bad_r):
            i = int(np.flatnonzero(bad_n | bad_r)[0])
            raise OutsideDomain(f"point {np.atleast_2d(x)[i].tolist()} is outside D(R={self.R})")
        return x

    def f(self, t):
        return self.curve(np.clip(t, 0.0, self.R))

    def fprime(self, t):
        """``f'(t)`` from the interpolant, so that the Hessian is exact for
        the ``V`` actually evaluated; it differs from the ODE right-hand
        side by the interpolation error only."""
        return self.curve.derivative(np.clip(t, 0.0, self.R))

    def ode_residual(self, t):
        """``f' - rhs(t, f)`` along the stored curve."""
        t = np.clip(np.asarray(t, dtype=float), 0.0, self.R)
        fv = np.maximum(np.asarray(self.curve(t), dtype=float), 0.0)
        vec = np.vectorize(lambda s, v: rhs(self.problem, float(s), float(v)), otypes=[float])
        out = np.asarray(self.fprime(t)) - vec(t, fv)
        return out if np.ndim(out) else float(out)

    def V(self, x):
        x = self._check(x, strict=False)
        return self.curve.primitive(np.clip(self.xi(x), 0.0, self.R))

    def grad(self, x):
        """``DV = f(Xi) (x', x_n + gamma)/rho``."""
        x = self._check(x, strict=False)
        _, e = self._unit(x)
        return np.asarray(self.f(self.xi(x)))[..., None] * e

    def _unit(self, x):
        if math.isinf(self.gamma):
            e = np.zeros_like(x)
            e[..., -1] = 1.0
            return np.full(x.shape[:-1], np.inf), e
        return _shifted(x, self.gamma)

    def hessian(self, x):
        """``f'(Xi) e e^T + (f(Xi)/rho)(I - e e^T)``, stacked over points."""
        x = self._check(x, strict=False)
        rho, e = self._unit(x)
        t = self.xi(x)
        fv = np.asarray(self.f(t))
        fp = np.asarray(self.fprime(t))
        P = e[..., :, None] * e[..., None, :]
        eye = np.eye(self.n)
        return fp[..., None, None] * P + (fv / rho)[..., None, None] * (eye - P)

    def trace_split(self, x):
        """``(Tr(D^2V)^+, Tr(D^2V)^-)`` per the sign of ``Phi``.

        As-written problems follow the proof's decomposition: for
        ``Phi >= 0`` the tangential part is positive and the radial part
        ``Phi/lam + K Lam/lam f`` negative; for ``Phi <= 0`` the term
        ``-Phi/Lam`` moves to the positive side. Separable majorants are
        split by eigenvalue sign. Either way ``tr_plus - tr_minus`` is the
        trace of the Hessian.
        """
        x = self._check(x, strict=False)
        rho, _ = self._unit(x)
        t = self.xi(x)
        fv = np.asarray(self.f(t))
        fp = np.asarray(self.fprime(t))
        tang = (self.n - 1) * fv / rho
        if self.problem.variant == SEPARABLE:
            return tang + np.maximum(fp, 0.0), np.maximum(-fp, 0.0)
        if self.problem.phi.sign == "nonnegative":
            return tang, -fp
        lam = np.asarray(self.problem.ell.lam(t), dtype=float)
        Lam = np.asarray(self.problem.ell.Lam(t), dtype=float)
        minus = self.K * Lam / lam * fv
        return tang + fp + minus, minus

    def margin(self, x):
        """Geometric slack ``K - (n - 1)/rho``; positive is good."""
        x = np.asarray(x, dtype=float)
        rho, _ = self._unit(x)
        return self.K - (self.n - 1) / rho


def barrier_derivatives(field: BarrierField, x):
    """Analytic gradient and trace split at an interior point.

    Returns
    -------
    grad : ndarray
    tr_plus, tr_minus : float or ndarray
    """
    field._check(x, strict=True)
    tp, tm = field.trace_split(x)
    return field.grad(x), tp, tm


# ---------------------------------------------------------------- operators

def _pucci_minus_stack(H, lam, Lam):
    e = np.linalg.eigvalsh(H)
    pos = np.where(e > 0, e, 0.0).sum(axis=-1)
    neg = np.where(e < 0, e, 0.0).sum(axis=-1)
    return -Lam * pos - lam * neg


@dataclass(frozen=True, eq=False)
class OperatorUnderTest:
    """A concrete fully nonlinear operator ``F(x, u, p, X)``.

    ``func`` is batched: ``x``, ``grad`` have shape ``(m, n)``, ``u`` shape
    ``(m,)`` and ``hess`` shape ``(m, n, n)``; it returns shape ``(m,)``.
    Supersolutions satisfy ``F > 0``.
    """

    tag: str
    params: dict
    func: Callable = field(repr=False)

    def __post_init__(self):
        if self.tag not in OPERATOR_TAGS:
            raise ParamError(f"unknown operator tag {self.tag!r}")

    def eval(self, x, u, grad, hess):
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        out = self.func(np.atleast_2d(x), np.atleast_1d(np.asarray(u, dtype=float)),
                        np.atleast_2d(grad), np.asarray(hess, dtype=float).reshape(-1, x.shape[-1], x.shape[-1]))
        return float(out[0]) if single else out

    @classmethod
    def pucci_sublinear(cls, lam=1.0, Lam=1.0, C=1.0, k=2.0):
        """``P^-_{lam,Lam}(X) - C |p|^k``."""
        if not 0 < lam <= Lam:
            raise ParamError(f"need 0 < lam <= Lam, got {lam}, {Lam}")

        def func(x, u, p, H):
            return _pucci_minus_stack(H, lam, Lam) - C * np.linalg.norm(p, axis=-1) ** k

        return cls("PucciSublinear", {"lam": lam, "Lam": Lam, "C": C, "k": k}, func)

    @classmethod
    def extremal(cls, phi: GrowthProfile, ell: Ellipticity):
        """``P^-_{lam(x_n),Lam(x_n)}(X) - Phi(|x|, |p|)``, the extremal operator
        for the growth assumption."""

        def func(x, u, p, H):
            xn = x[:, -1]
            lam = np.broadcast_to(np.asarray(ell.lam(xn), dtype=float), xn.shape)
            Lam = np.broadcast_to(np.asarray(ell.Lam(xn), dtype=float), xn.shape)
            return (_pucci_minus_stack(H, lam, Lam)
                    - np.asarray(phi(np.linalg.norm(x, axis=-1), np.linalg.norm(p, axis=-1))))

        return cls("Extremal", {"family": phi.family}, func)

    @classmethod
    def p_laplace_lower(cls, p=3.0, C=0.0, k=1.0):
        """``-Delta u - (p - 2) Delta_oo u - C |Du|^k``.

        This is the nondivergence form of the p-Laplace equation with a
        lower-order term bounded below by ``-C |Du|^{k+p-2}``, after
        division by ``|Du|^{p-2}``. Ellipticity constants are
        ``min(1, p-1)`` and ``max(1, p-1)``.
        """
        if not p > 1:
            raise ParamError(f"p must exceed 1, got {p}")

        def func(x, u, g, H):
            norm = np.linalg.norm(g, axis=-1)
            ghat = g / norm[:, None]
            lap = np.trace(H, axis1=-2, axis2=-1)
            inf_lap = np.einsum("mi,mij,mj->m", ghat, H, ghat)
            return -lap - (p - 2.0) * inf_lap - C * norm ** k

        return cls("PLaplaceLower", {"p": p, "C": C, "k": k}, func)

    @classmethod
    def px_laplace(cls, expo):
        """``-(Delta u + (p - 2) Delta_oo u + log|Du| <Dp, Du>)``."""
        from .pxlaplace import px_operator

        def func(x, u, g, H):
            return -px_operator(expo, x, g, H)

        return cls("PxLaplace", {"exponent": repr(expo)}, func)

    def degenerate_ellipticity_check(self, x, u, grad, hess, n_perturb=16, scale=1.0,
                                     seed=0, tol=1e-9):
        """Spot-check that ``F`` is nonincreasing in ``X``.

        Adds random rank-one positive perturbations ``t v v^T`` to ``hess``
        and returns ``True`` when no evaluation increases by more than
        ``tol`` (relative to the magnitude of the base value).
        """
        rng = np.random.default_rng(seed)
        x = np.asarray(x, dtype=float)
        n = x.shape[-1]
        base = self.eval(x, u, grad, hess)
        for _ in range(n_perturb):
            v = rng.standard_normal(n)
            v /= np.linalg.norm(v)
            t = scale * rng.uniform(0.01, 1.0)
            val = self.eval(x, u, grad, np.asarray(hess) + t * np.outer(v, v))
            if np.any(val > base + tol * (1.0 + np.abs(base))):
                return False
        return True


# ---------------------------------------------------------------- sampling

def _threads(threads):
    if threads is not None:
        return max(1, int(threads))
    env = os.environ.get("GROWTH_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ParamError(f"GROWTH_THREADS must be an integer, got {env!r}") from None
    return 1


def _log2_ceil(m):
    return int(math.ceil(math.log2(m)))


def _sobol_draw(sob, m):
    """Next block of a Sobol stream, keeping the total a power of two."""
    done = sob.num_generated
    if done == 0:
        return sob.random_base2(_log2_ceil(m))
    return sob.random(done)


def _sobol_ball(m, d, radius, seed):
    """``m`` quasi-random points of the ``d``-ball of given radius."""
    if d == 0 or m == 0:
        return np.zeros((min(m, 1), d))
    sob = qmc.Sobol(d, scramble=True, seed=seed)
    out = []
    have = 0
    while have < m:
        u = 2.0 * _sobol_draw(sob, max(64, 2 * m)) - 1.0
        u = u[np.sum(u ** 2, axis=1) < 1.0]
        out.append(u)
        have += len(u)
    return radius * np.concatenate(out)[:m]


@dataclass(frozen=True)
class SamplePlan:
    """Quasi-random sample of ``D(R)`` plus boundary-adjacent layers.

    Interior points come from a scrambled Sobol sequence on the bounding
    box, kept by rejection. Each layer ``x_n = h`` adds the axis point
    ``x' = 0`` (where ``rho`` attains its infimum ``gamma + h``) and
    ``layer_points`` Sobol points of the cross-section.
    """

    n_points: int = 10_000
    layers: tuple = (1e-3, 1e-6)
    layer_points: int = 512
    seed: int = 0
    threads: Optional[int] = None
    explicit: Optional[np.ndarray] = None

    def points(self, field_: BarrierField):
        n, R = field_.n, field_.R
        if self.explicit is not None:
            pts = np.atleast_2d(np.asarray(self.explicit, dtype=float))
            if pts.size == 0:
                raise SamplePlanEmpty("explicit sample plan has no points")
            return field_._check(pts, strict=True)
        gamma = field_.gamma
        # half-width of the cross-section at x_n = 0
        width = R if math.isinf(gamma) else math.sqrt(R * (R + 2.0 * gamma))
        chunks = []
        if self.n_points > 0:
            sob = qmc.Sobol(n, scramble=True, seed=self.seed)
            have = 0
            while have < self.n_points:
                u = _sobol_draw(sob, max(1024, 2 * self.n_points))
                x = np.empty_like(u)
                x[:, :-1] = (2.0 * u[:, :-1] - 1.0) * width
                x[:, -1] = u[:, -1] * R
                x = x[(x[:, -1] > 0) & (field_.xi(x) < R)]
                chunks.append(x)
                have += len(x)
            chunks = [np.concatenate(chunks)[: self.n_points]]
        for j, h in enumerate(self.layers):
            if not 0 < h < R:
                continue
            if math.isinf(gamma):
                r = width
            else:
                r = math.sqrt(max((R + gamma) ** 2 - (h + gamma) ** 2, 0.0))
            m = self.layer_points if n > 1 else 0
            xp = np.vstack([np.zeros((1, n - 1)), _sobol_ball(m, n - 1, r, self.seed + 1 + j)])
            layer = np.hstack([xp, np.full((len(xp), 1), h)])
            chunks.append(layer[field_.xi(layer) < R])
        if not chunks or sum(len(c) for c in chunks) == 0:
            raise SamplePlanEmpty("sample plan produced no points in D(R)")
        return np.concatenate(chunks)


@dataclass
class CertificateReport:
    """Outcome of a sampled supersolution check."""

    min_value: float
    argmin: list
    n_points: int
    margins_summary: dict
    passed: bool
    values: Optional[np.ndarray] = field(default=None, repr=False)
    margins: Optional[np.ndarray] = field(default=None, repr=False)

    def to_dict(self):
        return {
            "min_value": float(self.min_value),
            "argmin": [float(v) for v in self.argmin],
            "n_points": int(self.n_points),
            "margins_summary": self.margins_summary,
            "pass": bool(self.passed),
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def _evaluate_chunk(field_, op, x):
    u = np.atleast_1d(field_.V(x))
    return op.eval(x, u, field_.grad(x), field_.hessian(x))


def verify_supersolution(field_: BarrierField, op: OperatorUnderTest,
                         sampling: SamplePlan = SamplePlan()) -> CertificateReport:
    """Evaluate ``op`` on the jet of the barrier over a sample of ``D(R)``.

    The certificate passes iff every sampled value is positive. The
    report also carries the geometric margin ``K - (n-1)/rho``, whose
    positivity is the sufficient condition behind the construction.
    """
    x = sampling.points(field_)
    threads = _threads(sampling.threads)
    parts = np.array_split(x, max(1, min(threads * 4, len(x) // 256 or 1)))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            values = list(pool.map(lambda c: _evaluate_chunk(field_, op, c), parts))
    else:
        values = [_evaluate_chunk(field_, op, c) for c in parts]
    values = np.concatenate(values)
    bad = ~np.isfinite(values)
    values = np.where(bad, -np.inf, values)
    i = int(np.argmin(values))
    margins = np.atleast_1d(field_.margin(x))
    j = int(np.argmin(margins))
    summary = {
        "min": float(margins[j]),
        "max": float(margins.max()),
        "mean": float(margins.mean()),
        "n_nonpositive": int(np.sum(margins <= 0)),
        "argmin": [float(v) for v in x[j]],
    }
    return CertificateReport(float(values[i]), [float(v) for v in x[i]], int(len(x)),
                             summary, bool(values[i] > 0), values, margins)
