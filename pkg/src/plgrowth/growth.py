"""Limit ratios, choice of ``gamma(R)`` and growth-law classification.

The lower growth estimate for a subsolution is governed by

    liminf_{R -> oo} f_{nu,R}(R) / f_nu(R),

and, when that is positive, by the growth of ``int_0^R f_nu`` (the sharp
one-dimensional solution). This module evaluates the ratio on an
R-sweep, picks the slowest ``gamma(R)`` that keeps it positive for each
catalogued family and classifies the resulting growth.
"""
import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from . import closed_forms as cf
from ._numerics import as_function, loglog_slope
from .errors import ParamError, UnknownFamily
from .ode_engine import AS_WRITTEN, SEPARABLE, OdeProblem, closed_form_log, solve
from .profiles import Geometry

BOUNDED = "Bounded-possible"
UNBOUNDED = "Unbounded"

#: consecutive dyadic block ratios at or above this mean no geometric decay
BLOCK_RATIO_THRESHOLD = 0.999
N_TAIL_BLOCKS = 8
#: last dyadic block is [2^12, 2^13], i.e. T up to 8192 (the 10^4 budget)
LAST_BLOCK = 12

DEFAULT_SWEEP = np.geomspace(1.0, 1e4, 32)
EVIDENCE_SWEEP = np.geomspace(1e2, 1e4, 9)


@dataclass(frozen=True)
class GammaRule:
    """``gamma(R)`` as a closure with a human-readable description."""

    func: Callable[[float], float]
    description: str
    multiplier: float = 1.0

    def __call__(self, R):
        return self.multiplier * float(self.func(R))

    def geometry(self, n):
        return Geometry(n, self)


@dataclass(frozen=True)
class LimitResult:
    R: np.ndarray
    ratio: np.ndarray
    liminf: float
    truncated_at: Optional[float] = None


@dataclass(frozen=True)
class GrowthLaw:
    """Normalising function ``g`` of a growth estimate.

    ``target`` is ``"M"`` when the estimate reads ``liminf M(R)/g(R) > 0``
    and ``"M'"`` when it reads ``liminf M'(R)/g(R) > 0``. Laws are stored
    as ``log g`` because the ``M'`` laws leave the double range quickly.
    """

    tag: str
    target: str
    log_g: Callable = field(repr=False, compare=False)
    exponent: Optional[float] = None
    description: str = ""

    def g(self, R):
        with np.errstate(over="ignore", under="ignore"):
            return np.exp(self.log_g(R))


@dataclass
class GrowthReport:
    family: str
    nu: float
    limit_estimate: float
    gamma_rule: str
    boundedness: str
    growth_law: GrowthLaw
    evidence: list
    block_ratios: list
    tail_estimate: float

    def to_dict(self):
        law = self.growth_law
        return {
            "family": self.family,
            "nu": self.nu,
            "limit_estimate": self.limit_estimate,
            "gamma_rule": self.gamma_rule,
            "boundedness": self.boundedness,
            "growth_law": {"tag": law.tag, "target": law.target,
                           "exponent": law.exponent, "description": law.description},
            "evidence": [[float(R), float(r)] for R, r in self.evidence],
            "block_ratios": [float(r) for r in self.block_ratios],
            "tail_estimate": self.tail_estimate,
        }

    def to_json(self, **kw):
        return json.dumps(_json_safe(self.to_dict()), **kw)

    def to_table(self):
        law = self.growth_law
        exp = "" if law.exponent is None else f" (exponent {law.exponent:.6g})"
        lines = [
            f"family          {self.family}",
            f"nu              {self.nu:g}",
            f"gamma(R)        {self.gamma_rule}",
            f"limit estimate  {self.limit_estimate:.6g}",
            f"boundedness     {self.boundedness}",
            f"growth law      {law.tag}{exp} on {law.target}: {law.description}",
            "",
            f"{'R':>12}  {law.target + '/g(R)':>14}",
        ]
        lines += [f"{R:12.6g}  {r:14.6g}" for R, r in self.evidence]
        return "\n".join(lines)


def _json_safe(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_json_safe(v) for v in obj]
    return obj


def _exp(x):
    """``exp`` that saturates at infinity (an infinite gamma means K = 0)."""
    return math.exp(x) if x < 709.0 else math.inf


def _check_family(phi):
    if phi.family not in ("zero", "power", "logpos", "logneg"):
        raise UnknownFamily(f"no growth theory for family {phi.family!r}")


def _envelope_problem(phi, ell, nu, R, geom=None):
    """The problem whose closed form gives ``f_{nu,R}`` (or ``f_nu``)."""
    variant = AS_WRITTEN if phi.family in ("zero", "custom") else SEPARABLE
    return OdeProblem(phi, ell, geom, nu=nu, R=R, variant=variant)


def _log_envelope(phi, ell, nu, R, geom=None):
    problem = _envelope_problem(phi, ell, nu, R, geom)
    if phi.family == "custom":
        return math.log(solve(problem)(R))
    return float(closed_form_log(problem, R))


def limit_ratio(phi, ell, geom, nu, R_sweep=DEFAULT_SWEEP):
    """Sampled ``f_{nu,R}(R)/f_nu(R)`` with a tail estimate of the liminf.

    The liminf is estimated as the minimum over the last third of the
    sweep. Points where either envelope leaves the double range are
    dropped; ``truncated_at`` records the first such R.
    """
    R_sweep = np.asarray(R_sweep, dtype=float)
    if R_sweep.ndim != 1 or R_sweep.size < 1 or np.any(R_sweep <= 0) or np.any(np.diff(R_sweep) <= 0):
        raise ParamError("R_sweep must be positive and increasing")
    Rs, ratios, truncated = [], [], None
    for R in R_sweep:
        with np.errstate(over="ignore", invalid="ignore"):
            num = _log_envelope(phi, ell, nu, R, geom)
            den = _log_envelope(phi, ell, nu, R, None)
        if not (math.isfinite(num) and math.isfinite(den)):
            truncated = float(R) if truncated is None else truncated
            continue
        Rs.append(float(R))
        ratios.append(math.exp(num - den))
    if not Rs:
        raise ParamError("no point of the sweep is representable in double precision")
    ratios = np.array(ratios)
    tail = ratios[-max(1, len(ratios) // 3):]
    return LimitResult(np.array(Rs), ratios, float(tail.min()), truncated)


def select_gamma(phi, ell, nu=None, n=1, multiplier=1.0):
    """Slowest ``gamma(R)`` keeping the limit ratio positive.

    Constants hidden in the asymptotic conditions are set to 1 and can be
    scaled with ``multiplier``. For the log-negative family with
    ``nu < 1`` the rule also keeps ``Khat = n Lam(R)/gamma(R)`` strictly
    below ``|log nu|``, which is what makes the envelope nondecreasing.
    """
    _check_family(phi)
    fam = phi.family
    if fam == "zero":
        int_ratio = cf.integral_of_coefficient(ell.ratio())
        F = cf._int_fn(int_ratio)
        return GammaRule(lambda R: float(F(R)), "int_0^R Lam/lam", multiplier)
    if fam in ("power", "logpos"):
        F = cf._int_fn(cf.integral_of_coefficient(ell.A(phi.C)))

        def prefactor(R):
            return float(ell.Lam(R)) / float(phi.C(R))

        if fam == "power":
            return GammaRule(lambda R: prefactor(R) * float(F(R)),
                             "Lam(R)/C(R) int_0^R A", multiplier)
        return GammaRule(lambda R: prefactor(R) * _exp(float(F(R))),
                         "Lam(R)/C(R) exp(int_0^R A)", multiplier)
    F = cf._int_fn(cf.integral_of_coefficient(ell.Lam_inverse()))
    if nu is not None and nu < 1:
        c = 1.0 + n / abs(math.log(nu))
        return GammaRule(lambda R: c * float(ell.Lam(R)),
                         f"(1 + n/|log nu|) Lam(R) = {c:.6g} Lam(R)", multiplier)
    return GammaRule(lambda R: float(ell.Lam(R)) * _exp(float(F(R))),
                     "Lam(R) exp(int_0^R 1/Lam)", multiplier)


def _f_nu(phi, ell, nu):
    """Vectorised ``f_nu`` from the closed-form catalogue."""
    problem = _envelope_problem(phi, ell, nu, 1.0)

    def f(t):
        with np.errstate(over="ignore", under="ignore"):
            return np.exp(closed_form_log(problem, t))

    return f


def _u_nu(phi, ell, nu):
    """``x -> int_0^x f_nu``, closed form when the catalogue has one."""
    fam = phi.family
    params = {"nu": nu}
    try:
        if fam == "power":
            params.update(k=phi.k, A=_constant(ell.A(phi.C)))
        elif fam == "logpos":
            params.update(A=_constant(ell.A(phi.C)))
        elif fam == "logneg":
            params.update(Lam=_constant(ell.Lam))
        return lambda x: cf.u_antiderivative(fam, params, x)
    except _NotConstant:
        f = _f_nu(phi, ell, nu)
        return lambda x: integrate.quad(f, 0.0, float(x), limit=400, epsrel=1e-10)[0]


class _NotConstant(Exception):
    pass


def _constant(func):
    func = as_function(func)
    if not func.is_constant:
        raise _NotConstant
    return func.value


def dyadic_blocks(f, last=LAST_BLOCK):
    """``int f`` over ``[0, 1]`` and the blocks ``[2^j, 2^{j+1}]``."""
    edges = np.concatenate([[0.0], 2.0 ** np.arange(0, last + 2)])
    out = []
    with warnings.catch_warnings():
        # underflowing or overflowing envelopes trip quad's roundoff check
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for a, b in zip(edges[:-1], edges[1:]):
            val, _ = integrate.quad(f, a, b, limit=200, epsrel=1e-10)
            out.append(val)
    return np.array(out)


def boundedness(f, last=LAST_BLOCK, n_tail=N_TAIL_BLOCKS, threshold=BLOCK_RATIO_THRESHOLD):
    """Divergence test for ``int_0^oo f`` on dyadic blocks.

    Unbounded when the last ``n_tail`` block ratios all stay at or above
    ``threshold`` (no geometric decay) or the mass is infinite; otherwise
    Bounded-possible. Returns ``(flag, ratios, tail)`` where ``tail`` is the
    geometric extrapolation ``b r/(1 - r)`` of the remaining mass.
    """
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        blocks = dyadic_blocks(f, last)
        ratios = blocks[2:] / blocks[1:-1]
    if not np.all(np.isfinite(blocks)):
        return UNBOUNDED, ratios, math.inf
    tail_r = ratios[-n_tail:]
    if np.all(tail_r >= threshold):
        return UNBOUNDED, ratios, math.inf
    r = float(tail_r[-1]) if np.isfinite(tail_r[-1]) else 0.0
    tail = float(blocks[-1] * r / (1.0 - r)) if r < 1 else math.inf
    return BOUNDED, ratios, tail


def growth_law(phi, ell, nu):
    """Growth law of the sharp solution ``int_0^R f_nu``."""
    _check_family(phi)
    fam = phi.family
    if fam == "zero":
        return GrowthLaw("Linear", "M", np.log, 1.0, "liminf M(R)/R > 0")
    if fam == "power":
        return _power_law(phi, ell, nu)
    if fam == "logpos":
        if nu >= 1:
            return GrowthLaw("Linear", "M", np.log, 1.0, "liminf M(R)/R > 0")
        F = cf._int_fn(cf.integral_of_coefficient(ell.A(phi.C)))
        return GrowthLaw("SubExponentialDecayRate", "M'",
                         lambda R: math.log(nu) * np.exp(F(R)), None,
                         "liminf M'(R)/nu^exp(int_0^R A) > 0; M may be bounded")
    if nu <= 1:
        return GrowthLaw("Linear", "M", np.log, 1.0, "liminf M(R)/R > 0")
    try:
        Lam = _constant(ell.Lam)
    except _NotConstant:
        F = cf._int_fn(cf.integral_of_coefficient(ell.Lam_inverse()))
        return GrowthLaw("ExpIntegral", "M'",
                         lambda R: math.log(nu) * np.exp(F(R)), None,
                         "liminf M'(R)/nu^exp(int_0^R 1/Lam) > 0")
    L = math.log(nu)
    return GrowthLaw("ExpIntegral", "M",
                     lambda R: np.log(cf.expint_ei(np.exp(np.asarray(R) / Lam) * L) - cf.expint_ei(L)), None,
                     "liminf M(R)/(Ei(exp(R/Lam) log nu) - Ei(log nu)) > 0")


def _power_law(phi, ell, nu):
    k = phi.k
    A = ell.A(phi.C)
    F = cf._int_fn(cf.integral_of_coefficient(A))
    if A.is_constant:
        beta = 1.0
    else:
        beta = loglog_slope(EVIDENCE_SWEEP, np.asarray(F(EVIDENCE_SWEEP), dtype=float))
    if k == 1:
        logR = np.log(EVIDENCE_SWEEP)
        vals = np.asarray(F(EVIDENCE_SWEEP), dtype=float)
        if not A.is_constant and np.ptp(vals / logR) <= 0.5 * np.mean(vals / logR):
            return GrowthLaw("Log", "M", lambda R: np.log(np.log(R)), 0.0,
                             "int A ~ log R: liminf M(R)/log(R) > 0")
        return GrowthLaw("SubExponentialDecayRate", "M'",
                         lambda R: -np.asarray(F(R), dtype=float), None,
                         "liminf M'(R)/exp(-int_0^R A) > 0; M may be bounded")
    alpha = beta / (k - 1.0)
    if abs(alpha - 1.0) < 1e-9 or (not A.is_constant and abs(alpha - 1.0) < 1e-2):
        return GrowthLaw("Log", "M", lambda R: np.log(np.log(R)), 0.0, "liminf M(R)/log(R) > 0")
    if alpha < 1:
        return GrowthLaw("Power", "M", lambda R, e=1.0 - alpha: e * np.log(R),
                         1.0 - alpha, f"liminf M(R)/R^{1 - alpha:.6g} > 0")
    return GrowthLaw("Power", "M'", lambda R, e=-alpha: e * np.log(R),
                     -alpha, f"liminf M'(R)/R^{-alpha:.6g} > 0; M may be bounded")


def law_evidence(phi, ell, nu, law, sweep=EVIDENCE_SWEEP):
    """Sampled ``M(R)/g(R)`` or ``M'(R)/g(R)`` for the sharp solution.

    Ratios are formed in log space. Points outside the double range are
    dropped, and if fewer than three survive the sweep falls back to
    ``[1, 100]``, since some laws (the exponential-integral one above all)
    overflow long before ``R = 100``.
    """
    if law.target == "M":
        u = _u_nu(phi, ell, nu)

        def log_value(R):
            return math.log(float(u(R)))
    else:
        problem = _envelope_problem(phi, ell, nu, 1.0)

        def log_value(R):
            return float(closed_form_log(problem, R))

    def sample(points):
        out = []
        for R in points:
            with np.errstate(all="ignore"):
                try:
                    lr = log_value(R) - float(law.log_g(R))
                except (OverflowError, ValueError):
                    continue
            if math.isfinite(lr):
                out.append((float(R), math.exp(lr)))
        return out

    evidence = sample(sweep)
    if len(evidence) < 3:
        evidence = sample(np.geomspace(1.0, 100.0, 9))
    return evidence


def classify(phi, ell, nu, n=2, multiplier=1.0, R_sweep=DEFAULT_SWEEP):
    """Growth report for one of the catalogued families.

    ``n`` enters only through ``K = n/gamma(R)`` in the limit estimate.
    """
    _check_family(phi)
    if not nu > 0:
        raise ParamError(f"nu must be positive, got {nu}")
    rule = select_gamma(phi, ell, nu=nu, n=n, multiplier=multiplier)
    limit = limit_ratio(phi, ell, rule.geometry(n), nu, R_sweep)
    law = growth_law(phi, ell, nu)
    f = _f_nu(phi, ell, nu)
    flag, ratios, tail = boundedness(f)
    evidence = law_evidence(phi, ell, nu, law)
    desc = rule.description if multiplier == 1 else f"{multiplier:g} * {rule.description}"
    return GrowthReport(phi.family, float(nu), limit.liminf, desc, flag, law,
                        evidence, list(ratios), tail)
