"""Small numerical helpers shared across modules."""
import numbers

import numpy as np
from scipy import integrate


class ScalarFunction:
    """Callable wrapper that remembers whether it is a constant.

    Closed forms only exist for constant coefficients, so every
    coefficient function passed around the package goes through this.
    """

    __slots__ = ("func", "value")

    def __init__(self, f):
        if isinstance(f, ScalarFunction):
            self.func, self.value = f.func, f.value
        elif isinstance(f, numbers.Real):
            self.value = float(f)
            self.func = None
        elif callable(f):
            self.func, self.value = f, None
        else:
            raise TypeError(f"expected a number or a callable, got {type(f).__name__}")

    @property
    def is_constant(self):
        return self.value is not None

    def __call__(self, t):
        if self.value is not None:
            if np.ndim(t):
                return np.full(np.shape(t), self.value)
            return self.value
        return self.func(t)

    def __repr__(self):
        if self.is_constant:
            return f"ScalarFunction({self.value!r})"
        return f"ScalarFunction({getattr(self.func, '__name__', 'func')})"


def as_function(f):
    return f if isinstance(f, ScalarFunction) else ScalarFunction(f)


def integral_from_zero(f, t, limit=200):
    """Return int_0^t f(s) ds for scalar or array ``t``.

    Constant integrands are integrated exactly; anything else goes to
    adaptive Gauss-Kronrod quadrature.
    """
    f = as_function(f)
    if f.is_constant:
        return f.value * np.asarray(t, dtype=float) if np.ndim(t) else f.value * float(t)
    if np.ndim(t):
        return np.array([integral_from_zero(f, ti, limit) for ti in np.ravel(t)]).reshape(np.shape(t))
    if t == 0.0:
        return 0.0
    val, _ = integrate.quad(f.func, 0.0, float(t), limit=limit, epsabs=0.0, epsrel=1e-12)
    return val


def log_grid(lo, hi, per_decade=64):
    """Log-spaced sample grid with ``per_decade`` points per decade."""
    if not 0 < lo < hi:
        raise ValueError("need 0 < lo < hi")
    n = max(2, int(np.ceil(per_decade * np.log10(hi / lo))) + 1)
    return np.geomspace(lo, hi, n)


def is_monotone(values, increasing, rtol=1e-12):
    v = np.asarray(values, dtype=float)
    d = np.diff(v)
    slack = rtol * np.maximum(np.abs(v[1:]), np.abs(v[:-1])) + 1e-300
    if increasing:
        return bool(np.all(d >= -slack))
    return bool(np.all(d <= slack))


def central_diff(f, x, h, order=1):
    """Five-point central difference of a scalar function of one variable."""
    fm2, fm1, fp1, fp2 = f(x - 2 * h), f(x - h), f(x + h), f(x + 2 * h)
    if order == 1:
        return (fm2 - 8 * fm1 + 8 * fp1 - fp2) / (12 * h)
    if order == 2:
        return (-fm2 + 16 * fm1 - 30 * f(x) + 16 * fp1 - fp2) / (12 * h * h)
    raise ValueError("order must be 1 or 2")


def richardson(f, x, h, order=1):
    """Richardson-extrapolated five-point difference (steps h and h/2)."""
    coarse = central_diff(f, x, h, order)
    fine = central_diff(f, x, h / 2, order)
    return fine + (fine - coarse) / 15.0


def fd_gradient(f, x, h):
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = 1.0
        g[i] = central_diff(lambda s: f(x + s * e), 0.0, h)
    return g


def fd_jacobian(F, x, h):
    """Five-point Jacobian of a vector field; row i holds dF_i/dx."""
    x = np.asarray(x, dtype=float)
    cols = []
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = 1.0
        cols.append(central_diff(lambda s: np.asarray(F(x + s * e)), 0.0, h))
    return np.column_stack(cols)


def loglog_slope(x, y):
    """Least-squares slope of log(y) against log(x)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    slope, _ = np.polyfit(np.log(x), np.log(y), 1)
    return float(slope)
