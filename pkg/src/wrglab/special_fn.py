"""Numerical special functions: Lambert W, regularized incomplete gamma,
standard normal CDF and adaptive Gauss-Kronrod quadrature.

Everything here is scalar, double precision and dependency free apart from
numpy, so the analytic predictors can be audited against independent oracles.
"""

from __future__ import annotations

import heapq
import math
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, NonConvergence

# 1/e split into a double-double so that x + 1/e is exact near the branch point.
_INV_E_HI = 0.36787944117144233
_INV_E_LO = -1.2428753672788363e-17
_EPS = np.finfo(float).eps

# Taylor coefficients of W around the branch point in p = sqrt(2 (e x + 1)).
_BRANCH_SERIES = (
    -1.0,
    1.0,
    -1.0 / 3.0,
    11.0 / 72.0,
    -43.0 / 540.0,
    769.0 / 17280.0,
    -221.0 / 8505.0,
    680863.0 / 43545600.0,
    -1963.0 / 204120.0,
    226287557.0 / 37623398400.0,
)


def _parse_branch(branch) -> int:
    if branch in (0, "principal", "0"):
        return 0
    if branch in (-1, "negative", "-1"):
        return -1
    raise DomainError(f"unknown Lambert W branch {branch!r}")


def lambert_w(x: float, branch=0) -> float:
    """Real Lambert W: the solution y of y * exp(y) = x.

    ``branch=0`` is the principal branch (y >= -1, x >= -1/e);
    ``branch=-1`` is the lower branch (y <= -1, -1/e <= x < 0).
    """
    k = _parse_branch(branch)
    x = float(x)
    if math.isnan(x):
        raise DomainError("Lambert W of NaN")
    shifted = (x + _INV_E_HI) + _INV_E_LO  # x + 1/e without cancellation
    if shifted < -4 * _EPS * _INV_E_HI:
        raise DomainError(f"Lambert W undefined below -1/e (x={x!r})")
    if k == -1 and x >= 0.0:
        raise DomainError(f"lower branch needs -1/e <= x < 0 (x={x!r})")
    if k == 0 and math.isinf(x):
        return math.inf
    if k == -1 and x == 0.0:
        raise DomainError("lower branch diverges at 0")
    if abs(shifted) <= 4 * _EPS * _INV_E_HI:
        return -1.0  # x equals -1/e to within its own rounding
    if x == 0.0:
        return 0.0

    p = math.sqrt(2.0 * math.e * shifted)
    if k == -1:
        p = -p
    if abs(shifted) < 1e-6:
        w = 0.0
        for c in reversed(_BRANCH_SERIES):
            w = w * p + c
        return w

    # starting points
    if abs(p) < 0.5:
        w = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p**3
    elif k == 0:
        if x < 3.0:
            w = math.log1p(x)
        else:
            lx = math.log(x)
            w = lx - math.log(lx)
    else:
        l1 = math.log(-x)
        l2 = math.log(-l1)
        w = l1 - l2 + l2 / l1

    best_w, best_res = w, math.inf
    for _ in range(100):
        ew = math.exp(w)
        f = w * ew - x
        if abs(f) < best_res:
            best_w, best_res = w, abs(f)
        elif abs(f) > 0.0 and abs(f) <= 8 * _EPS * abs(x):
            return best_w  # rounding-level oscillation near the branch point
        if f == 0.0:
            return w
        wp1 = w + 1.0
        denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1)
        w_new = w - f / denom
        if k == 0 and w_new < -1.0:
            w_new = (w - 1.0) / 2.0
        if k == -1 and w_new > -1.0:
            w_new = (w - 1.0) / 2.0
        if abs(w_new - w) <= 4 * _EPS * max(1.0, abs(w_new)):
            return w_new
        w = w_new
    if best_res <= 16 * _EPS * abs(x):
        return best_w
    raise NonConvergence(f"Lambert W Halley iteration stalled at x={x!r}")


def reg_gamma_cdf(shape: float, x: float) -> float:
    """Regularized lower incomplete gamma P(shape, x) = P(Gamma(shape, 1) <= x)."""
    if not shape > 0:
        raise DomainError(f"shape must be positive, got {shape!r}")
    if math.isnan(x):
        raise DomainError("reg_gamma_cdf of NaN")
    if x <= 0.0:
        return 0.0
    if math.isinf(x):
        return 1.0
    if x < shape + 1.0:
        return _gamma_series(shape, x)
    return 1.0 - _gamma_cf(shape, x)


def reg_gamma_sf(shape: float, x: float) -> float:
    """Upper tail Q(shape, x) = 1 - P(shape, x), accurate when P is near one."""
    if not shape > 0:
        raise DomainError(f"shape must be positive, got {shape!r}")
    if x <= 0.0:
        return 1.0
    if math.isinf(x):
        return 0.0
    if x < shape + 1.0:
        return 1.0 - _gamma_series(shape, x)
    return _gamma_cf(shape, x)


def _stirling_tail(a: float) -> float:
    """lgamma(a) - [(a - 1/2) log a - a + log(2 pi) / 2] for a >= 20."""
    r = 1.0 / (a * a)
    return (1.0 / 12 - r * (1.0 / 360 - r * (1.0 / 1260 - r * (1.0 / 1680 - r / 1188)))) / a


def _log_prefactor(a: float, x: float) -> float:
    """log(x^a e^-x / Gamma(a)), arranged to avoid cancellation for large a."""
    if a < 20.0 or x < 0.5 * a:
        return -x + a * math.log(x) - math.lgamma(a)
    t = (x - a) / a
    return a * (math.log1p(t) - t) + 0.5 * math.log(a / (2 * math.pi)) - _stirling_tail(a)


def _gamma_series(a: float, x: float) -> float:
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(100000):
        ap += 1.0
        term *= x / ap
        total += term
        if term < total * 1e-17:
            return min(1.0, total * math.exp(_log_prefactor(a, x)))
    raise NonConvergence(f"incomplete gamma series, a={a}, x={x}")


def _gamma_cf(a: float, x: float) -> float:
    # modified Lentz evaluation of the continued fraction for Q(a, x)
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 100000):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            return h * math.exp(_log_prefactor(a, x))
    raise NonConvergence(f"incomplete gamma continued fraction, a={a}, x={x}")


def gamma_pdf(shape: float, x: float) -> float:
    """Density of Gamma(shape, 1) at x."""
    if x <= 0.0 or math.isinf(x):
        return 0.0
    return math.exp((shape - 1.0) * math.log(x) - x - math.lgamma(shape))


_SQRT2 = math.sqrt(2.0)


def normal_cdf(x):
    """Standard normal CDF; accepts +-inf and numpy arrays."""
    if np.ndim(x):
        return np.array([0.5 * math.erfc(-float(v) / _SQRT2) for v in np.ravel(x)]).reshape(np.shape(x))
    return 0.5 * math.erfc(-float(x) / _SQRT2)


def normal_sf(x):
    """Standard normal upper tail 1 - Phi(x) without cancellation."""
    return normal_cdf(-x) if not np.ndim(x) else normal_cdf(-np.asarray(x))


def normal_interval(a: float, b: float, shift: float = 0.0) -> float:
    """P(a < N < b) for N ~ Normal(shift, 1), a <= b on the extended line."""
    if a > b:
        raise DomainError(f"empty interval ({a}, {b})")
    a -= shift
    b -= shift
    if a >= 0.0:
        return normal_sf(a) - normal_sf(b)
    return normal_cdf(b) - normal_cdf(a)


# Gauss-Kronrod 7/15 abscissae and weights on [-1, 1].
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])
_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_KW = np.concatenate([_WGK[:-1], _WGK[::-1]])
_GW = np.zeros(15)
_GW[[1, 3, 5]] = _WG[:3]
_GW[[13, 11, 9]] = _WG[:3]
_GW[7] = _WG[3]


def _gk15(f, a, b, vectorized):
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    xs = mid + half * _NODES
    if vectorized:
        fx = np.asarray(f(xs), dtype=float)
    else:
        fx = np.array([f(v) for v in xs], dtype=float)
    if not np.all(np.isfinite(fx)):
        raise NonConvergence(f"integrand not finite on [{a}, {b}]")
    k = half * float(_KW @ fx)
    g = half * float(_GW @ fx)
    return k, abs(k - g), abs(half) * float(_KW @ np.abs(fx))


def _substitute(f, lo, hi, singular):
    """Map [0, 1] onto [lo, hi] with a Jacobian that vanishes at singular ends."""
    width = hi - lo
    if singular == "lo":
        return (lambda u: f(lo + width * u * u) * 2.0 * width * u), 0.0, 1.0
    if singular == "hi":
        return (lambda u: f(hi - width * (1 - u) ** 2) * 2.0 * width * (1 - u)), 0.0, 1.0
    if singular == "both":
        return (lambda u: f(lo + width * u * u * (3 - 2 * u)) * 6.0 * width * u * (1 - u)), 0.0, 1.0
    raise DomainError(f"unknown endpoint treatment {singular!r}")


def integrate(
    f: Callable,
    lo: float,
    hi: float,
    rel_tol: float = 1e-10,
    abs_tol: float = 0.0,
    breakpoints: Sequence[float] = (),
    singular: str | None = None,
    vectorized: bool = False,
    max_intervals: int = 5000,
) -> float:
    """Globally adaptive Gauss-Kronrod (7/15) quadrature of f over [lo, hi].

    Stops once the summed error estimate is below
    ``max(abs_tol, rel_tol * |I|)``; raises NonConvergence otherwise.
    ``singular`` in {"lo", "hi", "both"} applies a polynomial substitution
    that tames integrable endpoint singularities.
    """
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise DomainError("integration limits must be finite")
    if hi == lo:
        return 0.0
    if hi < lo:
        return -integrate(f, hi, lo, rel_tol, abs_tol, breakpoints, singular, vectorized, max_intervals)
    if singular is not None:
        g, a0, b0 = _substitute(f, lo, hi, singular)
        return integrate(g, a0, b0, rel_tol, abs_tol, (), None, vectorized, max_intervals)

    cuts = sorted({lo, hi, *(p for p in breakpoints if lo < p < hi)})
    heap = []
    total = 0.0
    total_err = 0.0
    total_abs = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        k, err, kabs = _gk15(f, a, b, vectorized)
        heapq.heappush(heap, (-err, a, b, k, kabs))
        total += k
        total_err += err
        total_abs += kabs
    while True:
        tol = max(abs_tol, rel_tol * abs(total), 50 * _EPS * total_abs)
        if total_err <= tol:
            return total
        if len(heap) >= max_intervals:
            raise NonConvergence(
                f"quadrature did not reach tolerance: value={total!r}, error={total_err!r}"
            )
        neg_err, a, b, k, kabs = heapq.heappop(heap)
        mid = 0.5 * (a + b)
        if not a < mid < b:
            raise NonConvergence("quadrature interval collapsed below machine resolution")
        k1, e1, a1 = _gk15(f, a, mid, vectorized)
        k2, e2, a2 = _gk15(f, mid, b, vectorized)
        heapq.heappush(heap, (-e1, a, mid, k1, a1))
        heapq.heappush(heap, (-e2, mid, b, k2, a2))
        total += k1 + k2 - k
        total_err += e1 + e2 + neg_err
        total_abs += a1 + a2 - kabs
