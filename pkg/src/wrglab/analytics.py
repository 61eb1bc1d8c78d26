"""Closed-form predictions for weighted recursive graphs.

Limit constants, the label-exponent rate function, the Lambert-W phase
boundary, the limiting degree tail, finite-n joint degree/label laws, their
large-degree asymptotics and the per-class max-degree centerings.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field

from .errors import DomainError, EtaTooLarge, InvalidParameter, PreconditionViolated, UnsupportedClass
from .special_fn import gamma_pdf, lambert_w, normal_sf, reg_gamma_cdf
from .weight_models import WeightClass, WeightModel

DEFAULT_XI = 0.1
DEFAULT_ETA = 0.05


@dataclass(frozen=True)
class LimitConstants:
    theta: float
    mu: float
    sigma2: float
    m: int = 1

    @classmethod
    def from_theta(cls, theta: float, m: int = 1) -> "LimitConstants":
        if not theta > 1.0:
            raise DomainError(f"theta must exceed 1, got {theta}")
        lt = math.log(theta)
        mu = 1.0 - (theta - 1.0) / (theta * lt)
        sigma2 = 1.0 - (theta - 1.0) ** 2 / (theta**2 * lt)
        return cls(theta, mu, sigma2, m)

    def to_dict(self) -> dict:
        return asdict(self)


def limit_constants(model: WeightModel, m: int = 1) -> LimitConstants:
    """theta_m = 1 + E[W]/m, mu_m and sigma^2 evaluated at theta_m."""
    return LimitConstants.from_theta(model.theta(m), m)


def chernoff_rate(u: float) -> float:
    """phi(u) = u - 1 - log u, the Poisson large-deviation rate."""
    if not u > 0:
        raise DomainError(f"phi needs u > 0, got {u}")
    return u - 1.0 - math.log(u)


def f_rate(x: float, constants: LimitConstants) -> float:
    """Exponent f_m(x) governing how many vertices with label near n^x reach the max degree.

    f_m has the unique fixed point mu_m and satisfies f_m(x) > x elsewhere on (0, 1).
    """
    if not 0.0 < x < 1.0:
        raise DomainError(f"x must lie in (0, 1), got {x}")
    th = constants.theta
    lt = math.log(th)
    return chernoff_rate((1.0 - x) * lt / (th - 1.0)) / lt


@dataclass(frozen=True)
class PhaseBoundary:
    eta: float
    w1: float
    w2: float
    eta_max: float
    near_bound: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


def eta_upper_bound(constants: LimitConstants) -> float:
    """Largest admissible eta: 1 - log(theta/e) / W_{-1}(log(theta/e) theta/e)."""
    th = constants.theta
    a = math.log(th / math.e)
    return 1.0 - a / lambert_w(a * th / math.e, -1)


def phase_map(w: float, constants: LimitConstants, eta: float) -> float:
    """(1 - eta)/log(theta) * phi((1 - w) log(theta) / ((1 - eta)(theta - 1)))."""
    th = constants.theta
    lt = math.log(th)
    return (1.0 - eta) / lt * chernoff_rate((1.0 - w) * lt / ((1.0 - eta) * (th - 1.0)))


def phase_gap_derivative(w: float, constants: LimitConstants, eta: float) -> float:
    """Derivative in w of w - phase_map(w)."""
    th = constants.theta
    return 1.0 + 1.0 / (th - 1.0) - (1.0 - eta) / (math.log(th) * (1.0 - w))


def phase_critical_point(constants: LimitConstants, eta: float) -> float:
    """Zero of phase_gap_derivative: 1 - (1 - eta)(theta - 1)/(theta log theta)."""
    th = constants.theta
    return 1.0 - (1.0 - eta) * (th - 1.0) / (th * math.log(th))


def phase_boundary(constants: LimitConstants, eta: float) -> PhaseBoundary:
    """The two fixed points w2 < w1 of phase_map, via both real Lambert W branches."""
    if not 0.0 < eta < 1.0:
        raise DomainError(f"eta must lie in (0, 1), got {eta}")
    th = constants.theta
    lt = math.log(th)
    arg = -math.exp(-eta / (1.0 - eta) * lt - 1.0)
    scale = (1.0 - eta) * (th - 1.0) / (th * lt)
    w1 = 1.0 + scale * lambert_w(arg, 0)
    w2 = 1.0 + scale * lambert_w(arg, -1)
    bound = eta_upper_bound(constants)
    mu = constants.mu
    if not w2 < mu < w1:
        raise EtaTooLarge(f"eta={eta} breaks w2 < mu < w1 (w2={w2}, mu={mu}, w1={w1}); bound {bound}")
    near = bound - eta < 1e-3
    if near:
        warnings.warn(f"eta={eta} is within 1e-3 of its admissible bound {bound}", RuntimeWarning, stacklevel=2)
    return PhaseBoundary(eta, w1, w2, bound, near)


def limiting_degree_tail(model: WeightModel, k: int, m: int = 1) -> float:
    """p_{>=k} = E[(W / (theta - 1 + W))^k], the limit of P(Z_n(v) >= k) for uniform v."""
    if k < 0:
        raise DomainError("k must be nonnegative")
    if k == 0:
        return 1.0
    th1 = model.theta(m) - 1.0

    def h(w):
        return (w / (th1 + w)) ** k

    def dh(w):
        return k * (w / (th1 + w)) ** (k - 1) * th1 / (th1 + w) ** 2

    return model.expect(h, dh)


@dataclass(frozen=True)
class JointLaw:
    """Finite-n predictions for a uniform vertex v: P(Z_n(v) = d, v > ell) and P(Z_n(v) >= d, v > ell).

    ``at_least`` sums the exact-degree law over all degrees >= d;
    ``at_least_upper`` and ``at_least_lower`` are the single-term bounds.
    """

    exact_degree: float
    at_least: float
    at_least_upper: float
    at_least_lower: float
    violations: tuple[str, ...] = field(default_factory=tuple)

    def value(self, mode: str = "at_least") -> float:
        if mode == "exact_degree":
            return self.exact_degree
        if mode == "at_least":
            return self.at_least
        raise InvalidParameter(f"unknown mode {mode!r}")

    def to_dict(self) -> dict:
        out = asdict(self)
        out["violations"] = list(self.violations)
        return out


def joint_law_violations(theta, n, d, ell, xi=DEFAULT_XI, eta=DEFAULT_ETA) -> list[str]:
    out = []
    if d < 1:
        out.append(f"degree d={d} must be >= 1")
    if ell < n**eta:
        out.append(f"ell={ell:.6g} below n^eta={n**eta:.6g}")
    upper = n * math.exp(-(1.0 - xi) * (1.0 - 1.0 / theta) * (d + 1))
    if ell > upper:
        out.append(f"ell={ell:.6g} above n*exp(-(1-xi)(1-1/theta)(d+1))={upper:.6g}")
    if d >= theta / (theta - 1.0) * math.log(n):
        out.append(f"d={d} not below theta/(theta-1) * log n")
    return out


def finite_n_joint_law(
    model: WeightModel,
    n: float,
    d: int,
    ell: float,
    xi: float = DEFAULT_XI,
    eta: float = DEFAULT_ETA,
    strict: bool = True,
    m: int = 1,
) -> JointLaw:
    """Finite-n degree/label law of one uniformly chosen vertex.

    With r = W/(theta-1+W), y = (1 + W/(theta-1)) log(n/ell) and X_j ~ Gamma(j+1, 1):
    exact_degree = E[(1-r) r^d P(X_d < y)], the upper form drops (1-r), the lower
    form uses X_{d + floor(d^(1/4))}, and at_least sums the exact law over j >= d,
    which has the closed form E[r^d P(X_d < y) - e^{-L} P(X_d < y - L)] with L = log(n/ell).
    ``ell = 0`` stands for log(n/ell) = infinity.
    """
    theta = model.theta(m)
    th1 = theta - 1.0
    violations = joint_law_violations(theta, n, d, ell, xi, eta)
    if violations and strict:
        raise PreconditionViolated("; ".join(violations))
    d = int(d)
    if d < 1:
        raise PreconditionViolated("degree must be >= 1")
    big_l = math.inf if ell <= 0 else math.log(n / ell)
    shape_lo = d + math.floor(d**0.25) + 1

    if math.isinf(big_l):
        def r(w):
            return w / (th1 + w)

        exact = model.expect(lambda w: (1 - r(w)) * r(w) ** d,
                             lambda w: th1 / (th1 + w) ** 2 * (d * r(w) ** (d - 1) - (d + 1) * r(w) ** d))
        upper = limiting_degree_tail(model, d, m)
        return JointLaw(exact, upper, upper, upper, tuple(violations))

    slope = big_l / th1  # dy/dw
    e_l = math.exp(-big_l)

    def parts(w):
        r = w / (th1 + w)
        dr = th1 / (th1 + w) ** 2
        y = big_l * (th1 + w) / th1
        return r, dr, y

    def h_upper(w):
        r, _, y = parts(w)
        return r**d * reg_gamma_cdf(d + 1, y)

    def dh_upper(w):
        r, dr, y = parts(w)
        return d * r ** (d - 1) * dr * reg_gamma_cdf(d + 1, y) + r**d * gamma_pdf(d + 1, y) * slope

    def h_lower(w):
        r, _, y = parts(w)
        return r**d * reg_gamma_cdf(shape_lo, y)

    def dh_lower(w):
        r, dr, y = parts(w)
        return d * r ** (d - 1) * dr * reg_gamma_cdf(shape_lo, y) + r**d * gamma_pdf(shape_lo, y) * slope

    def h_exact(w):
        r, _, y = parts(w)
        return (1 - r) * r**d * reg_gamma_cdf(d + 1, y)

    def dh_exact(w):
        r, dr, y = parts(w)
        return (dr * (d * r ** (d - 1) - (d + 1) * r**d) * reg_gamma_cdf(d + 1, y)
                + (1 - r) * r**d * gamma_pdf(d + 1, y) * slope)

    def h_sum(w):
        _, _, y = parts(w)
        return h_upper(w) - e_l * reg_gamma_cdf(d + 1, y - big_l)

    def dh_sum(w):
        _, _, y = parts(w)
        return dh_upper(w) - e_l * gamma_pdf(d + 1, y - big_l) * slope

    return JointLaw(
        exact_degree=model.expect(h_exact, dh_exact),
        at_least=model.expect(h_sum, dh_sum),
        at_least_upper=model.expect(h_upper, dh_upper),
        at_least_lower=model.expect(h_lower, dh_lower),
        violations=tuple(violations),
    )


def label_threshold(theta: float, n: float, d: float, x: float) -> float:
    """ell = n exp(-(1 - 1/theta) d + x (1 - 1/theta) sqrt(d))."""
    k = 1.0 - 1.0 / theta
    return n * math.exp(-k * d + x * k * math.sqrt(d))


def c_theta_tau(theta: float, tau: float, c1: float) -> float:
    """C_{theta,tau,c1} = tau^g / ((1 - g) log theta) * ((1 - 1/theta)/c1)^(1 - g), g = 1/(1 + tau)."""
    g = 1.0 / (1.0 + tau)
    return tau**g / ((1.0 - g) * math.log(theta)) * ((1.0 - 1.0 / theta) / c1) ** (1.0 - g)


def gamma_fraction_c(model, theta: float) -> float:
    """Prefactor C in the large-degree tail of the gamma-fraction class.

    C = exp(+(1 - 1/theta)/(2 c1)) sqrt(pi) c1^(b/2 - 1/4) (1 - 1/theta)^(b/2 + 1/4).
    """
    k = 1.0 - 1.0 / theta
    b, c1 = model.b, model.c1
    return math.exp(k / (2.0 * c1)) * math.sqrt(math.pi) * c1 ** (b / 2 - 0.25) * k ** (b / 2 + 0.25)


def gamma_fraction_mark_mean(model, theta: float) -> float:
    return -1.0 / math.sqrt(model.c1 * theta * (theta - 1.0))


def intensity_coefficient(model: WeightModel, m: int = 1) -> float:
    """Coefficient c in the limiting point-process intensity c theta^-x log(theta) dx."""
    theta = model.theta(m)
    kind = model.kind
    if kind is WeightClass.DEGENERATE:
        return 1.0
    if kind is WeightClass.ATOM:
        return model.q0
    if kind is WeightClass.BETA:
        a, b = model.alpha, model.beta
        return model.z * math.exp(math.lgamma(a + b) - math.lgamma(a)) * (1.0 - 1.0 / theta) ** (-b)
    if kind is WeightClass.GAMMA:
        c = c_theta_tau(theta, 1.0, model.c1)
        return model.z * gamma_fraction_c(model, theta) * theta ** (c * c / 2.0)
    raise UnsupportedClass(f"no point-process limit available for {kind.value}")


def asymptotic_law(model: WeightModel, d: float, x: float, mode: str = "at_least", m: int = 1) -> float:
    """Large-d asymptotic of P(Z_n(v) >= d, v > ell) with ell = label_threshold(theta, n, d, x)."""
    if d < 1:
        raise DomainError("d must be >= 1")
    theta = model.theta(m)
    k = 1.0 - 1.0 / theta
    kind = model.kind
    if kind in (WeightClass.DEGENERATE, WeightClass.ATOM):
        q0 = 1.0 if kind is WeightClass.DEGENERATE else model.q0
        val = q0 * theta ** (-d) * normal_sf(x)
    elif kind is WeightClass.BETA:
        a, b = model.alpha, model.beta
        pref = model.z * math.exp(math.lgamma(a + b) - math.lgamma(a)) * k ** (-b)
        val = pref * d ** (-b) * theta ** (-d) * normal_sf(x)
    elif kind is WeightClass.GAMMA:
        shift = gamma_fraction_mark_mean(model, theta)
        val = (model.z * gamma_fraction_c(model, theta) * d ** (model.b / 2 + 0.25)
               * math.exp(-2.0 * math.sqrt(k * d / model.c1)) * theta ** (-d) * normal_sf(x - shift))
    else:
        raise UnsupportedClass(f"no asymptotic law for {kind.value}")
    if mode == "exact_degree":
        return k * val
    if mode != "at_least":
        raise InvalidParameter(f"unknown mode {mode!r}")
    return val


@dataclass(frozen=True)
class CenteringSequence:
    """Max-degree centering at a given n.

    form "level": center is an integer, degrees are compared through
    degree - center, and eps_n is the dropped fractional part.
    form "scaled": (max - center)/scale converges to ``limit``.
    """

    kind: str
    form: str
    n: float
    center: float
    scale: float
    eps_n: float
    limit: float

    def to_dict(self) -> dict:
        return asdict(self)


def _rav_constants(theta: float, c1: float, tau: float) -> tuple[float, float, float]:
    lt = math.log(theta)
    c1t = c1 ** (-tau)
    big1 = lt ** (tau - 1) * c1t
    big2 = lt ** (tau - 1) * tau * (tau - 1) * c1t
    big3 = ((math.log(lt) / lt) * (tau - 1) * lt - math.log(math.e * c1**tau * (1 - 1 / theta) / tau)) \
        * lt ** (tau - 2) * tau * c1t
    return big1, big2, big3


def rav_constants(model: WeightModel, m: int = 1) -> tuple[float, float, float]:
    """(C1, C2, C3) for the rapidly varying class."""
    if model.kind is not WeightClass.RAV:
        raise UnsupportedClass("C1, C2, C3 are defined for the RaV class only")
    return _rav_constants(model.theta(m), model.c, model.tau)


_DEFAULT_FORM = {
    WeightClass.DEGENERATE: "level",
    WeightClass.ATOM: "level",
    WeightClass.BETA: "level",
    WeightClass.GAMMA: "level",
    WeightClass.PARETO: "scaled",
    WeightClass.RAV: "scaled",
}


def centering(model: WeightModel, n: float, m: int = 1, form: str | None = None) -> CenteringSequence:
    """Per-class max-degree centering sequence evaluated at n."""
    if n < 3:
        raise DomainError("centering needs n >= 3")
    kind = model.kind
    form = form or _DEFAULT_FORM[kind]
    theta = model.theta(m)
    lt = math.log(theta)
    ln = math.log(n) / lt  # log_theta n
    lln = math.log(ln) / lt if ln > 1.0 else 0.0

    def level(raw):
        c = math.floor(raw)
        return CenteringSequence(kind.value, "level", n, float(c), 1.0, raw - c, 0.0)

    def scaled(center, scale, limit):
        return CenteringSequence(kind.value, "scaled", n, center, scale, center - math.floor(center), limit)

    if form not in ("level", "scaled"):
        raise InvalidParameter(f"unknown centering form {form!r}")
    if kind in (WeightClass.DEGENERATE, WeightClass.ATOM):
        if form == "scaled":
            return scaled(ln, ln, 1.0)
        return level(ln)
    if kind is WeightClass.BETA:
        if form == "scaled":
            return scaled(ln, lln, -model.beta)
        return level(ln - model.beta * lln)
    if kind is WeightClass.GAMMA:
        c = c_theta_tau(theta, 1.0, model.c1)
        if form == "scaled":
            return scaled(ln - c * math.sqrt(ln), lln, model.b / 2 + 0.25)
        return level(ln - c * math.sqrt(ln) + (model.b / 2 + 0.25) * lln)
    if kind is WeightClass.PARETO:
        if form == "level":
            raise UnsupportedClass("no integer-level centering for the Pareto-Weibull class")
        return scaled(ln, lln, -(model.alpha - 1.0))
    if kind is WeightClass.RAV:
        if form == "level":
            raise UnsupportedClass("no integer-level centering for the RaV class")
        big1, big2, big3 = _rav_constants(theta, model.c, model.tau)
        tau = model.tau
        llln = math.log(lln) / lt if lln > 1.0 else 0.0
        center = ln - big1 * lln**tau + big2 * lln ** (tau - 1) * llln
        return scaled(center, lln ** (tau - 1), big3)
    raise UnsupportedClass(kind.value)


def max_degree_threshold(model: WeightModel, n: float, m: int = 1) -> tuple[int, int]:
    """(d_low, d_high): d_high is the largest d with n p_{>=d} >= 1 and d_low = d_high + 1."""
    if n < 3:
        raise DomainError("threshold needs n >= 3")
    d = 0
    while n * limiting_degree_tail(model, d + 1, m) >= 1.0:
        d += 1
    return d + 1, d


def prob_max_at_most(model: WeightModel, n: float, d: int, m: int = 1) -> float:
    """Poisson approximation exp(-n p_{>=d+1}) of P(max degree <= d)."""
    if n < 1 or d < 0:
        raise DomainError("need n >= 1 and d >= 0")
    return math.exp(-n * limiting_degree_tail(model, d + 1, m))


@dataclass(frozen=True)
class LimitProcessSpec:
    intensity_coefficient: float
    theta: float
    mark_mean: float
    mark_sd: float = 1.0

    def expected_count(self, j: int, eps: float, a: float = -math.inf, b: float = math.inf,
                       mode: str = "at_least") -> float:
        """Limit mean of the number of points at level >= j (or == j) with marks in (a, b]."""
        from .special_fn import normal_interval

        base = self.intensity_coefficient * self.theta ** (-j + eps) * normal_interval(a, b, self.mark_mean)
        if mode == "exact_level":
            return base * (1.0 - 1.0 / self.theta)
        if mode != "at_least":
            raise InvalidParameter(f"unknown mode {mode!r}")
        return base

    def to_dict(self) -> dict:
        return asdict(self)


def limit_process(model: WeightModel, m: int = 1) -> LimitProcessSpec:
    theta = model.theta(m)
    mark_mean = gamma_fraction_mark_mean(model, theta) if model.kind is WeightClass.GAMMA else 0.0
    return LimitProcessSpec(intensity_coefficient(model, m), theta, mark_mean)


def max_degree_ratio_limit() -> float:
    """max_i Z_n(i) / log_theta n tends to 1 for bounded weights."""
    return 1.0


def prediction_set(model: WeightModel, n: float, m: int = 1, eta: float | None = None,
                   queries=()) -> dict:
    """Everything predictable for (model, m, n) as a JSON-ready mapping.

    ``queries`` is an iterable of (d, ell) pairs for the finite-n law.
    """
    consts = limit_constants(model, m)
    out = {
        "model": model.to_dict(),
        "m": m,
        "n": n,
        "constants": consts.to_dict(),
        "centering": centering(model, n, m).to_dict(),
    }
    if eta is not None:
        out["phase_boundary"] = phase_boundary(consts, eta).to_dict()
    if m == 1:
        d_low, d_high = max_degree_threshold(model, n)
        out["thresholds"] = {"d_low": d_low, "d_high": d_high}
        try:
            out["limit_process"] = limit_process(model).to_dict()
        except UnsupportedClass:
            pass
    results = []
    for d, ell in queries:
        law = finite_n_joint_law(model, n, int(d), float(ell), strict=False, m=m)
        results.append({"d": int(d), "ell": float(ell), **law.to_dict()})
    if results:
        out["finite_n"] = results
    return out
