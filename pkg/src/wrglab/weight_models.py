"""Vertex-weight distributions on (0, 1] with essential supremum 1.

Each class exposes its exact tail P(W >= x), a vectorized sampler driven by a
numpy Generator, the support floor w_star and the mean E[W].
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from enum import Enum
from functools import cached_property
from typing import Callable, Mapping

import numpy as np
from scipy.special import betainc

from .errors import InvalidParameter
from .special_fn import integrate


class WeightClass(str, Enum):
    ATOM = "AtomMixture"
    BETA = "BetaConditioned"
    GAMMA = "GammaFraction"
    PARETO = "ParetoWeibull"
    RAV = "RaVCanonical"
    DEGENERATE = "Degenerate"


def _real(params: Mapping, key: str, default=None) -> float:
    if key not in params:
        if default is None:
            raise InvalidParameter(f"missing parameter {key!r}")
        return float(default)
    value = params[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise InvalidParameter(f"parameter {key!r} must be a real number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise InvalidParameter(f"parameter {key!r} must be finite")
    return value


class WeightModel(ABC):
    """Common interface. Instances are immutable after construction."""

    kind: WeightClass
    _keys: tuple[str, ...] = ()

    @property
    @abstractmethod
    def w_star(self) -> float:
        """Lower end of the support."""

    @abstractmethod
    def tail(self, x):
        """P(W >= x), vectorized over x."""

    @abstractmethod
    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw ``size`` i.i.d. weights."""

    @property
    @abstractmethod
    def params(self) -> dict:
        ...

    @cached_property
    def mean_w(self) -> float:
        # E[W] = integral over [0, 1] of P(W >= x)
        return self.w_star + integrate(self.tail, self.w_star, 1.0, vectorized=True)

    def theta(self, m: int = 1) -> float:
        if m < 1:
            raise InvalidParameter("out-degree m must be >= 1")
        return 1.0 + self.mean_w / m

    def expect(self, h: Callable[[float], float], dh: Callable[[float], float], rel_tol: float = 1e-10) -> float:
        """E[h(W)] for smooth h, using E h(W) = h(w*) + int_{w*}^1 h'(x) P(W >= x) dx."""
        tail = self.tail
        return h(self.w_star) + integrate(lambda x: dh(x) * float(tail(x)), self.w_star, 1.0, rel_tol=rel_tol)

    def to_dict(self) -> dict:
        return {"class": self.kind.value, "params": self.params}

    def __repr__(self) -> str:
        inner = ", ".join(f"{k}={v!r}" for k, v in self.params.items())
        return f"{type(self).__name__}({inner})"

    def __eq__(self, other) -> bool:
        return isinstance(other, WeightModel) and self.to_dict() == other.to_dict()

    def __hash__(self) -> int:
        return hash((self.kind, tuple(sorted(self.params.items()))))


class Degenerate(WeightModel):
    """W = 1 almost surely: the random recursive tree."""

    kind = WeightClass.DEGENERATE

    @property
    def w_star(self) -> float:
        return 1.0

    @property
    def params(self) -> dict:
        return {}

    @cached_property
    def mean_w(self) -> float:
        return 1.0

    def tail(self, x):
        return np.where(np.asarray(x) <= 1.0, 1.0, 0.0)[()]

    def sample(self, rng, size):
        return np.ones(size)

    def expect(self, h, dh, rel_tol=1e-10):
        return h(1.0)


class AtomMixture(WeightModel):
    """Mass q0 at 1; the remaining 1 - q0 is uniform(a, b) or a point mass at a."""

    kind = WeightClass.ATOM

    def __init__(self, q0: float, base: str = "uniform", a: float | None = None, b: float | None = None):
        if not 0.0 < q0 <= 1.0:
            raise InvalidParameter(f"q0 must lie in (0, 1], got {q0}")
        if base not in ("uniform", "point"):
            raise InvalidParameter(f"unsupported base {base!r}")
        self.q0 = float(q0)
        self.base = base
        if q0 == 1.0 and a is None:
            a = b = 1.0
        if a is None:
            raise InvalidParameter("base needs a location a")
        if base == "point":
            if b is not None and b != a:
                raise InvalidParameter("point base takes a single location a")
            b = a
        if b is None:
            raise InvalidParameter("uniform base needs a and b")
        if q0 < 1.0 and not 0.0 < a <= b < 1.0:
            raise InvalidParameter(f"base support must satisfy 0 < a <= b < 1, got ({a}, {b})")
        self.a, self.b = float(a), float(b)

    @classmethod
    def from_params(cls, p: Mapping):
        unknown = set(p) - {"q0", "base", "a", "b"}
        if unknown:
            raise InvalidParameter(f"unknown AtomMixture parameters {sorted(unknown)}")
        base = p.get("base", "uniform")
        a = _real(p, "a") if "a" in p else None
        b = _real(p, "b") if "b" in p else None
        return cls(_real(p, "q0"), base, a, b)

    @property
    def params(self) -> dict:
        out = {"q0": self.q0, "base": self.base, "a": self.a}
        if self.base == "uniform":
            out["b"] = self.b
        return out

    @property
    def w_star(self) -> float:
        return self.a if self.q0 < 1.0 else 1.0

    @cached_property
    def mean_w(self) -> float:
        return self.q0 + (1.0 - self.q0) * 0.5 * (self.a + self.b)

    def _base_tail(self, x):
        x = np.asarray(x, dtype=float)
        if self.b == self.a:
            return np.where(x <= self.a, 1.0, 0.0)
        return np.clip((self.b - x) / (self.b - self.a), 0.0, 1.0)

    def tail(self, x):
        x = np.asarray(x, dtype=float)
        out = self.q0 * (x <= 1.0) + (1.0 - self.q0) * self._base_tail(x)
        return np.asarray(out)[()]

    def sample(self, rng, size):
        u = rng.random(size)
        v = rng.random(size)
        base = self.a + (self.b - self.a) * v
        return np.where(u < self.q0, 1.0, base)

    def expect(self, h, dh, rel_tol=1e-10):
        if self.q0 == 1.0:
            return h(1.0)
        if self.a == self.b:
            rest = h(self.a)
        else:
            rest = integrate(h, self.a, self.b, rel_tol=rel_tol) / (self.b - self.a)
        return self.q0 * h(1.0) + (1.0 - self.q0) * rest


class BetaConditioned(WeightModel):
    """Beta(alpha, beta) conditioned on [w_star, 1)."""

    kind = WeightClass.BETA

    def __init__(self, alpha: float, beta: float, w_star: float = 0.0):
        if not (alpha > 0 and beta > 0):
            raise InvalidParameter("alpha and beta must be positive")
        if not 0.0 <= w_star < 1.0:
            raise InvalidParameter(f"w_star must lie in [0, 1), got {w_star}")
        self.alpha, self.beta, self._w_star = float(alpha), float(beta), float(w_star)
        upper = float(betainc(self.alpha, self.beta, 1.0) - betainc(self.alpha, self.beta, self._w_star))
        if upper <= 0.0:
            raise InvalidParameter("conditioning set has zero Beta mass")
        self.z = 1.0 / upper

    @classmethod
    def from_params(cls, p: Mapping):
        unknown = set(p) - {"alpha", "beta", "w_star"}
        if unknown:
            raise InvalidParameter(f"unknown BetaConditioned parameters {sorted(unknown)}")
        return cls(_real(p, "alpha"), _real(p, "beta"), _real(p, "w_star", 0.0))

    @property
    def params(self) -> dict:
        return {"alpha": self.alpha, "beta": self.beta, "w_star": self._w_star}

    @property
    def w_star(self) -> float:
        return self._w_star

    def tail(self, x):
        x = np.asarray(x, dtype=float)
        xc = np.clip(x, self._w_star, 1.0)
        # 1 - I_x(a, b) equals I_{1-x}(b, a), which keeps precision near x = 1
        upper = betainc(self.beta, self.alpha, 1.0 - xc)
        out = np.where(x <= self._w_star, 1.0, self.z * upper)
        return np.asarray(np.where(x > 1.0, 0.0, out))[()]

    def sample(self, rng, size):
        out = np.empty(size)
        filled = 0
        while filled < size:
            need = size - filled
            batch = max(16, int(need * self.z * 1.1) + 16)
            draws = rng.beta(self.alpha, self.beta, batch)
            draws = draws[(draws >= self._w_star) & (draws > 0.0)]
            take = min(need, draws.size)
            out[filled:filled + take] = draws[:take]
            filled += take
        return out


class GammaFraction(WeightModel):
    """Tail P(W >= x) = Z (1 - x)^(-b) exp(-x / (c1 (1 - x))) on [w_star, 1).

    Equivalently (1 - W)^(-1) has tail proportional to y^b exp(-y / c1).
    """

    kind = WeightClass.GAMMA

    def __init__(self, b: float, c1: float, w_star: float = 0.0):
        if not c1 > 0:
            raise InvalidParameter("c1 must be positive")
        if not 0.0 <= w_star < 1.0:
            raise InvalidParameter(f"w_star must lie in [0, 1), got {w_star}")
        if 1.0 / (1.0 - w_star) < b * c1:
            raise InvalidParameter(
                f"tail is not monotone on [w_star, 1): need 1/(1 - w_star) >= b*c1, got "
                f"{1.0 / (1.0 - w_star):.6g} < {b * c1:.6g}"
            )
        self.b, self.c1, self._w_star = float(b), float(c1), float(w_star)
        self.log_z = -self._log_shape(self._w_star)
        self.z = math.exp(self.log_z)

    @classmethod
    def from_params(cls, p: Mapping):
        unknown = set(p) - {"b", "c1", "w_star"}
        if unknown:
            raise InvalidParameter(f"unknown GammaFraction parameters {sorted(unknown)}")
        return cls(_real(p, "b"), _real(p, "c1"), _real(p, "w_star", 0.0))

    @property
    def params(self) -> dict:
        return {"b": self.b, "c1": self.c1, "w_star": self._w_star}

    @property
    def w_star(self) -> float:
        return self._w_star

    def _log_shape(self, x):
        s = 1.0 - np.asarray(x, dtype=float)
        return -self.b * np.log(s) - (1.0 - s) / (self.c1 * s)

    def tail(self, x):
        x = np.asarray(x, dtype=float)
        inside = (x > self._w_star) & (x < 1.0)
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            val = np.exp(self.log_z + self._log_shape(np.where(inside, x, 0.5)))
        out = np.where(x <= self._w_star, 1.0, np.where(inside, val, 0.0))
        return np.asarray(out)[()]

    def sample(self, rng, size):
        log_u = np.log1p(-rng.random(size))  # log of a uniform on (0, 1]
        if self.b == 0.0:
            # exact inversion: log Z - x/(c1 (1-x)) = log u
            r = self.c1 * (self.log_z - log_u)  # equals x / (1 - x)
            return r / (1.0 + r)
        # bisection on the monotone log-tail
        lo = np.full(size, self._w_star)
        hi = np.ones(size)
        while True:
            mid = 0.5 * (lo + hi)
            with np.errstate(divide="ignore", over="ignore"):
                above = self.log_z + self._log_shape(mid) >= log_u
            lo = np.where(above, mid, lo)
            hi = np.where(above, hi, mid)
            if np.max(hi - lo) <= 1e-12:
                return 0.5 * (lo + hi)


class ParetoWeibull(WeightModel):
    """Tail P(W >= 1 - 1/t) = t^-(alpha - 1): the Weibull class with trivial slowly varying part."""

    kind = WeightClass.PARETO

    def __init__(self, alpha: float):
        if not alpha > 1.0:
            raise InvalidParameter(f"alpha must exceed 1, got {alpha}")
        self.alpha = float(alpha)

    @classmethod
    def from_params(cls, p: Mapping):
        unknown = set(p) - {"alpha"}
        if unknown:
            raise InvalidParameter(f"unknown ParetoWeibull parameters {sorted(unknown)}")
        return cls(_real(p, "alpha"))

    @property
    def params(self) -> dict:
        return {"alpha": self.alpha}

    @property
    def w_star(self) -> float:
        return 0.0

    @cached_property
    def mean_w(self) -> float:
        return 1.0 / self.alpha

    def tail(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where(x <= 0.0, 1.0, np.clip(1.0 - x, 0.0, 1.0) ** (self.alpha - 1.0))
        return np.asarray(np.where(x > 1.0, 0.0, out))[()]

    def sample(self, rng, size):
        return 1.0 - rng.random(size) ** (1.0 / (self.alpha - 1.0))


class RaVCanonical(WeightModel):
    """Tail P(W >= 1 - 1/x) = exp(-(log x / c)^tau), x >= 1."""

    kind = WeightClass.RAV

    def __init__(self, c: float, tau: float):
        if not c > 0:
            raise InvalidParameter("c must be positive")
        if not tau > 1.0:
            raise InvalidParameter(f"tau must exceed 1, got {tau}")
        self.c, self.tau = float(c), float(tau)

    @classmethod
    def from_params(cls, p: Mapping):
        unknown = set(p) - {"c", "tau"}
        if unknown:
            raise InvalidParameter(f"unknown RaVCanonical parameters {sorted(unknown)}")
        return cls(_real(p, "c"), _real(p, "tau"))

    @property
    def params(self) -> dict:
        return {"c": self.c, "tau": self.tau}

    @property
    def w_star(self) -> float:
        return 0.0

    def tail(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            lx = -np.log1p(-np.clip(x, 0.0, 1.0))
        out = np.where(x <= 0.0, 1.0, np.exp(-((lx / self.c) ** self.tau)))
        return np.asarray(np.where(x >= 1.0, 0.0, out))[()]

    def sample(self, rng, size):
        with np.errstate(divide="ignore"):
            e = -np.log(rng.random(size))
        return -np.expm1(-self.c * e ** (1.0 / self.tau))


_CLASSES = {
    WeightClass.ATOM: AtomMixture,
    WeightClass.BETA: BetaConditioned,
    WeightClass.GAMMA: GammaFraction,
    WeightClass.PARETO: ParetoWeibull,
    WeightClass.RAV: RaVCanonical,
    WeightClass.DEGENERATE: Degenerate,
}

_ALIASES = {
    "atom": WeightClass.ATOM,
    "beta": WeightClass.BETA,
    "gamma": WeightClass.GAMMA,
    "gammafraction": WeightClass.GAMMA,
    "pareto": WeightClass.PARETO,
    "weibull": WeightClass.PARETO,
    "rav": WeightClass.RAV,
    "degenerate": WeightClass.DEGENERATE,
    "rrt": WeightClass.DEGENERATE,
}


def parse_class(name) -> WeightClass:
    if isinstance(name, WeightClass):
        return name
    try:
        return WeightClass(name)
    except ValueError:
        pass
    key = str(name).lower()
    for cls in WeightClass:
        if cls.value.lower() == key:
            return cls
    if key in _ALIASES:
        return _ALIASES[key]
    raise InvalidParameter(f"unknown weight class {name!r}")


def build(kind, params: Mapping | None = None) -> WeightModel:
    """Construct and validate a weight model from a class tag and parameter mapping."""
    cls = parse_class(kind)
    params = dict(params or {})
    if cls is WeightClass.DEGENERATE:
        if params:
            raise InvalidParameter("Degenerate takes no parameters")
        return Degenerate()
    model = _CLASSES[cls].from_params(params)
    if not 0.0 < model.mean_w <= 1.0:
        raise InvalidParameter(f"mean weight {model.mean_w} outside (0, 1]")
    return model


def from_dict(spec: Mapping) -> WeightModel:
    """Build from ``{"class": ..., "params": {...}}``."""
    if not isinstance(spec, Mapping) or "class" not in spec:
        raise InvalidParameter("model spec needs a 'class' key")
    unknown = set(spec) - {"class", "params"}
    if unknown:
        raise InvalidParameter(f"unknown model spec keys {sorted(unknown)}")
    return build(spec["class"], spec.get("params", {}))
