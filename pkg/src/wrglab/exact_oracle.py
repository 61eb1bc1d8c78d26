"""Exact in-degree laws for tiny graphs with fixed weights.

At step j (j = 1..n-1) vertex j+1 arrives and sends m half-edges, each
independently to vertex i <= j with probability w_i / S_j.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product

import numpy as np

from .errors import InvalidParameter, ResourceGuard

MAX_N = 14
MAX_M = 3
MAX_TRACKED = 3
MAX_STATES = 10**7


@dataclass(frozen=True)
class ExactSpec:
    n: int
    m: int
    weights: tuple[float, ...]
    tracked: tuple[int, ...] = (1,)

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        object.__setattr__(self, "tracked", tuple(int(t) for t in self.tracked))
        if self.n < 1 or self.m < 1:
            raise InvalidParameter("n and m must be positive")
        if self.n > MAX_N or self.m > MAX_M:
            raise ResourceGuard(f"exact oracle limited to n <= {MAX_N}, m <= {MAX_M}")
        if len(self.weights) != self.n:
            raise InvalidParameter(f"expected {self.n} weights, got {len(self.weights)}")
        if any(not 0.0 < w <= 1.0 for w in self.weights):
            raise InvalidParameter("weights must lie in (0, 1]")
        if not 1 <= len(self.tracked) <= MAX_TRACKED:
            raise ResourceGuard(f"track between 1 and {MAX_TRACKED} vertices")
        if len(set(self.tracked)) != len(self.tracked):
            raise InvalidParameter("tracked labels must be distinct")
        if any(not 1 <= t <= self.n for t in self.tracked):
            raise InvalidParameter("tracked labels must lie in 1..n")
        if math.prod(self.max_degree(t) + 1 for t in self.tracked) > MAX_STATES:
            raise ResourceGuard("joint state space exceeds guard")

    def max_degree(self, i: int) -> int:
        return self.m * (self.n - i)

    @property
    def cumsum(self) -> np.ndarray:
        return np.cumsum(self.weights)


def _binomial_pmf(m: int, p: float) -> np.ndarray:
    return np.array([math.comb(m, k) * p**k * (1.0 - p) ** (m - k) for k in range(m + 1)])


def exact_marginal(spec: ExactSpec, i: int) -> np.ndarray:
    """Law of Z_n(i) as a vector over degrees 0..m(n-i)."""
    if not 1 <= i <= spec.n:
        raise InvalidParameter(f"vertex {i} outside 1..{spec.n}")
    s = spec.cumsum
    dist = np.array([1.0])
    for j in range(i, spec.n):
        dist = np.convolve(dist, _binomial_pmf(spec.m, spec.weights[i - 1] / s[j - 1]))
    return dist


def _multinomial_moves(m: int, probs: list[float]):
    """Yield (increments, probability) for m draws over tracked cells plus a rest cell."""
    k = len(probs)
    rest = max(0.0, 1.0 - sum(probs))
    for counts in product(range(m + 1), repeat=k):
        used = sum(counts)
        if used > m:
            continue
        coef = math.factorial(m) // (math.prod(math.factorial(c) for c in counts) * math.factorial(m - used))
        p = coef * rest ** (m - used)
        for c, q in zip(counts, probs):
            p *= q**c
        if p > 0.0:
            yield counts, p


def exact_joint(spec: ExactSpec) -> np.ndarray:
    """Joint law of the tracked in-degrees; axis t indexes degrees of spec.tracked[t]."""
    shape = tuple(spec.max_degree(t) + 1 for t in spec.tracked)
    table = np.zeros(shape)
    table[(0,) * len(shape)] = 1.0
    s = spec.cumsum
    for j in range(1, spec.n):
        probs = [spec.weights[t - 1] / s[j - 1] if t <= j else 0.0 for t in spec.tracked]
        new = np.zeros(shape)
        for inc, p in _multinomial_moves(spec.m, probs):
            src = tuple(slice(0, dim - c) for dim, c in zip(shape, inc))
            dst = tuple(slice(c, dim) for dim, c in zip(shape, inc))
            new[dst] += p * table[src]
        table = new
    return table


def enumerate_joint(spec: ExactSpec) -> np.ndarray:
    """Same law as exact_joint by listing every attachment sequence (feasible only for tiny n, m)."""
    shape = tuple(spec.max_degree(t) + 1 for t in spec.tracked)
    table = np.zeros(shape)
    s = spec.cumsum
    choices = [list(product(range(1, j + 1), repeat=spec.m)) for j in range(1, spec.n)]
    for path in product(*choices):
        p = 1.0
        deg = dict.fromkeys(spec.tracked, 0)
        for j, targets in enumerate(path, start=1):
            for t in targets:
                p *= spec.weights[t - 1] / s[j - 1]
                if t in deg:
                    deg[t] += 1
        table[tuple(deg[t] for t in spec.tracked)] += p
    return table


def table_to_dict(table: np.ndarray) -> dict[str, float]:
    """Nonzero entries keyed by comma-joined degrees."""
    out = {}
    for idx in zip(*np.nonzero(table)):
        out[",".join(str(int(v)) for v in idx)] = float(table[idx])
    return out
