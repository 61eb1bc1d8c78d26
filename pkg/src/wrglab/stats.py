"""Empirical functionals of simulated ensembles and their test statistics."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy.stats import kstwo

from .analytics import CenteringSequence, LimitConstants
from .errors import DomainError, EmptySample, InsufficientReplicas, InvalidParameter, WindowOverlap
from .simulator import DegreeLedger, GrowthConfig, RunSummary, grow, summarize
from .special_fn import normal_cdf

MIN_REPLICAS = 30


@dataclass(frozen=True)
class HighDegreeSample:
    """Labels (1-based) and in-degrees of every vertex with degree >= floor in one run."""

    n: int
    floor: int
    labels: np.ndarray
    degrees: np.ndarray
    replica: int = 0


def high_degree_vertices(ledger: DegreeLedger, floor: int, replica: int = 0) -> HighDegreeSample:
    idx = np.flatnonzero(ledger.indeg >= floor)
    return HighDegreeSample(ledger.n, int(floor), idx + 1, ledger.indeg[idx].copy(), replica)


@dataclass(frozen=True)
class HighDegreeTask:
    """Picklable per-replica task returning (RunSummary, HighDegreeSample)."""

    floor: int

    def __call__(self, config: GrowthConfig, replica: int):
        ledger = grow(config, replica)
        return summarize(ledger, config, replica), high_degree_vertices(ledger, self.floor, replica)


@dataclass(frozen=True)
class MarkWindow:
    """Vertices at level j (or at least j) relative to the centering, with mark in (a, b]."""

    j: int
    a: float = -math.inf
    b: float = math.inf
    mode: str = "at_least"

    def __post_init__(self):
        if not self.a < self.b:
            raise InvalidParameter(f"window needs a < b, got ({self.a}, {self.b}]")
        if self.mode not in ("at_least", "exact_level"):
            raise InvalidParameter(f"unknown window mode {self.mode!r}")


def check_windows(windows: Sequence[MarkWindow]) -> None:
    """Windows at the same level must have disjoint mark sets."""
    for i, u in enumerate(windows):
        for v in windows[i + 1:]:
            if u.j == v.j and u.a < v.b and v.a < u.b:
                raise WindowOverlap(f"windows at level {u.j} overlap: ({u.a}, {u.b}] and ({v.a}, {v.b}]")


def jackknife_se(values: np.ndarray, stat=np.mean) -> float:
    """Delete-one jackknife standard error of stat over the first axis."""
    values = np.asarray(values)
    r = values.shape[0]
    if r < 2:
        return math.nan
    loo = np.array([stat(np.delete(values, i, axis=0)) for i in range(r)])
    return float(math.sqrt((r - 1) / r * np.sum((loo - loo.mean()) ** 2)))


def falling_factorial(x: np.ndarray, c: int) -> np.ndarray:
    out = np.ones_like(x, dtype=float)
    for k in range(c):
        out *= x - k
    return out


def marks(labels: np.ndarray, n: int, constants: LimitConstants, kind: str = "tilde", level: float | None = None):
    """Rescaled log-labels.

    kind "tilde": (log i - mu log n) / sqrt((1 - sigma^2) log n);
    kind "level": (log i - (log n - (1 - 1/theta) d)) / sqrt((1 - 1/theta)^2 d) with d = level,
    which may be an array of per-vertex degrees.
    """
    ln = math.log(n)
    if kind == "tilde":
        return (np.log(labels) - constants.mu * ln) / math.sqrt((1.0 - constants.sigma2) * ln)
    if kind == "level":
        k = 1.0 - 1.0 / constants.theta
        level = np.asarray(level, dtype=float)
        return (np.log(labels) - (ln - k * level)) / np.sqrt(k * k * level)
    raise InvalidParameter(f"unknown mark kind {kind!r}")


@dataclass
class EmpiricalCounts:
    windows: list[MarkWindow]
    counts: np.ndarray  # replicas x windows
    mean: np.ndarray
    var: np.ndarray
    mean_se: np.ndarray
    factorial_moments: dict[int, np.ndarray]
    factorial_se: dict[int, np.ndarray]
    dispersion: np.ndarray
    dispersion_se: np.ndarray
    window_marks: list[np.ndarray] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "windows": [asdict(w) for w in self.windows],
            "mean": self.mean.tolist(),
            "var": self.var.tolist(),
            "mean_se": self.mean_se.tolist(),
            "dispersion": self.dispersion.tolist(),
            "dispersion_se": self.dispersion_se.tolist(),
            "factorial_moments": {str(c): v.tolist() for c, v in self.factorial_moments.items()},
            "factorial_se": {str(c): v.tolist() for c, v in self.factorial_se.items()},
        }


def _dispersion(x):
    mean = x.mean(axis=0)
    return np.where(mean > 0, x.var(axis=0, ddof=1) / np.where(mean > 0, mean, 1.0), np.nan)


def count_marked(
    samples: Sequence[HighDegreeSample],
    centering_seq: CenteringSequence,
    constants: LimitConstants,
    windows: Sequence[MarkWindow],
    mark: str = "level",
    factorial_orders: Sequence[int] = (1, 2),
    c: float | None = None,
) -> EmpiricalCounts:
    """Per-replica counts X_j(B) / X_{>=j}(B) over a common n.

    ``c`` bounds the highest level numerically: center + j < c log n with
    c < theta/(theta-1) (defaults to that supremum). With ``mark="level"`` each
    vertex is normalized at its own degree, so marks at every level share one limit law.
    """
    windows = list(windows)
    if not windows:
        raise InvalidParameter("no windows given")
    if not samples:
        raise InsufficientReplicas("no replicas given")
    check_windows(windows)
    if centering_seq.form != "level":
        raise InvalidParameter("counting needs an integer-level centering")
    center = int(centering_seq.center)
    n = samples[0].n
    c_max = constants.theta / (constants.theta - 1.0)
    c = c_max if c is None else c
    if c > c_max:
        raise DomainError(f"c must not exceed theta/(theta-1) = {c_max}")
    for w in windows:
        if center + w.j >= c * math.log(n):
            raise DomainError(f"level {center + w.j} is not below c log n = {c * math.log(n):.4g}")
    counts = np.zeros((len(samples), len(windows)), dtype=np.int64)
    collected = [[] for _ in windows]
    for r, s in enumerate(samples):
        if s.n != n:
            raise InvalidParameter("all samples must share n")
        for k, w in enumerate(windows):
            level = center + w.j
            if level < 1:
                raise DomainError(f"window level {level} must be >= 1")
            if s.floor > level:
                raise InvalidParameter(f"sample floor {s.floor} above window level {level}")
            sel = s.degrees == level if w.mode == "exact_level" else s.degrees >= level
            mk = marks(s.labels[sel], n, constants, mark, s.degrees[sel])
            inside = (mk > w.a) & (mk <= w.b)
            counts[r, k] = int(np.count_nonzero(inside))
            collected[k].append(mk[inside])
    x = counts.astype(float)
    fm = {c_: falling_factorial(x, c_).mean(axis=0) for c_ in factorial_orders}
    fse = {c_: np.array([jackknife_se(falling_factorial(x[:, k], c_)) for k in range(x.shape[1])])
           for c_ in factorial_orders}
    disp_se = np.array([jackknife_se(x[:, k], lambda v: _dispersion(v[:, None])[0]) for k in range(x.shape[1])])
    return EmpiricalCounts(
        windows=windows,
        counts=counts,
        mean=x.mean(axis=0),
        var=x.var(axis=0, ddof=1) if len(samples) > 1 else np.full(len(windows), np.nan),
        mean_se=np.array([jackknife_se(x[:, k]) for k in range(x.shape[1])]),
        factorial_moments=fm,
        factorial_se=fse,
        dispersion=_dispersion(x),
        dispersion_se=disp_se,
        window_marks=[np.concatenate(v) if v else np.empty(0) for v in collected],
    )


def ks_statistic(x: np.ndarray, cdf) -> float:
    """Two-sided one-sample Kolmogorov-Smirnov distance D_n."""
    x = np.sort(np.asarray(x, dtype=float))
    n = x.size
    if n == 0:
        raise EmptySample("KS statistic of an empty sample")
    f = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))


def ks_test(x: np.ndarray, cdf) -> tuple[float, float]:
    """(D_n, p-value) using the exact finite-n null distribution of D_n."""
    d = ks_statistic(x, cdf)
    return d, float(kstwo.sf(d, len(x)))


def _shifted_normal_cdf(shift: float):
    return lambda v: normal_cdf(np.asarray(v) - shift)


@dataclass
class ConditionalZSample:
    d: int
    z: np.ndarray
    replicas: np.ndarray
    mark_mean: float
    mean: float
    sd: float
    mean_se: float
    sd_se: float
    ks_stat: float
    ks_pvalue: float

    @property
    def count(self) -> int:
        return int(self.z.size)

    def mean_ci(self, level_z: float = 1.96) -> tuple[float, float]:
        return self.mean - level_z * self.mean_se, self.mean + level_z * self.mean_se

    def sd_ci(self, level_z: float = 1.96) -> tuple[float, float]:
        return self.sd - level_z * self.sd_se, self.sd + level_z * self.sd_se

    def to_dict(self) -> dict:
        return {
            "d": self.d, "count": self.count, "mark_mean": self.mark_mean, "mean": self.mean,
            "sd": self.sd, "mean_se": self.mean_se, "sd_se": self.sd_se,
            "ks_stat": self.ks_stat, "ks_pvalue": self.ks_pvalue,
        }


def conditional_z(labels, n: int, d: int, theta: float) -> np.ndarray:
    """(log v - (log n - (1 - 1/theta) d)) / sqrt((1 - 1/theta)^2 d)."""
    k = 1.0 - 1.0 / theta
    return (np.log(np.asarray(labels, dtype=float)) - (math.log(n) - k * d)) / math.sqrt(k * k * d)


def _grouped_jackknife(z: np.ndarray, groups: np.ndarray, stat) -> float:
    ids = np.unique(groups)
    if ids.size < 2:
        return math.nan
    loo = np.array([stat(z[groups != g]) for g in ids])
    r = ids.size
    return float(math.sqrt((r - 1) / r * np.sum((loo - loo.mean()) ** 2)))


def conditional_labels(
    samples: Sequence[HighDegreeSample],
    d: int,
    theta: float,
    mark_mean: float = 0.0,
    mode: str = "at_least",
    c: float | None = None,
) -> ConditionalZSample:
    """Pooled z-scores of labels of vertices with degree >= d (or == d), with KS and CIs.

    CIs come from a delete-one-replica jackknife, which respects within-run dependence.
    """
    if not samples:
        raise InsufficientReplicas("no replicas given")
    n = samples[0].n
    c_max = theta / (theta - 1.0)
    c = c_max if c is None else min(c, c_max)
    if not 0 < d < c * math.log(n):
        raise DomainError(f"d={d} must lie in (0, c log n) with c={c:.4g}")
    zs, groups = [], []
    for s in samples:
        if s.floor > d:
            raise InvalidParameter(f"sample floor {s.floor} above d={d}")
        sel = s.degrees == d if mode == "exact_degree" else s.degrees >= d
        zs.append(conditional_z(s.labels[sel], s.n, d, theta))
        groups.append(np.full(int(np.count_nonzero(sel)), s.replica))
    z = np.concatenate(zs)
    g = np.concatenate(groups)
    if z.size == 0:
        raise EmptySample(f"no vertex reached degree {d}")
    sd = float(z.std(ddof=1)) if z.size > 1 else math.nan
    stat, p = ks_test(z, _shifted_normal_cdf(mark_mean))
    return ConditionalZSample(
        d=d, z=z, replicas=g, mark_mean=mark_mean, mean=float(z.mean()), sd=sd,
        mean_se=_grouped_jackknife(z, g, np.mean),
        sd_se=_grouped_jackknife(z, g, lambda v: v.std(ddof=1)),
        ks_stat=stat, ks_pvalue=p,
    )


def median_ci(values: np.ndarray, level: float = 0.95) -> tuple[float, float]:
    """Distribution-free order-statistic confidence interval for the median."""
    from scipy.stats import binom

    x = np.sort(np.asarray(values, dtype=float))
    r = x.size
    alpha = 1.0 - level
    lo = int(binom.ppf(alpha / 2, r, 0.5))
    hi = int(r - 1 - lo)
    lo = max(lo - 1, 0)
    return float(x[lo]), float(x[min(hi, r - 1)])


@dataclass
class LocationReport:
    n: int
    values: np.ndarray
    values_tilde: np.ndarray
    median: float
    iqr: tuple[float, float]
    median_ci: tuple[float, float]
    median_tilde: float
    mu: float

    @property
    def deviation(self) -> float:
        return self.median - self.mu

    def to_dict(self) -> dict:
        return {
            "n": self.n, "replicas": int(self.values.size), "median": self.median, "iqr": list(self.iqr),
            "median_ci": list(self.median_ci), "median_tilde": self.median_tilde, "mu": self.mu,
            "deviation": self.deviation,
        }


def location_statistics(summaries: Sequence[RunSummary], constants: LimitConstants,
                        min_replicas: int = MIN_REPLICAS) -> LocationReport:
    """log I_n / log n across replicas (and the same for the largest argmax label)."""
    if len(summaries) < min_replicas:
        raise InsufficientReplicas(f"need at least {min_replicas} replicas, got {len(summaries)}")
    n = summaries[0].n
    if n < 2:
        raise DomainError("location needs n >= 2")
    ln = math.log(n)
    v = np.array([math.log(s.I_n) / ln for s in summaries])
    vt = np.array([math.log(s.I_tilde_n) / ln for s in summaries])
    q1, q3 = np.percentile(v, [25, 75])
    return LocationReport(n, v, vt, float(np.median(v)), (float(q1), float(q3)), median_ci(v),
                          float(np.median(vt)), constants.mu)


@dataclass
class MaxDegreeReport:
    n: int
    values: np.ndarray
    mean: float
    ci: tuple[float, float]
    limit: float
    ratio_mean: float
    centering: CenteringSequence

    def within(self, lo: float, hi: float) -> bool:
        return lo <= self.mean <= hi

    def to_dict(self) -> dict:
        return {
            "n": self.n, "replicas": int(self.values.size), "mean": self.mean, "ci": list(self.ci),
            "limit": self.limit, "ratio_mean": self.ratio_mean, "centering": self.centering.to_dict(),
        }


def max_degree_statistics(summaries: Sequence[RunSummary], centering_seq: CenteringSequence, theta: float,
                          min_replicas: int = MIN_REPLICAS) -> MaxDegreeReport:
    """(max_degree - center)/scale across replicas, with mean max/log_theta n."""
    if len(summaries) < min_replicas:
        raise InsufficientReplicas(f"need at least {min_replicas} replicas, got {len(summaries)}")
    n = summaries[0].n
    mx = np.array([s.max_degree for s in summaries], dtype=float)
    vals = (mx - centering_seq.center) / centering_seq.scale
    mean = float(vals.mean())
    half = 1.96 * float(vals.std(ddof=1)) / math.sqrt(vals.size)
    ratio = float(np.mean(mx / (math.log(n) / math.log(theta))))
    return MaxDegreeReport(n, vals, mean, (mean - half, mean + half), centering_seq.limit, ratio, centering_seq)
