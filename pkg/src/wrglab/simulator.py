"""Growth of weighted recursive graphs and extraction of degree extremes.

Random streams: replica r of seed s draws from a Philox generator keyed by
``SeedSequence(s, spawn_key=(r, purpose)).generate_state(2, uint64)``. Each
replica owns its stream, so results do not depend on scheduling.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Callable, Iterator

import numba
import numpy as np

from .analytics import centering, limit_constants
from .errors import InvalidParameter, ResourceGuard
from .weight_models import Degenerate, WeightModel

RANDOM_OUT_DEGREE_GUARD = 10**5
EDGE_GUARD = 10**5
PARALLEL_ENV = "WRGLAB_PARALLEL"

GROWTH_STREAM = 0
TIEBREAK_STREAM = 1


class Variant(str, Enum):
    FIXED = "fixed"
    RANDOM = "random"


def replica_stream(seed: int, replica: int, purpose: int = GROWTH_STREAM) -> np.random.Generator:
    """Counter-based generator for (seed, replica, purpose)."""
    if seed < 0 or replica < 0:
        raise InvalidParameter("seed and replica must be nonnegative")
    key = np.random.SeedSequence(int(seed), spawn_key=(int(replica), int(purpose))).generate_state(2, np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class GrowthConfig:
    n: int
    m: int = 1
    variant: Variant = Variant.FIXED
    model: WeightModel = field(default_factory=Degenerate)
    seed: int = 0
    track_top_k: int = 10
    near_max_delta: int = 0
    keep_edges: bool = False
    allow_large_random: bool = False

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        if self.n < 1 or self.m < 1:
            raise InvalidParameter("n and m must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise InvalidParameter("seed must be a 64-bit nonnegative integer")
        if self.track_top_k < 0 or self.near_max_delta < 0:
            raise InvalidParameter("top-k and near-max delta must be nonnegative")
        if self.variant is Variant.RANDOM and self.n > RANDOM_OUT_DEGREE_GUARD and not self.allow_large_random:
            raise ResourceGuard(f"random out-degree is quadratic; n={self.n} exceeds {RANDOM_OUT_DEGREE_GUARD}")
        if self.keep_edges and self.n > EDGE_GUARD:
            raise ResourceGuard(f"edge lists are kept only for n <= {EDGE_GUARD}")

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "variant": self.variant.value,
            "model": self.model.to_dict(),
            "seed": self.seed,
            "track_top_k": self.track_top_k,
            "near_max_delta": self.near_max_delta,
        }


@dataclass
class DegreeLedger:
    """One realization: weights[i-1], indeg[i-1] for label i, and S_j = weights[:j].sum()."""

    weights: np.ndarray
    indeg: np.ndarray
    m: int
    variant: Variant = Variant.FIXED
    edges: np.ndarray | None = None

    @property
    def n(self) -> int:
        return int(self.indeg.size)

    @property
    def cumsum(self) -> np.ndarray:
        return np.cumsum(self.weights)


@numba.njit(cache=True)
def _attach_fixed(rng, w, m, indeg, edges, keep):
    """Vertex v+1 (0-based v) sends m half-edges to u < v with probability w[u]/S_v.

    Proposals are uniform over existing vertices, accepted with w[u]/max(w);
    the acceptance ratio stays O(1) because weights lie in (0, 1].
    """
    n = w.shape[0]
    wmax = w[0]
    e = 0
    for v in range(1, n):
        for _ in range(m):
            while True:
                u = int(rng.random() * v)
                if u >= v:
                    u = v - 1
                if rng.random() * wmax < w[u]:
                    break
            indeg[u] += 1
            if keep:
                edges[e, 0] = v
                edges[e, 1] = u
                e += 1
        if w[v] > wmax:
            wmax = w[v]


@numba.njit(cache=True)
def _attach_random(rng, w, indeg):
    """Vertex v+1 links to every u < v independently with probability w[u]/S_v."""
    n = w.shape[0]
    s = 0.0
    for v in range(1, n):
        s += w[v - 1]
        for u in range(v):
            if rng.random() * s < w[u]:
                indeg[u] += 1


@numba.njit(cache=True)
def _joint_counts(rng, w, m, tracked, strides, replicas, counts):
    n = w.shape[0]
    indeg = np.zeros(n, np.int64)
    dummy = np.zeros((1, 2), np.int64)
    for _ in range(replicas):
        indeg[:] = 0
        _attach_fixed(rng, w, m, indeg, dummy, False)
        idx = 0
        for t in range(tracked.shape[0]):
            idx += indeg[tracked[t]] * strides[t]
        counts[idx] += 1


def grow(config: GrowthConfig, replica: int = 0, weights: np.ndarray | None = None) -> DegreeLedger:
    """Grow one graph. ``weights`` overrides sampling from the model."""
    rng = replica_stream(config.seed, replica, GROWTH_STREAM)
    if weights is None:
        w = np.ascontiguousarray(config.model.sample(rng, config.n), dtype=np.float64)
    else:
        w = np.ascontiguousarray(weights, dtype=np.float64)
        if w.shape != (config.n,) or np.any(w <= 0) or np.any(w > 1):
            raise InvalidParameter("fixed weights must be n values in (0, 1]")
    indeg = np.zeros(config.n, np.int64)
    if config.variant is Variant.FIXED:
        n_edges = config.m * (config.n - 1) if config.keep_edges else 1
        edges = np.zeros((max(n_edges, 1), 2), np.int64)
        _attach_fixed(rng, w, config.m, indeg, edges, config.keep_edges)
        if config.keep_edges:
            edges = edges[: config.m * (config.n - 1)] + 1  # 1-based labels
        else:
            edges = None
    else:
        _attach_random(rng, w, indeg)
        edges = None
    return DegreeLedger(w, indeg, config.m, config.variant, edges)


def joint_degree_counts(weights, m: int, tracked, replicas: int, seed: int = 0) -> np.ndarray:
    """Histogram of tracked in-degrees over independent graphs with fixed weights.

    The table has the same layout as exact_oracle.exact_joint.
    """
    w = np.ascontiguousarray(weights, dtype=np.float64)
    n = w.size
    tracked = np.asarray(tracked, dtype=np.int64) - 1
    shape = tuple(m * (n - 1 - int(t)) + 1 for t in tracked)
    strides = np.array([math.prod(shape[k + 1:]) for k in range(len(shape))], dtype=np.int64)
    counts = np.zeros(math.prod(shape), np.int64)
    rng = replica_stream(seed, 0, GROWTH_STREAM)
    _joint_counts(rng, w, m, tracked, strides, replicas, counts)
    return counts.reshape(shape)


@dataclass(frozen=True)
class TopVertex:
    label: int
    degree: int
    z_mark: float | None
    level: float


@dataclass
class RunSummary:
    replica: int
    seed: int
    n: int
    m: int
    max_degree: int
    I_n: int
    I_tilde_n: int
    top_k: list[TopVertex]
    near_max: list[int]
    center: float
    elapsed: float = 0.0

    def to_dict(self, timing: bool = False) -> dict:
        out = asdict(self)
        if not timing:
            out.pop("elapsed")
        return out


def z_mark(label, n: int, mu: float, sigma2: float):
    """(log i - mu log n) / sqrt((1 - sigma^2) log n), natural logarithms."""
    ln = math.log(n)
    return (np.log(label) - mu * ln) / math.sqrt((1.0 - sigma2) * ln)


def summarize(ledger: DegreeLedger, config: GrowthConfig, replica: int = 0, elapsed: float = 0.0) -> RunSummary:
    """Extremes of one run: max degree, smallest and largest argmax labels, ranked top-k."""
    indeg = ledger.indeg
    n = ledger.n
    top = int(indeg.max())
    argmax = np.flatnonzero(indeg == top)
    consts = limit_constants(config.model, config.m)
    center = centering(config.model, n, config.m).center if n >= 3 else 0.0
    near = (np.flatnonzero(indeg >= top - config.near_max_delta) + 1).tolist()

    k = min(config.track_top_k, n)
    ranked: list[TopVertex] = []
    if k > 0:
        kth = np.partition(indeg, n - k)[n - k]
        cand = np.flatnonzero(indeg >= kth)
        # ties split uniformly at random through a dedicated stream
        keys = replica_stream(config.seed, replica, TIEBREAK_STREAM).random(cand.size)
        order = np.lexsort((keys, -indeg[cand]))[:k]
        for idx in cand[order]:
            label = int(idx) + 1
            z = float(z_mark(label, n, consts.mu, consts.sigma2)) if n >= 2 else None
            ranked.append(TopVertex(label, int(indeg[idx]), z, float(indeg[idx] - center)))
    return RunSummary(
        replica=replica,
        seed=config.seed,
        n=n,
        m=config.m,
        max_degree=top,
        I_n=int(argmax[0]) + 1,
        I_tilde_n=int(argmax[-1]) + 1,
        top_k=ranked,
        near_max=near,
        center=float(center),
        elapsed=elapsed,
    )


def default_parallelism() -> int:
    value = os.environ.get(PARALLEL_ENV)
    if value is None:
        return 1
    try:
        p = int(value)
    except ValueError:
        raise InvalidParameter(f"{PARALLEL_ENV} must be an integer, got {value!r}") from None
    if p < 1:
        raise InvalidParameter(f"{PARALLEL_ENV} must be >= 1")
    return p


def summary_task(config: GrowthConfig, replica: int) -> RunSummary:
    start = time.perf_counter()
    ledger = grow(config, replica)
    return summarize(ledger, config, replica, time.perf_counter() - start)


class ReplicaError(RuntimeError):
    def __init__(self, replica: int, cause: BaseException):
        super().__init__(f"replica {replica} failed: {cause!r}")
        self.replica = replica


def _run_one(args):
    task, config, replica = args
    try:
        return task(config, replica)
    except Exception as exc:  # annotate with the replica index
        raise ReplicaError(replica, exc) from exc


def map_replicas(
    config: GrowthConfig,
    replicas: int,
    task: Callable[[GrowthConfig, int], object] = summary_task,
    parallelism: int | None = None,
    start: int = 0,
) -> Iterator:
    """Apply ``task(config, r)`` for r in [start, start + replicas), yielding in replica order.

    ``task`` must be picklable when parallelism > 1.
    """
    if replicas < 1:
        raise InvalidParameter("replicas must be >= 1")
    parallelism = default_parallelism() if parallelism is None else int(parallelism)
    jobs = [(task, config, r) for r in range(start, start + replicas)]
    if parallelism <= 1:
        for job in jobs:
            yield _run_one(job)
        return
    with ProcessPoolExecutor(max_workers=parallelism) as pool:
        yield from pool.map(_run_one, jobs)


def run_ensemble(config: GrowthConfig, replicas: int, parallelism: int | None = None) -> Iterator[RunSummary]:
    """RunSummary for each replica, in replica order, independent of parallelism."""
    return map_replicas(config, replicas, summary_task, parallelism)
