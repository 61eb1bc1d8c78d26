"""Median of log I_n / log n from the package simulator and from a plain uniform-parent tree generator."""

import argparse
import math

import numpy as np

from wrglab.simulator import GrowthConfig, run_ensemble


def plain_tree_ratio(rng: np.random.Generator, n: int) -> float:
    v = np.arange(2, n + 1)
    parents = (rng.random(n - 1) * (v - 1)).astype(np.int64) + 1
    deg = np.bincount(parents, minlength=n + 1)
    return math.log(np.flatnonzero(deg == deg.max())[0]) / math.log(n)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=10**6)
    parser.add_argument("--replicas", type=int, default=200)
    parser.add_argument("--seed", type=int, default=12345)
    args = parser.parse_args()
    rng = np.random.default_rng(args.seed)
    plain = [plain_tree_ratio(rng, args.n) for _ in range(args.replicas)]
    ours = [math.log(s.I_n) / math.log(args.n)
            for s in run_ensemble(GrowthConfig(n=args.n, seed=args.seed), args.replicas)]
    mu = 1 - 1 / (2 * math.log(2))
    print(f"plain generator median {np.median(plain):.4f}, simulator median {np.median(ours):.4f}, mu {mu:.4f}")


if __name__ == "__main__":
    main()
