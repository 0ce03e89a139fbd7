"""Random walk on the orthant-model cluster and its drift/fluctuation stats.

"Walk on the cluster" means uniform choice among the d directed out-edges
of the current vertex (all positive if the site is 1, all negative if 0),
so the walk never leaves the forward cluster of the origin.  The
environment is sampled lazily along the trajectory through the keyed hash;
the annealed law uses a fresh environment per walk.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .lattice import (
    WALK_STREAM,
    ModelKind,
    SiteField,
    hash_words,
    out_neighbors,
    subseed,
    uniform_from_hash,
)


@dataclass
class WalkPath:
    """Trajectory plus the seed pair that reproduces it exactly."""

    env_seed: int
    walk_seed: int
    p: float
    positions: np.ndarray  # (steps+1, d) int64, positions[0] = 0

    @property
    def steps(self) -> int:
        return self.positions.shape[0] - 1

    @property
    def d(self) -> int:
        return self.positions.shape[1]


@dataclass
class WalkStats:
    """Annealed drift and fluctuation summary over independent walks."""

    p: float
    steps: int
    walks: int
    speed: np.ndarray  # mean displacement per step, d-vector
    speed_stderr: np.ndarray
    covariance: np.ndarray  # covariance of (X_N - N v) / sqrt(N)
    min_eigenvalue: float
    min_eigenvalue_stderr: float
    drift_along_ones: float
    drift_stderr: float
    pairwise_speed_diffs: list  # (a, b, diff, stderr)
    quenched: bool


def walk(env: SiteField, p: float, steps: int, walk_seed: int) -> WalkPath:
    """Simulate one walk; deterministic in (environment seed, walk seed)."""
    if steps < 1:
        raise ValueError("steps must be positive")
    out = np.zeros((steps + 1, env.d), dtype=np.int64)
    _kernels._walk_kernel(
        np.uint64(env.seed & 0xFFFFFFFFFFFFFFFF),
        np.uint64(walk_seed & 0xFFFFFFFFFFFFFFFF),
        float(p), steps, env.d, out,
    )
    return WalkPath(env.seed, walk_seed, p, out)


def walk_choice(walk_seed: int, step: int, d: int) -> int:
    """The axis chosen at a given step (reference for replay checks)."""
    u = uniform_from_hash(hash_words(walk_seed, (step,), tag=WALK_STREAM))
    axis = int(u * d)
    return min(axis, d - 1)


def path_is_valid(path: WalkPath) -> bool:
    """Replay every step against the lazy environment's out-edges."""
    env = SiteField(path.env_seed, path.d)
    for t in range(path.steps):
        x = tuple(int(c) for c in path.positions[t])
        y = tuple(int(c) for c in path.positions[t + 1])
        if y not in out_neighbors(ModelKind.ORTHANT, env, x, path.p):
            return False
    return True


def multinomial_speed(d: int) -> np.ndarray:
    """Closed-form speed at p=1: each coordinate advances 1/d per step."""
    return np.full(d, 1.0 / d)


def multinomial_covariance(d: int) -> np.ndarray:
    """Closed-form step covariance at p=1: diag 1/d(1-1/d), off-diag -1/d^2."""
    cov = np.full((d, d), -1.0 / d**2)
    np.fill_diagonal(cov, (1.0 / d) * (1.0 - 1.0 / d))
    return cov


def ballisticity_report(p: float, steps: int, walks: int, d: int = 2,
                        master_seed: int = 0, quenched: bool = False) -> WalkStats:
    """Estimate the speed vector and rescaled-endpoint covariance.

    Annealed mode draws a fresh environment per walk; quenched mode reuses
    one environment (variance decomposition diagnostics only).
    """
    if walks < 30:
        raise ValueError("need at least 30 walks for the covariance report")
    finals = np.zeros((walks, d), dtype=np.float64)
    env0 = subseed(master_seed, 101)
    for i in range(walks):
        env_seed = env0 if quenched else subseed(master_seed, 101, i)
        path = walk(SiteField(env_seed, d), p, steps, subseed(master_seed, 202, i))
        finals[i] = path.positions[-1]
    per_walk_speed = finals / steps
    speed = per_walk_speed.mean(axis=0)
    speed_stderr = per_walk_speed.std(axis=0, ddof=1) / math.sqrt(walks)
    rescaled = (finals - steps * speed) / math.sqrt(steps)
    cov = np.cov(rescaled.T, ddof=1)
    eigvals = np.linalg.eigvalsh(cov)
    lam = float(eigvals[0])
    lam_jack = _jackknife_min_eig(rescaled)
    ones_speed = per_walk_speed.sum(axis=1)
    drift = float(ones_speed.mean())
    drift_se = float(ones_speed.std(ddof=1) / math.sqrt(walks))
    diffs = []
    for a in range(d):
        for b in range(a + 1, d):
            delta = per_walk_speed[:, a] - per_walk_speed[:, b]
            diffs.append(
                (a, b, float(delta.mean()),
                 float(delta.std(ddof=1) / math.sqrt(walks)))
            )
    return WalkStats(
        p=p, steps=steps, walks=walks, speed=speed, speed_stderr=speed_stderr,
        covariance=cov, min_eigenvalue=lam, min_eigenvalue_stderr=lam_jack,
        drift_along_ones=drift, drift_stderr=drift_se,
        pairwise_speed_diffs=diffs, quenched=quenched,
    )


def _jackknife_min_eig(rescaled: np.ndarray) -> float:
    """Delete-one jackknife standard error of the smallest eigenvalue."""
    n = rescaled.shape[0]
    total = rescaled.sum(axis=0)
    sq = rescaled.T @ rescaled
    vals = np.empty(n)
    for i in range(n):
        x = rescaled[i]
        mean_i = (total - x) / (n - 1)
        sq_i = sq - np.outer(x, x)
        cov_i = (sq_i - (n - 1) * np.outer(mean_i, mean_i)) / (n - 2)
        vals[i] = np.linalg.eigvalsh(cov_i)[0]
    return float(math.sqrt((n - 1) / n * ((vals - vals.mean()) ** 2).sum()))
