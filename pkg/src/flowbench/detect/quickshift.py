"""Mode counting with quickshift++ cluster cores."""

from __future__ import annotations

import math

import numpy as np
from scipy.spatial import cKDTree

from ..exceptions import InsufficientData
from .kde import MAX_PAIR_POINTS

K_MIN, K_MAX = 2, 30


def knn_log_density(X: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """``log(k / (n r_k^d))`` and the k-th neighbor radius of every point."""
    n, d = X.shape
    tree = cKDTree(X)
    dist, _ = tree.query(X, k=k + 1)
    # column 0 is the point itself (or an exact duplicate at distance 0)
    r = dist[:, k]
    positive = r[r > 0]
    floor = positive.min() * 1e-3 if positive.size else 1.0
    log_r = np.log(np.maximum(r, floor))
    return math.log(k) - math.log(n) - d * log_r, r


class _Components:
    """Union-find carrying component size, core count and highest core peak."""

    def __init__(self, n):
        self.parent = list(range(n))
        self.size = [1] * n
        self.peak = [None] * n
        self.cores = [0] * n

    def find(self, i):
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i

    def union(self, a, b):
        """Merge; return the lower core peak when two cored components meet."""
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return None
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        self.cores[ra] += self.cores[rb]
        pa, pb = self.peak[ra], self.peak[rb]
        if pa is None or pb is None:
            self.peak[ra] = pb if pa is None else pa
            return None
        self.peak[ra] = max(pa, pb)
        return min(pa, pb)


def cluster_core_count(X: np.ndarray, knn_k: int, beta: float = 0.3) -> int:
    """Number of quickshift++ cluster cores.

    Points are visited in decreasing k-NN density. For point ``x`` the
    mutual k-NN graph is grown to hold every point with density at least
    ``(1 - beta) f(x)``; if the component of ``x`` has no core yet it
    becomes one. A core that joins an older one before the level falls to
    ``(1 - beta)^2`` of its own peak is a density ripple, not a mode, and
    is dropped, as are cores whose final component holds fewer than
    ``knn_k`` points. Singleton components never seed a core.
    """
    n = X.shape[0]
    if knn_k < 2 or n < knn_k + 1:
        raise InsufficientData(f"need more than knn_k={knn_k} points, got {n}")
    log_dens, r = knn_log_density(X, knn_k)
    balls = cKDTree(X).query_ball_point(X, r)
    order = sorted(range(n), key=lambda i: (-log_dens[i], i))
    log_keep = math.log(1.0 - beta)

    comps = _Components(n)
    added = np.zeros(n, dtype=bool)
    pos = 0

    def grow(level):
        nonlocal pos
        while pos < n and log_dens[order[pos]] >= level:
            j = order[pos]
            added[j] = True
            for m in balls[j]:
                if m != j and added[m] and np.linalg.norm(X[j] - X[m]) <= r[m]:
                    younger = comps.union(j, m)
                    if younger is not None and log_dens[j] >= younger + 2 * log_keep:
                        comps.cores[comps.find(j)] -= 1
            pos += 1

    for i in order:
        grow(log_dens[i] + log_keep)
        root = comps.find(i)
        if comps.peak[root] is None and comps.size[root] >= 2:
            comps.peak[root] = log_dens[i]
            comps.cores[root] += 1
    grow(-math.inf)
    # fragments the k-NN estimate cannot resolve
    cores = sum(comps.cores[i] for i in range(n) if comps.parent[i] == i and comps.size[i] >= knn_k)
    # a flat density never separates into cores: one mode
    return max(cores, 1)


def quickshiftpp_mode_count(X, knn_k: int | None = None, beta: float = 0.3, random_state: int = 0) -> int:
    """Number of density modes, clamped to ``[2, 30]``.

    ``knn_k`` defaults to ``ceil(sqrt(n))``. Above 5000 points a seeded
    subsample is used.
    """
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    if n > MAX_PAIR_POINTS:
        rng = np.random.default_rng(random_state)
        X = X[np.sort(rng.choice(n, MAX_PAIR_POINTS, replace=False))]
        n = MAX_PAIR_POINTS
    if knn_k is None:
        knn_k = math.ceil(math.sqrt(n))
    knn_k = min(knn_k, n - 1)
    if n < 3 or knn_k < 2:
        raise InsufficientData(f"mode counting needs at least 3 points, got {n}")
    count = cluster_core_count(X, knn_k, beta)
    return int(min(max(count, K_MIN), K_MAX))
