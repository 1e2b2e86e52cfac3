"""Isolation forest built from scratch on array-backed trees."""

from __future__ import annotations

import math

import numpy as np
from scipy.special import digamma

from .base import BaseDetector

N_TREES_GRID = tuple(range(30, 301, 10))
DEFAULT_N_TREES = 100
_EULER = float(np.euler_gamma)


def average_path_length(n) -> np.ndarray:
    """``c(n) = 2 H(n-1) - 2 (n-1) / n`` with exact harmonic numbers;
    ``c(n) = 0`` for ``n <= 1``."""
    n = np.asarray(n, dtype=float)
    out = np.zeros_like(n)
    big = n > 1
    m = n[big]
    harmonic = digamma(m) + _EULER  # H(m - 1)
    out[big] = 2.0 * harmonic - 2.0 * (m - 1.0) / m
    return out


class _Tree:
    """Flat arrays: ``feature[i] < 0`` marks a leaf holding ``size[i]`` points."""

    __slots__ = ("feature", "threshold", "left", "right", "size")

    def __init__(self, feature, threshold, left, right, size):
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=float)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.size = np.asarray(size, dtype=np.int64)

    def path_lengths(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int64)
        depth = np.zeros(X.shape[0])
        rows = np.arange(X.shape[0])
        active = self.feature[node] >= 0
        while active.any():
            idx = rows[active]
            cur = node[idx]
            go_left = X[idx, self.feature[cur]] < self.threshold[cur]
            node[idx] = np.where(go_left, self.left[cur], self.right[cur])
            depth[idx] += 1.0
            active[idx] = self.feature[node[idx]] >= 0
        return depth + average_path_length(self.size[node])

    def to_dict(self):
        return {k: getattr(self, k).tolist() for k in self.__slots__}


def build_tree(X: np.ndarray, height_limit: int, rng: np.random.Generator) -> _Tree:
    feature, threshold, left, right, size = [], [], [], [], []

    def new_node(n):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        size.append(n)
        return len(feature) - 1

    root = new_node(X.shape[0])
    stack = [(root, np.arange(X.shape[0]), 0)]
    while stack:
        node, idx, depth = stack.pop()
        if depth >= height_limit or len(idx) <= 1:
            continue
        sub = X[idx]
        lo, hi = sub.min(axis=0), sub.max(axis=0)
        splittable = np.flatnonzero(hi > lo)
        if splittable.size == 0:
            continue
        f = int(splittable[rng.integers(splittable.size)])
        t = float(rng.uniform(lo[f], hi[f]))
        mask = sub[:, f] < t
        if mask.all() or not mask.any():
            continue
        feature[node] = f
        threshold[node] = t
        li, ri = idx[mask], idx[~mask]
        left[node] = new_node(len(li))
        right[node] = new_node(len(ri))
        stack.append((right[node], ri, depth + 1))
        stack.append((left[node], li, depth + 1))
    return _Tree(feature, threshold, left, right, size)


class IsolationForest(BaseDetector):
    """Isolation forest; ``score_samples`` is minus the anomaly score
    ``2^(-E[h(x)] / c(psi))``.

    Tree ``i`` draws from its own generator spawned from ``random_state``,
    so the first ``k`` trees of a larger forest equal a ``k``-tree forest
    with the same seed (see :meth:`truncated`).
    """

    family = "IF"

    def __init__(self, n_trees=DEFAULT_N_TREES, subsample=256, random_state=0):
        self.n_trees = n_trees
        self.subsample = subsample
        self.random_state = random_state

    def fit(self, X, y=None):
        X = self._validate_fit(X)
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        n = X.shape[0]
        psi = min(self.subsample, n)
        height_limit = math.ceil(math.log2(psi)) if psi > 1 else 0
        trees = []
        for child in np.random.SeedSequence(self.random_state).spawn(self.n_trees):
            rng = np.random.default_rng(child)
            sample = X[np.sort(rng.choice(n, psi, replace=False))]
            trees.append(build_tree(sample, height_limit, rng))
        self.trees_ = trees
        self.psi_ = psi
        return self

    @property
    def hyper_(self):
        return len(self.trees_)

    def truncated(self, n_trees: int) -> IsolationForest:
        """Copy restricted to the first ``n_trees`` trees."""
        if not 1 <= n_trees <= len(self.trees_):
            raise ValueError(f"n_trees must be in [1, {len(self.trees_)}]")
        out = IsolationForest(n_trees, self.subsample, self.random_state)
        out.trees_ = self.trees_[:n_trees]
        out.psi_ = self.psi_
        out.n_features_in_ = self.n_features_in_
        return out

    def mean_path_length(self, X) -> np.ndarray:
        X = self._validate_score(X)
        return np.mean([t.path_lengths(X) for t in self.trees_], axis=0)

    def anomaly_score(self, X) -> np.ndarray:
        c = float(average_path_length(self.psi_))
        h = self.mean_path_length(X)
        if c == 0:
            return np.full(h.shape, 0.5)
        return 2.0 ** (-h / c)

    def score_samples(self, X) -> np.ndarray:
        return -self.anomaly_score(X)

    def _get_state(self):
        return {"psi": self.psi_, "n_features": self.n_features_in_,
                "trees": [t.to_dict() for t in self.trees_]}

    def _set_state(self, state):
        self.psi_ = int(state["psi"])
        self.n_features_in_ = int(state["n_features"])
        self.trees_ = [_Tree(**t) for t in state["trees"]]
