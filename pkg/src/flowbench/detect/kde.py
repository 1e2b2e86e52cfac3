"""Gaussian kernels: bandwidth rule and kernel density scoring."""

from __future__ import annotations

import math

import numpy as np
from scipy.spatial.distance import cdist, pdist
from scipy.special import logsumexp

from ..exceptions import InsufficientData
from .base import BaseDetector

SIGMA_QUANTILES = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95)
DEFAULT_SIGMA_QUANTILE = 0.3
MAX_PAIR_POINTS = 5000


def pairwise_distances_sorted(X, random_state: int = 0) -> np.ndarray:
    """All pairwise Euclidean distances, ascending.

    Above 5000 points a seeded subsample of 5000 is used.
    """
    X = np.asarray(X, dtype=float)
    if X.shape[0] < 2:
        raise InsufficientData("need at least two points for pairwise distances")
    if X.shape[0] > MAX_PAIR_POINTS:
        rng = np.random.default_rng(random_state)
        X = X[np.sort(rng.choice(X.shape[0], MAX_PAIR_POINTS, replace=False))]
    return np.sort(pdist(X))


def quantile_of_sorted(dists: np.ndarray, q: float) -> float:
    """Nearest-rank quantile of sorted distances with the zero fallback:
    smallest nonzero distance, or 1.0 if every distance is zero."""
    if not 0 < q < 1:
        raise ValueError(f"q must lie in (0, 1), got {q}")
    idx = max(math.ceil(q * len(dists)) - 1, 0)
    sigma = float(dists[idx])
    if sigma > 0:
        return sigma
    nonzero = dists[dists > 0]
    return float(nonzero[0]) if nonzero.size else 1.0


def distance_quantile_sigma(X, q: float, random_state: int = 0) -> float:
    return quantile_of_sorted(pairwise_distances_sorted(X, random_state), q)


def gaussian_kernel(A, B, sigma: float) -> np.ndarray:
    """``exp(-|a - b|^2 / (2 sigma^2))`` for every row pair."""
    return np.exp(-cdist(A, B, "sqeuclidean") / (2.0 * sigma * sigma))


class KDE(BaseDetector):
    """Kernel density scoring with an unnormalized Gaussian kernel.

    Parameters
    ----------
    bandwidth : float, optional
        Kernel width ``sigma``. When omitted it is the ``quantile`` of the
        pairwise training distances.
    quantile : float, default=0.3
        Distance quantile used when ``bandwidth`` is None.

    Notes
    -----
    ``score_samples`` returns ``log(mean_i exp(-|x - X_i|^2 / 2 sigma^2))``,
    computed with log-sum-exp so far queries do not all underflow to the
    same value. :meth:`kernel_mean` gives the mean kernel itself.
    """

    family = "KDE"

    def __init__(self, bandwidth=None, quantile=DEFAULT_SIGMA_QUANTILE):
        self.bandwidth = bandwidth
        self.quantile = quantile

    def fit(self, X, y=None):
        X = self._validate_fit(X)
        sigma = self.bandwidth
        if sigma is None:
            sigma = distance_quantile_sigma(X, self.quantile)
        if not sigma > 0:
            raise ValueError("bandwidth must be positive")
        self.sigma_ = float(sigma)
        self.X_train_ = X.copy()
        return self

    @property
    def hyper_(self):
        return self.sigma_

    def _log_kernels(self, X):
        return -cdist(X, self.X_train_, "sqeuclidean") / (2.0 * self.sigma_ ** 2)

    def kernel_mean(self, X) -> np.ndarray:
        X = self._validate_score(X)
        return np.exp(self._log_kernels(X)).mean(axis=1)

    def score_samples(self, X) -> np.ndarray:
        X = self._validate_score(X)
        return logsumexp(self._log_kernels(X), axis=1) - np.log(self.X_train_.shape[0])

    def _get_state(self):
        return {"sigma": self.sigma_, "X_train": self.X_train_}

    def _set_state(self, state):
        self.sigma_ = float(state["sigma"])
        self.X_train_ = np.asarray(state["X_train"], dtype=float)
        self.n_features_in_ = self.X_train_.shape[1]
