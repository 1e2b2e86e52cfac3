"""Full-covariance Gaussian mixture fitted by EM."""

from __future__ import annotations

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import logsumexp

from ..exceptions import DegenerateComponent, InsufficientData
from .base import BaseDetector

K_GRID = (2, 5, 8, 11, 14, 17, 20, 23, 26, 30)
_LOG_2PI = np.log(2.0 * np.pi)


def kmeans_pp_centers(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding: each next center drawn with probability ~ D^2."""
    n = X.shape[0]
    centers = [X[rng.integers(n)]]
    d2 = ((X - centers[0]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        idx = rng.integers(n) if total <= 0 else rng.choice(n, p=d2 / total)
        centers.append(X[idx])
        d2 = np.minimum(d2, ((X - X[idx]) ** 2).sum(axis=1))
    return np.array(centers)


def _component_log_pdf(X, means, chols):
    k, d = means.shape
    out = np.empty((X.shape[0], k))
    for c in range(k):
        z = solve_triangular(chols[c], (X - means[c]).T, lower=True, check_finite=False)
        out[:, c] = -0.5 * (z * z).sum(axis=0) - np.log(np.diag(chols[c])).sum() - 0.5 * d * _LOG_2PI
    return out


def _cholesky_all(covs):
    try:
        return np.linalg.cholesky(covs)
    except np.linalg.LinAlgError as exc:
        raise DegenerateComponent("covariance not positive definite after regularization") from exc


def _m_step(X, resp, reg):
    n, d = X.shape
    nk = resp.sum(axis=0) + 10 * np.finfo(float).eps
    weights = nk / n
    means = (resp.T @ X) / nk[:, None]
    covs = np.empty((len(nk), d, d))
    for c in range(len(nk)):
        diff = X - means[c]
        covs[c] = (resp[:, c, None] * diff).T @ diff / nk[c]
        covs[c].flat[:: d + 1] += reg
    return weights, means, covs


def fit_em(X, k, reg=1e-6, tol=1e-4, max_iter=200, rng=None):
    """Run EM from a k-means++ hard assignment.

    Returns ``(weights, means, covariances, history)`` where ``history`` is
    the mean training log-likelihood after every E-step.
    """
    rng = np.random.default_rng(rng)
    n = X.shape[0]
    centers = kmeans_pp_centers(X, k, rng)
    nearest = ((X[:, None, :] - centers[None]) ** 2).sum(axis=2).argmin(axis=1)
    resp = np.zeros((n, k))
    resp[np.arange(n), nearest] = 1.0
    weights, means, covs = _m_step(X, resp, reg)

    history = []
    for _ in range(max_iter):
        chols = _cholesky_all(covs)
        weighted = _component_log_pdf(X, means, chols) + np.log(weights)
        norm = logsumexp(weighted, axis=1)
        history.append(float(norm.mean()))
        if len(history) > 1 and history[-1] - history[-2] < tol:
            break
        resp = np.exp(weighted - norm[:, None])
        weights, means, covs = _m_step(X, resp, reg)
    _cholesky_all(covs)
    return weights, means, covs, history


class GMM(BaseDetector):
    """Gaussian mixture scored by its log-density.

    Parameters
    ----------
    n_components : int, optional
        Number of components. When None the mode count of the training data
        (see :func:`quickshiftpp_mode_count`) is used.
    reg : float, default=1e-6
        Ridge added to every covariance diagonal.
    tol : float, default=1e-4
        Stop when the mean log-likelihood gains less than this.
    max_iter : int, default=200
    random_state : int, default=0
        Seed of the k-means++ initialization. A degenerate fit is retried
        once with a derived seed.
    """

    family = "GMM"

    def __init__(self, n_components=None, reg=1e-6, tol=1e-4, max_iter=200, random_state=0):
        self.n_components = n_components
        self.reg = reg
        self.tol = tol
        self.max_iter = max_iter
        self.random_state = random_state

    def fit(self, X, y=None):
        from .quickshift import quickshiftpp_mode_count

        X = self._validate_fit(X)
        k = self.n_components
        if k is None:
            k = quickshiftpp_mode_count(X)
        k = int(k)
        if k < 1:
            raise ValueError("n_components must be >= 1")
        if X.shape[0] < k:
            raise InsufficientData(f"{X.shape[0]} samples for {k} components")
        seeds = np.random.SeedSequence(self.random_state).spawn(2)
        try:
            result = fit_em(X, k, self.reg, self.tol, self.max_iter, np.random.default_rng(seeds[0]))
        except DegenerateComponent:
            result = fit_em(X, k, self.reg, self.tol, self.max_iter, np.random.default_rng(seeds[1]))
        self.weights_, self.means_, self.covariances_, self.history_ = result
        self.n_components_ = k
        self._chols = _cholesky_all(self.covariances_)
        return self

    @property
    def hyper_(self):
        return self.n_components_

    def score_samples(self, X) -> np.ndarray:
        X = self._validate_score(X)
        return logsumexp(_component_log_pdf(X, self.means_, self._chols) + np.log(self.weights_), axis=1)

    def responsibilities(self, X) -> np.ndarray:
        X = self._validate_score(X)
        w = _component_log_pdf(X, self.means_, self._chols) + np.log(self.weights_)
        return np.exp(w - logsumexp(w, axis=1)[:, None])

    def _get_state(self):
        return {"weights": self.weights_, "means": self.means_, "covariances": self.covariances_}

    def _set_state(self, state):
        self.weights_ = np.asarray(state["weights"], dtype=float)
        self.means_ = np.asarray(state["means"], dtype=float)
        self.covariances_ = np.asarray(state["covariances"], dtype=float)
        self.n_components_ = len(self.weights_)
        self._chols = _cholesky_all(self.covariances_)
        self.n_features_in_ = self.means_.shape[1]
