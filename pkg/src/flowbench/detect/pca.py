"""Principal subspace reconstruction error."""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln

from .base import BaseDetector


def dim_grid(d: int) -> list[int]:
    """``ceil(1 + i (d - 2) / 9)`` for ``i = 0..9`` (repeats kept)."""
    return [math.ceil(1 + i * (d - 2) / 9) for i in range(10)]


_TIE = 1e-12


def _log_evidence(spectrum: np.ndarray, rank: int, n: int) -> float:
    """Laplace approximation of the log evidence for a ``rank``-dim
    probabilistic PCA model (Minka 2000)."""
    d = spectrum.shape[0]
    eps = np.finfo(float).eps
    # log p(U): uniform prior over the Stiefel manifold
    log_pu = -rank * math.log(2.0)
    for i in range(1, rank + 1):
        log_pu += gammaln((d - i + 1) / 2.0) - math.log(math.pi) * (d - i + 1) / 2.0
    log_lead = -np.log(spectrum[:rank]).sum() * n / 2.0
    v = max(eps, spectrum[rank:].sum() / (d - rank))
    log_tail = -math.log(v) * n * (d - rank) / 2.0
    m = d * rank - rank * (rank + 1) / 2.0
    log_vol = math.log(2.0 * math.pi) * (m + rank) / 2.0
    lam_hat = spectrum.copy()
    lam_hat[rank:] = v
    log_det_hessian = 0.0
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        for i in range(rank):
            curv = (spectrum[i] - spectrum[i + 1:]) * (1.0 / lam_hat[i + 1:] - 1.0 / lam_hat[i])
            # equal retained eigenvalues only rotate within the subspace: no curvature term
            curv = curv[curv > 0]
            log_det_hessian += float(np.sum(np.log(curv) + math.log(n)))
    return log_pu + log_lead + log_tail + log_vol - log_det_hessian / 2.0 - rank * math.log(n) / 2.0


def pca_mle_dim(eigenvalues, n: int) -> int:
    """Subspace dimension in ``[1, d-1]`` maximizing the approximate evidence.

    Dimensions whose cut falls between equal eigenvalues are skipped; if
    every cut is tied (an isotropic spectrum) the answer is 1. Remaining
    ties go to the smaller dimension.
    """
    spectrum = np.asarray(eigenvalues, dtype=float)
    if spectrum.ndim != 1 or spectrum.size < 2:
        raise ValueError("need at least two eigenvalues")
    # floor at machine precision relative to the top eigenvalue so the
    # Hessian terms stay finite on rank-deficient covariances
    spectrum = np.maximum(spectrum, max(spectrum.max(), 1.0) * np.finfo(float).eps)
    d = spectrum.size
    best, best_ll = 1, -math.inf
    for rank in range(1, d):
        if spectrum[rank - 1] - spectrum[rank] <= _TIE * spectrum[rank - 1]:
            # tied across the cut: the rank-dim subspace is not identifiable
            continue
        ll = _log_evidence(spectrum, rank, n)
        if not math.isnan(ll) and ll > best_ll:
            best, best_ll = rank, ll
    return best


class PCA(BaseDetector):
    """Scores ``-|(x - mu) - P P'(x - mu)|^2`` for the top-``n_components``
    principal axes ``P`` of the training covariance.

    With ``n_components=None`` the dimension is picked by :func:`pca_mle_dim`.
    Each axis is signed so its largest-magnitude entry is positive.
    """

    family = "PCA"

    def __init__(self, n_components=None):
        self.n_components = n_components

    def fit(self, X, y=None):
        X = self._validate_fit(X)
        n, d = X.shape
        if d < 2:
            raise ValueError("PCA scoring needs at least two features")
        self.mean_ = X.mean(axis=0)
        cov = (X - self.mean_).T @ (X - self.mean_) / n
        vals, vecs = np.linalg.eigh(cov)
        order = np.argsort(vals)[::-1]
        vals = np.maximum(vals[order], 0.0)
        vecs = vecs[:, order]
        flip = np.sign(vecs[np.argmax(np.abs(vecs), axis=0), np.arange(d)])
        vecs = vecs * np.where(flip == 0, 1.0, flip)
        k = self.n_components if self.n_components is not None else pca_mle_dim(vals, n)
        if not 1 <= k <= d - 1:
            raise ValueError(f"n_components must lie in [1, {d - 1}], got {k}")
        self.n_components_ = int(k)
        self.explained_variance_ = vals
        self.components_ = vecs[:, :k].T
        return self

    @property
    def hyper_(self):
        return self.n_components_

    def reconstruction_error(self, X) -> np.ndarray:
        X = self._validate_score(X)
        centered = X - self.mean_
        resid = centered - (centered @ self.components_.T) @ self.components_
        return (resid * resid).sum(axis=1)

    def score_samples(self, X) -> np.ndarray:
        return -self.reconstruction_error(X)

    def _get_state(self):
        return {"mean": self.mean_, "components": self.components_,
                "explained_variance": self.explained_variance_}

    def _set_state(self, state):
        self.mean_ = np.asarray(state["mean"], dtype=float)
        self.components_ = np.asarray(state["components"], dtype=float).reshape(-1, self.mean_.size)
        self.explained_variance_ = np.asarray(state["explained_variance"], dtype=float)
        self.n_components_ = self.components_.shape[0]
        self.n_features_in_ = self.mean_.size
