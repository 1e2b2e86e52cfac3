"""One-class SVM with a Gaussian kernel, solved in the dual."""

from __future__ import annotations

import math
import warnings

import numpy as np

from ..exceptions import NonConvergenceWarning
from .base import BaseDetector
from .kde import DEFAULT_SIGMA_QUANTILE, distance_quantile_sigma, gaussian_kernel

_TAU = 1e-12


def solve_one_class_dual(K: np.ndarray, nu: float, tol: float = 1e-6, max_sweeps: int = 10_000):
    """Minimize ``0.5 a'Ka`` s.t. ``0 <= a_i <= 1/(nu n)`` and ``sum(a) = 1``.

    Pairwise coordinate descent: each step moves mass between the maximal
    violating pair, which keeps the equality constraint satisfied and the
    iterate feasible. Stops when the KKT gap
    ``max_{a_j>0} g_j - min_{a_i<C} g_i`` (``g = Ka``) is at most ``tol``,
    or after ``max_sweeps * n`` steps.

    Returns
    -------
    alpha, rho, gap, converged
    """
    n = K.shape[0]
    C = 1.0 / (nu * n)
    alpha = np.zeros(n)
    n_full = min(int(math.floor(nu * n)), n)
    alpha[:n_full] = C
    if n_full < n:
        alpha[n_full] = 1.0 - n_full * C
    alpha = np.clip(alpha, 0.0, C)
    grad = K @ alpha
    diag = np.diag(K).copy()
    # bounds tested with a small slack so clipped values count as at-bound
    eps_bound = C * 1e-12

    gap = np.inf
    converged = False
    for _ in range(max_sweeps * n):
        can_up = alpha < C - eps_bound
        can_down = alpha > eps_bound
        g_up = np.where(can_up, grad, np.inf)
        g_down = np.where(can_down, grad, -np.inf)
        i = int(np.argmin(g_up))
        j = int(np.argmax(g_down))
        gap = g_down[j] - g_up[i]
        if gap <= tol:
            converged = True
            break
        curv = diag[i] + diag[j] - 2.0 * K[i, j]
        step = gap / max(curv, _TAU)
        step = min(step, C - alpha[i], alpha[j])
        alpha[i] += step
        alpha[j] -= step
        grad += step * (K[:, i] - K[:, j])
    alpha[alpha < eps_bound] = 0.0

    free = (alpha > eps_bound) & (alpha < C - eps_bound)
    if free.any():
        rho = float(grad[free].mean())
    else:
        up = grad[alpha < C - eps_bound]
        down = grad[alpha > eps_bound]
        lo = up.min() if up.size else grad.min()
        hi = down.max() if down.size else grad.max()
        rho = float(0.5 * (lo + hi))
    return alpha, rho, float(gap), converged


def dual_objective(K: np.ndarray, alpha: np.ndarray) -> float:
    return float(0.5 * alpha @ K @ alpha)


class OCSVM(BaseDetector):
    """One-class SVM scoring ``sum_i a_i k(x_i, x) - rho``.

    Parameters
    ----------
    bandwidth : float, optional
        Gaussian kernel width; defaults to the ``quantile`` of pairwise
        training distances.
    quantile : float, default=0.3
    nu : float, default=0.5
        Upper bound on the fraction of training points outside the
        estimated support.
    tol : float, default=1e-6
        KKT gap tolerance of the dual solver.
    max_sweeps : int, default=10000
        Iteration cap, in multiples of the training size.
    """

    family = "OCSVM"

    def __init__(self, bandwidth=None, quantile=DEFAULT_SIGMA_QUANTILE, nu=0.5, tol=1e-6, max_sweeps=10_000):
        self.bandwidth = bandwidth
        self.quantile = quantile
        self.nu = nu
        self.tol = tol
        self.max_sweeps = max_sweeps

    def fit(self, X, y=None):
        X = self._validate_fit(X)
        if not 0 < self.nu <= 1:
            raise ValueError("nu must lie in (0, 1]")
        sigma = self.bandwidth
        if sigma is None:
            sigma = distance_quantile_sigma(X, self.quantile)
        if not sigma > 0:
            raise ValueError("bandwidth must be positive")
        self.sigma_ = float(sigma)
        K = gaussian_kernel(X, X, self.sigma_)
        alpha, rho, gap, converged = solve_one_class_dual(K, self.nu, self.tol, self.max_sweeps)
        if not converged:
            warnings.warn(NonConvergenceWarning(f"OCSVM dual stopped with KKT gap {gap:.3g}"), stacklevel=2)
        self.converged_ = converged
        self.kkt_gap_ = gap
        self.objective_ = dual_objective(K, alpha)
        support = alpha > 0
        self.support_vectors_ = X[support]
        self.dual_coef_ = alpha[support]
        self.alpha_ = alpha
        self.rho_ = rho
        return self

    @property
    def hyper_(self):
        return self.sigma_

    def score_samples(self, X) -> np.ndarray:
        X = self._validate_score(X)
        return gaussian_kernel(X, self.support_vectors_, self.sigma_) @ self.dual_coef_ - self.rho_

    def _get_state(self):
        return {"sigma": self.sigma_, "rho": self.rho_, "support_vectors": self.support_vectors_,
                "dual_coef": self.dual_coef_, "converged": self.converged_}

    def _set_state(self, state):
        self.sigma_ = float(state["sigma"])
        self.rho_ = float(state["rho"])
        self.support_vectors_ = np.asarray(state["support_vectors"], dtype=float)
        self.dual_coef_ = np.asarray(state["dual_coef"], dtype=float)
        self.converged_ = bool(state["converged"])
        self.n_features_in_ = self.support_vectors_.shape[1]
