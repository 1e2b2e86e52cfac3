"""Hyperparameter grids, rule-of-thumb defaults and a-posteriori sweeps.

OPT picks the grid value with the best AUC on the *test* set. That is an
optimistic protocol, kept on purpose so results are comparable with the
benchmark's published methodology; Default uses fixed rules that never
look at test labels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..detect import (
    DEFAULT_N_TREES,
    K_GRID,
    N_TREES_GRID,
    SIGMA_QUANTILES,
    BaseDetector,
    derive_seed,
    dim_grid,
    make_detector,
    pca_mle_dim,
    quickshiftpp_mode_count,
)
from ..detect.kde import DEFAULT_SIGMA_QUANTILE, pairwise_distances_sorted, quantile_of_sorted
from ..exceptions import FlowbenchError

TUNING_MODES = ("OPT", "Default")

# failures that mark a grid point or cell as failed instead of aborting
CELL_ERRORS = (FlowbenchError, ValueError, ArithmeticError, np.linalg.LinAlgError)


def _dedupe(values):
    seen, out = set(), []
    for v in values:
        if v not in seen:
            seen.add(v)
            out.append(v)
    return out


def hyper_grid(family: str, X) -> list:
    """Candidate hyperparameter values for ``family`` on training data ``X``.

    Bandwidths for OCSVM/KDE are the distance quantiles 0.1..0.9, 0.95;
    repeated values (e.g. from the dimension formula) are evaluated once.
    """
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    if family in ("OCSVM", "KDE"):
        dists = pairwise_distances_sorted(X)
        return [quantile_of_sorted(dists, q) for q in SIGMA_QUANTILES]
    if family == "GMM":
        return [k for k in K_GRID if k <= n]
    if family == "IF":
        return list(N_TREES_GRID)
    if family in ("PCA", "AE"):
        return _dedupe(dim_grid(d))
    raise ValueError(f"unknown family {family!r}")


def default_hyper(family: str, X):
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    if family in ("OCSVM", "KDE"):
        return quantile_of_sorted(pairwise_distances_sorted(X), DEFAULT_SIGMA_QUANTILE)
    if family == "GMM":
        return quickshiftpp_mode_count(X)
    if family == "IF":
        return DEFAULT_N_TREES
    if family == "PCA":
        centered = X - X.mean(axis=0)
        eig = np.sort(np.linalg.eigvalsh(centered.T @ centered / n))[::-1]
        return pca_mle_dim(eig, n)
    if family == "AE":
        return math.ceil(d / 2)
    raise ValueError(f"unknown family {family!r}")


def model_seed(global_seed: int, family: str, hyper_index: int | str) -> int:
    """Per-model seed. Isolation forests ignore the grid index so every
    forest in a sweep is a prefix of the largest one."""
    if family == "IF":
        return derive_seed(global_seed, family)
    return derive_seed(global_seed, family, hyper_index)


@dataclass
class SweepResult:
    best_hyper: object
    best_auc: float
    best_index: int
    aucs: list = field(default_factory=list)
    failures: dict = field(default_factory=dict)


def sweep_opt(
    family: str,
    grid: Sequence,
    X_train,
    evaluate: Callable[[BaseDetector], float],
    seed: int = 0,
) -> SweepResult:
    """Fit one model per grid value and keep the best ``evaluate(model)``.

    Ties go to the earlier grid value. A grid value whose fit fails is
    recorded in ``failures`` and skipped; if all fail the last error is
    raised.
    """
    if len(grid) == 0:
        raise ValueError("empty hyperparameter grid")
    aucs: list[float | None] = []
    failures = {}
    last_exc = None
    if family == "IF":
        # nested forests: fit the largest once and score prefixes
        big = make_detector("IF", max(grid), model_seed(seed, "IF", 0)).fit(X_train)
        models = (big.truncated(k) for k in grid)
    else:
        models = None
    for idx, value in enumerate(grid):
        try:
            if models is not None:
                model = next(models)
            else:
                model = make_detector(family, value, model_seed(seed, family, idx)).fit(X_train)
            aucs.append(float(evaluate(model)))
        except CELL_ERRORS as exc:
            aucs.append(None)
            failures[idx] = f"{type(exc).__name__}: {exc}"
            last_exc = exc
    valid = [(a, i) for i, a in enumerate(aucs) if a is not None]
    if not valid:
        raise last_exc
    best_auc = max(a for a, _ in valid)
    best_index = min(i for a, i in valid if a == best_auc)
    return SweepResult(grid[best_index], best_auc, best_index, aucs, failures)


def fit_default(family: str, X_train, seed: int = 0, grid: Sequence | None = None) -> BaseDetector:
    """Fit with the rule-of-thumb hyperparameter.

    When the default value also appears in ``grid`` the model is seeded as
    that grid point, so Default and the OPT sweep share the fitted model.
    """
    value = default_hyper(family, X_train)
    if grid is not None and value in list(grid):
        key = list(grid).index(value)
    else:
        key = "default"
    return make_detector(family, value, model_seed(seed, family, key)).fit(X_train)
