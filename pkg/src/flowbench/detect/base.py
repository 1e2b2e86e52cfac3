"""Common estimator surface for the novelty detectors.

All detectors follow the scikit-learn outlier convention: ``score_samples``
returns a normality score, higher meaning more typical of the training
data. A query is novel when its score falls below a threshold; choosing
that threshold is left to the caller.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from ..exceptions import DimensionMismatch

FAMILIES = ("OCSVM", "KDE", "GMM", "IF", "PCA", "AE")


def derive_seed(*parts: int | str) -> int:
    """Stable 32-bit seed from integers and strings (order-sensitive)."""
    ints = []
    for p in parts:
        if isinstance(p, str):
            ints.extend(p.encode())
            ints.append(0)
        else:
            ints.append(int(p))
    return int(np.random.SeedSequence(ints).generate_state(1)[0])


class BaseDetector(BaseEstimator):
    family: str = ""

    def _validate_fit(self, X) -> np.ndarray:
        X = check_array(X, dtype=np.float64)
        self.n_features_in_ = X.shape[1]
        return X

    def _validate_score(self, X) -> np.ndarray:
        check_is_fitted(self, "n_features_in_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise DimensionMismatch(
                f"{type(self).__name__} was fitted on {self.n_features_in_} features, got {X.shape[1]}"
            )
        return X

    def score_samples(self, X) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    def decision_function(self, X) -> np.ndarray:
        return self.score_samples(X)

    @property
    def hyper_(self):
        """The hyperparameter value actually used by the fitted model."""
        raise NotImplementedError

    # serialization hooks; see :mod:`flowbench.detect.serialize`
    def _get_state(self) -> dict:  # pragma: no cover - abstract
        raise NotImplementedError

    def _set_state(self, state: dict) -> None:  # pragma: no cover - abstract
        raise NotImplementedError
