"""Novelty detectors with a shared ``fit`` / ``score_samples`` surface."""

from .autoencoder import Autoencoder
from .base import FAMILIES, BaseDetector, derive_seed
from .gmm import GMM, K_GRID
from .iforest import DEFAULT_N_TREES, N_TREES_GRID, IsolationForest, average_path_length
from .kde import KDE, SIGMA_QUANTILES, distance_quantile_sigma, gaussian_kernel
from .ocsvm import OCSVM, solve_one_class_dual
from .pca import PCA, dim_grid, pca_mle_dim
from .quickshift import quickshiftpp_mode_count

DETECTORS = {
    "OCSVM": OCSVM,
    "KDE": KDE,
    "GMM": GMM,
    "IF": IsolationForest,
    "PCA": PCA,
    "AE": Autoencoder,
}

# name of the constructor argument each family is tuned over
HYPER_PARAM = {
    "OCSVM": "bandwidth",
    "KDE": "bandwidth",
    "GMM": "n_components",
    "IF": "n_trees",
    "PCA": "n_components",
    "AE": "latent_dim",
}

STOCHASTIC = {"GMM", "IF", "AE"}


def make_detector(family: str, hyper=None, random_state: int = 0, **kwargs) -> BaseDetector:
    """Construct an unfitted detector with its tuned hyperparameter set."""
    try:
        cls = DETECTORS[family]
    except KeyError:
        raise ValueError(f"unknown detector family {family!r}; choose from {', '.join(FAMILIES)}") from None
    if hyper is not None:
        kwargs[HYPER_PARAM[family]] = hyper
    if family in STOCHASTIC:
        kwargs.setdefault("random_state", random_state)
    return cls(**kwargs)


__all__ = [
    "Autoencoder", "BaseDetector", "DETECTORS", "FAMILIES", "GMM", "HYPER_PARAM", "IsolationForest",
    "KDE", "OCSVM", "PCA", "DEFAULT_N_TREES", "K_GRID", "N_TREES_GRID", "SIGMA_QUANTILES",
    "average_path_length", "derive_seed", "dim_grid", "distance_quantile_sigma", "gaussian_kernel",
    "make_detector", "pca_mle_dim", "quickshiftpp_mode_count", "solve_one_class_dual",
]
