"""Feature-distribution divergence: proxy A-distance and a PCA projection."""

import logging
from dataclasses import dataclass

import numpy as np
from sklearn.decomposition import PCA
from sklearn.linear_model import SGDClassifier
from sklearn.model_selection import train_test_split
from sklearn.preprocessing import StandardScaler

logger = logging.getLogger(__name__)


def _as_features(name: str, features) -> np.ndarray:
    array = np.asarray(features, dtype=np.float64)
    if array.ndim != 2:
        raise ValueError(f"{name} must be N x D, got shape {array.shape}")
    return array


def a_distance(
    features_source,
    features_target,
    seed: int = 0,
    epochs: int = 200,
    lr: float = 0.01,
) -> float:
    """
    Proxy A-distance between two feature sets.

    A logistic domain classifier is trained on a stratified half of the pooled
    (standardized) features and scored on the other half; with held-out error
    ``err`` the distance is ``2 * (1 - 2 * err)`` clipped to [0, 2].

    Args:
        features_source: N_s x D features.
        features_target: N_t x D features.
        seed: Seed for the split and the classifier's shuffling.
        epochs: Passes of SGD over the training half.
        lr: Constant SGD learning rate.

    Returns:
        Distance in [0, 2]; 0 means indistinguishable.

    Raises:
        ValueError: If a set has fewer than two points or the widths differ.
    """
    source = _as_features("features_source", features_source)
    target = _as_features("features_target", features_target)
    if source.shape[0] < 2 or target.shape[0] < 2:
        raise ValueError("a_distance needs at least two points per feature set")
    if source.shape[1] != target.shape[1]:
        raise ValueError(f"feature widths differ: {source.shape[1]} vs {target.shape[1]}")

    x = np.concatenate([source, target])
    y = np.concatenate([np.zeros(len(source), dtype=np.int64), np.ones(len(target), dtype=np.int64)])
    x_train, x_test, y_train, y_test = train_test_split(x, y, test_size=0.5, random_state=seed, stratify=y)
    scaler = StandardScaler().fit(x_train)
    classifier = SGDClassifier(
        loss="log_loss",
        learning_rate="constant",
        eta0=lr,
        max_iter=epochs,
        tol=None,
        random_state=seed,
    )
    classifier.fit(scaler.transform(x_train), y_train)
    error = 1.0 - classifier.score(scaler.transform(x_test), y_test)
    distance = float(np.clip(2.0 * (1.0 - 2.0 * error), 0.0, 2.0))
    logger.debug("a_distance: held-out error %.4f -> %.4f", error, distance)
    return distance


@dataclass(frozen=True)
class PCAProjection:
    coordinates: np.ndarray
    explained_variance_ratio: np.ndarray
    components: np.ndarray
    mean: np.ndarray


def pca_project(features, dim: int = 2) -> PCAProjection:
    """
    Project mean-centered features onto their top ``dim`` principal components.

    Each component's sign is fixed so its largest-magnitude loading is positive.

    Raises:
        ValueError: With fewer than dim + 1 samples or zero total variance.
    """
    x = _as_features("features", features)
    if x.shape[0] < dim + 1:
        raise ValueError(f"pca_project needs at least {dim + 1} samples, got {x.shape[0]}")
    if dim > x.shape[1]:
        raise ValueError(f"cannot project {x.shape[1]}-dimensional features onto {dim} components")
    if float(x.var(axis=0).sum()) == 0.0:
        raise ValueError("features have zero variance")
    pca = PCA(n_components=dim, svd_solver="full").fit(x)
    components = pca.components_.copy()
    pivots = np.abs(components).argmax(axis=1)
    signs = np.sign(components[np.arange(dim), pivots])
    signs[signs == 0] = 1.0
    components *= signs[:, None]
    mean = pca.mean_
    return PCAProjection(
        coordinates=(x - mean) @ components.T,
        explained_variance_ratio=pca.explained_variance_ratio_.copy(),
        components=components,
        mean=mean.copy(),
    )
