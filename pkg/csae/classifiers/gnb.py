from dataclasses import dataclass
from typing import Optional

import numpy as np

from csae import config
from csae.classifiers.base import LatentClassifier
from csae.data import LatentDataset
from csae.errors import ConfigError, EmptyDatasetError, TensorShapeError


@dataclass
class GnbModel:
    classes: np.ndarray
    priors: np.ndarray
    means: np.ndarray  # [classes, features]
    variances: np.ndarray  # smoothed
    epsilon: float


def _fit_arrays(X: np.ndarray, y: np.ndarray, var_smoothing: float, num_classes: Optional[int]) -> GnbModel:
    classes = np.unique(y)
    if num_classes is not None:
        absent = sorted(set(range(num_classes)) - set(classes.tolist()))
        if absent:
            raise EmptyDatasetError(f"GNB: classes {absent} have no training samples")

    # a zero max variance (all features constant) still needs a positive floor
    epsilon = var_smoothing * float(np.var(X, axis=0).max())
    if epsilon <= 0:
        epsilon = var_smoothing

    means = np.stack([X[y == c].mean(axis=0) for c in classes])
    variances = np.stack([X[y == c].var(axis=0) for c in classes]) + epsilon
    priors = np.array([np.mean(y == c) for c in classes])
    return GnbModel(classes, priors, means, variances, epsilon)


def joint_log_likelihood(model: GnbModel, X: np.ndarray) -> np.ndarray:
    """log P(c) + sum_f log N(x_f | mean_cf, var_cf) for every row and class."""
    log_norm = -0.5 * np.sum(np.log(2.0 * np.pi * model.variances), axis=1)
    sq = np.stack(
        [np.sum((X - mean) ** 2 / var, axis=1) for mean, var in zip(model.means, model.variances)], axis=1
    )
    return np.log(model.priors)[None, :] + log_norm[None, :] - 0.5 * sq


def gnb_fit(
    train: LatentDataset,
    var_smoothing: float = config.CLASSIFIERS["gnb"]["var_smoothing"],
    num_classes: Optional[int] = None,
) -> GnbModel:
    if train.y is None:
        raise ConfigError("GNB training set has no labels")
    if len(train) == 0:
        raise EmptyDatasetError("GNB needs a non-empty training set")
    return _fit_arrays(np.asarray(train.z, dtype=np.float64), np.asarray(train.y), var_smoothing, num_classes)


def gnb_predict(model: GnbModel, query: np.ndarray) -> np.ndarray:
    query = np.asarray(query, dtype=np.float64)
    if query.ndim != 2 or query.shape[1] != model.means.shape[1]:
        raise TensorShapeError(f"Query must be [m, {model.means.shape[1]}], got {query.shape}")
    # argmax keeps the first maximum: ties go to the lowest class
    return model.classes[np.argmax(joint_log_likelihood(model, query), axis=1)]


class GaussianNaiveBayes(LatentClassifier):
    name = "gnb"

    def __init__(self, var_smoothing=config.CLASSIFIERS["gnb"]["var_smoothing"], num_classes=None, logger=None):
        self.var_smoothing = var_smoothing
        self.num_classes = num_classes
        self.logger = logger

    def _fit(self, X, y):
        if self.num_classes is not None:
            absent = sorted(set(range(self.num_classes)) - set(self.classes_.tolist()))
            if absent:
                raise EmptyDatasetError(f"GNB: classes {absent} have no training samples")
        self.model_ = _fit_arrays(X, y, self.var_smoothing, None)
        if self.logger:
            self.logger.log_verbose(f"GNB: {len(self.model_.classes)} classes, epsilon={self.model_.epsilon:.3e}")

    def _predict(self, X):
        return gnb_predict(self.model_, X)
