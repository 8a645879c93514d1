from typing import Tuple

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils import check_array
from sklearn.utils.validation import check_is_fitted

from csae import config
from csae.errors import EmptyDatasetError, TensorShapeError


class Standardizer(BaseEstimator, TransformerMixin):
    """Per-feature (x - mean) / std with the statistics of the fit data; std is floored."""

    def __init__(self, floor=config.STANDARDIZE_FLOOR):
        self.floor = floor

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        if len(X) == 0:
            raise EmptyDatasetError("Cannot standardize with an empty training set")
        self.mean_ = X.mean(axis=0)
        self.scale_ = np.maximum(X.std(axis=0), self.floor)
        return self

    def transform(self, X):
        check_is_fitted(self, "mean_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != len(self.mean_):
            raise TensorShapeError(f"Fitted on {len(self.mean_)} features, got {X.shape[1]}")
        return (X - self.mean_) / self.scale_


def standardize(train_x: np.ndarray, apply_x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    scaler = Standardizer().fit(train_x)
    return scaler.transform(train_x), scaler.transform(apply_x)
