from abc import ABC, abstractmethod

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils import check_array
from sklearn.utils.validation import check_is_fitted

from csae.errors import EmptyDatasetError, LabelRangeError, TensorShapeError


class LatentClassifier(BaseEstimator, ClassifierMixin, ABC):
    """
    Abstract base class for the classical classifiers fitted on latent codes
    (or raw pixels).

    Labels are encoded to 0..n_classes-1 in sorted order before ``_fit``;
    every tie between classes therefore resolves to the lowest label.
    """

    name = "classifier"

    def fit(self, X, y):
        X = check_array(X, dtype=np.float64)
        y = np.asarray(y)
        if y.ndim != 1 or len(y) != len(X):
            raise TensorShapeError(f"{len(X)} feature rows but labels of shape {y.shape}")
        if len(X) == 0:
            raise EmptyDatasetError(f"{self.name}: empty training set")
        if np.any(y < 0):
            raise LabelRangeError(f"{self.name}: labels must be non-negative")

        self.classes_, encoded = np.unique(y, return_inverse=True)
        self.n_features_in_ = X.shape[1]
        self._fit(X, encoded)
        return self

    def predict(self, X):
        check_is_fitted(self, "classes_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise TensorShapeError(f"{self.name}: fitted on {self.n_features_in_} features, got {X.shape[1]}")
        return self.classes_[self._predict(X)]

    @abstractmethod
    def _fit(self, X: np.ndarray, y: np.ndarray) -> None:
        """Fit on float64 features and encoded labels 0..n_classes-1."""

    @abstractmethod
    def _predict(self, X: np.ndarray) -> np.ndarray:
        """Encoded label per row."""
